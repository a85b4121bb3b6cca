#pragma once

// Core domain types: the claims table (sources x items -> value), per-source
// statistics, canonical source pairs and shared-item counts.

#include <copydet/csv.hpp>
#include <copydet/error.hpp>

#include <algorithm>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace copydet {

using SourceId = std::uint32_t;
using ItemId = std::uint32_t;
using ValueId = std::uint32_t;

struct Claim {
    ItemId item;
    ValueId value;
};

struct Provider {
    SourceId source;
    ValueId value;
};

/// Immutable claims table. Sources, items and per-item values are interned
/// and numbered in lexicographic order of their names, so a lower SourceId
/// always means a lexicographically smaller source name.
class Dataset {
  public:
    Dataset() = default;

    std::size_t source_count() const noexcept { return sources_.size(); }
    std::size_t item_count() const noexcept { return items_.size(); }
    std::size_t claim_count() const noexcept { return claim_count_; }
    std::size_t value_count(ItemId item) const { return values_[item].size(); }

    const std::string& source_name(SourceId s) const { return sources_[s]; }
    const std::string& item_name(ItemId d) const { return items_[d]; }
    const std::string& value_name(ItemId d, ValueId v) const { return values_[d][v]; }

    /// Claims of one source, sorted by item.
    std::span<const Claim> claims_of(SourceId s) const { return by_source_[s]; }
    /// Providers of one item, sorted by source.
    std::span<const Provider> providers_of(ItemId d) const { return by_item_[d]; }

    std::optional<SourceId> find_source(std::string_view name) const
    {
        return find_in(sources_, name);
    }
    std::optional<ItemId> find_item(std::string_view name) const { return find_in(items_, name); }
    std::optional<ValueId> find_value(ItemId d, std::string_view name) const
    {
        return find_in(values_[d], name);
    }

    /// The value `s` claims on `d`, if any.
    std::optional<ValueId> value_of(SourceId s, ItemId d) const
    {
        const auto& claims = by_source_[s];
        auto it = std::lower_bound(claims.begin(), claims.end(), d,
                                   [](const Claim& c, ItemId item) { return c.item < item; });
        if (it == claims.end() || it->item != d) {
            return std::nullopt;
        }
        return it->value;
    }

    friend bool operator==(const Dataset& x, const Dataset& y)
    {
        if (x.sources_ != y.sources_ || x.items_ != y.items_ || x.values_ != y.values_) {
            return false;
        }
        for (std::size_t s = 0; s < x.by_source_.size(); ++s) {
            const auto& cx = x.by_source_[s];
            const auto& cy = y.by_source_[s];
            if (cx.size() != cy.size()) {
                return false;
            }
            for (std::size_t i = 0; i < cx.size(); ++i) {
                if (cx[i].item != cy[i].item || cx[i].value != cy[i].value) {
                    return false;
                }
            }
        }
        return true;
    }

  private:
    friend class DatasetBuilder;

    template <typename Names>
    static std::optional<std::uint32_t> find_in(const Names& names, std::string_view name)
    {
        auto it = std::lower_bound(names.begin(), names.end(), name);
        if (it == names.end() || *it != name) {
            return std::nullopt;
        }
        return static_cast<std::uint32_t>(it - names.begin());
    }

    std::vector<std::string> sources_;
    std::vector<std::string> items_;
    std::vector<std::vector<std::string>> values_;
    std::vector<std::vector<Claim>> by_source_;
    std::vector<std::vector<Provider>> by_item_;
    std::size_t claim_count_ = 0;
};

inline std::string_view trim(std::string_view s)
{
    constexpr std::string_view ws = " \t\r\n";
    auto b = s.find_first_not_of(ws);
    if (b == std::string_view::npos) {
        return {};
    }
    auto e = s.find_last_not_of(ws);
    return s.substr(b, e - b + 1);
}

/// Collects claims by name and interns them into a Dataset.
class DatasetBuilder {
  public:
    /// Throws ConflictError if (source, item) was already claimed.
    void add(std::string_view source, std::string_view item, std::string_view value)
    {
        auto [it, inserted] =
            claims_.try_emplace({std::string(source), std::string(item)}, std::string(value));
        if (!inserted) {
            throw ConflictError("duplicate claim for source '" + std::string(source)
                                + "' on item '" + std::string(item) + "'");
        }
    }

    Dataset build() &&
    {
        Dataset d;
        std::map<std::string, std::map<std::string, ValueId>> item_values;
        std::map<std::string, SourceId> sources;
        for (const auto& [key, value] : claims_) {
            sources.emplace(key.first, 0);
            item_values[key.second].emplace(value, 0);
        }
        for (auto& [name, id] : sources) {
            id = static_cast<SourceId>(d.sources_.size());
            d.sources_.push_back(name);
        }
        std::map<std::string, ItemId> items;
        for (auto& [name, values] : item_values) {
            items.emplace(name, static_cast<ItemId>(d.items_.size()));
            d.items_.push_back(name);
            std::vector<std::string> names;
            for (auto& [v, id] : values) {
                id = static_cast<ValueId>(names.size());
                names.push_back(v);
            }
            d.values_.push_back(std::move(names));
        }
        d.by_source_.resize(d.sources_.size());
        d.by_item_.resize(d.items_.size());
        for (const auto& [key, value] : claims_) {
            SourceId s = sources.at(key.first);
            ItemId item = items.at(key.second);
            ValueId v = item_values.at(key.second).at(value);
            d.by_source_[s].push_back({item, v});
            d.by_item_[item].push_back({s, v});
        }
        for (auto& claims : d.by_source_) {
            std::sort(claims.begin(), claims.end(),
                      [](const Claim& x, const Claim& y) { return x.item < y.item; });
        }
        for (auto& providers : d.by_item_) {
            std::sort(providers.begin(), providers.end(),
                      [](const Provider& x, const Provider& y) { return x.source < y.source; });
        }
        d.claim_count_ = claims_.size();
        return d;
    }

  private:
    std::map<std::pair<std::string, std::string>, std::string> claims_;
};

/// Reads the claims-CSV format: header `source_id,item_id,value`, one claim
/// per row. Fields are trimmed; empty fields are rejected.
inline Dataset load_dataset(std::istream& in)
{
    csv::Reader reader(in);
    auto header = reader.next();
    if (!header) {
        throw ParseError(1, "missing header `source_id,item_id,value`");
    }
    if (header->fields.size() != 3 || trim(header->fields[0]) != "source_id"
        || trim(header->fields[1]) != "item_id" || trim(header->fields[2]) != "value") {
        throw ParseError(header->line, "expected header `source_id,item_id,value`");
    }
    DatasetBuilder builder;
    while (auto rec = reader.next()) {
        if (rec->fields.size() != 3) {
            throw ParseError(rec->line, "expected 3 columns, got "
                                            + std::to_string(rec->fields.size()));
        }
        auto source = trim(rec->fields[0]);
        auto item = trim(rec->fields[1]);
        auto value = trim(rec->fields[2]);
        if (source.empty() || item.empty()) {
            throw ParseError(rec->line, "empty source or item id");
        }
        if (value.empty()) {
            throw ParseError(rec->line, "empty value (omit the row for a missing value)");
        }
        try {
            builder.add(source, item, value);
        } catch (const ConflictError& e) {
            throw ConflictError("line " + std::to_string(rec->line) + ": " + e.what());
        }
    }
    return std::move(builder).build();
}

inline void write_dataset(std::ostream& out, const Dataset& d)
{
    out << "source_id,item_id,value\n";
    for (SourceId s = 0; s < d.source_count(); ++s) {
        for (const auto& c : d.claims_of(s)) {
            csv::write_row(out, {d.source_name(s), d.item_name(c.item), d.value_name(c.item, c.value)});
        }
    }
}

/// P(D.v) for every observed value, indexed like the dataset's values.
class ValueProbs {
  public:
    ValueProbs() = default;
    ValueProbs(const Dataset& d, double init)
    {
        probs_.resize(d.item_count());
        for (ItemId i = 0; i < d.item_count(); ++i) {
            probs_[i].assign(d.value_count(i), init);
        }
    }

    double operator()(ItemId d, ValueId v) const { return probs_[d][v]; }
    double& operator()(ItemId d, ValueId v) { return probs_[d][v]; }
    std::span<const double> item(ItemId d) const { return probs_[d]; }
    std::span<double> item(ItemId d) { return probs_[d]; }
    std::size_t item_count() const noexcept { return probs_.size(); }

    friend bool operator==(const ValueProbs&, const ValueProbs&) = default;

  private:
    std::vector<std::vector<double>> probs_;
};

/// Per-source accuracy A(S) and item count |D(S)|.
struct SourceStats {
    std::vector<double> accuracy;
    std::vector<std::uint32_t> item_count;

    static SourceStats uniform(const Dataset& d, double a)
    {
        SourceStats st;
        st.accuracy.assign(d.source_count(), a);
        st.item_count.resize(d.source_count());
        for (SourceId s = 0; s < d.source_count(); ++s) {
            st.item_count[s] = static_cast<std::uint32_t>(d.claims_of(s).size());
        }
        return st;
    }

    static SourceStats with_accuracy(const Dataset& d, std::vector<double> acc)
    {
        if (acc.size() != d.source_count()) {
            throw ContractViolation("accuracy vector size does not match source count");
        }
        auto st = uniform(d, 0.0);
        st.accuracy = std::move(acc);
        return st;
    }

    void clamp(double eps)
    {
        for (auto& a : accuracy) {
            a = std::clamp(a, eps, 1.0 - eps);
        }
    }
};

/// Unordered source pair in canonical form (a < b).
struct SourcePair {
    SourceId a;
    SourceId b;

    friend auto operator<=>(const SourcePair&, const SourcePair&) = default;
};

inline SourcePair canonical_pair(SourceId x, SourceId y)
{
    if (x == y) {
        throw ContractViolation("a source cannot pair with itself");
    }
    return x < y ? SourcePair{x, y} : SourcePair{y, x};
}

/// Dense slot numbering for the upper triangle of an n x n pair matrix.
class PairSlots {
  public:
    PairSlots() = default;
    explicit PairSlots(std::size_t n) : n_(n) {}

    std::size_t size() const noexcept { return n_ < 2 ? 0 : n_ * (n_ - 1) / 2; }
    std::size_t source_count() const noexcept { return n_; }

    std::size_t slot(SourceId a, SourceId b) const noexcept
    {
        // requires a < b
        return static_cast<std::size_t>(a) * (2 * n_ - a - 1) / 2 + (b - a - 1);
    }
    std::size_t slot(SourcePair p) const noexcept { return slot(p.a, p.b); }

  private:
    std::size_t n_ = 0;
};

struct PairOverlap {
    SourcePair pair;
    std::uint32_t shared_items;  // l(S1,S2)

    friend bool operator==(const PairOverlap&, const PairOverlap&) = default;
};

/// Shared-item counts l(S1,S2) for every source pair, dense.
class Overlaps {
  public:
    Overlaps() = default;
    explicit Overlaps(std::size_t n_sources) : slots_(n_sources), counts_(slots_.size(), 0) {}

    std::uint32_t l(SourceId x, SourceId y) const { return counts_[slots_.slot(canonical_pair(x, y))]; }
    std::uint32_t l(SourcePair p) const { return counts_[slots_.slot(p)]; }
    std::uint32_t& at(SourcePair p) { return counts_[slots_.slot(p)]; }
    const PairSlots& slots() const noexcept { return slots_; }

    /// Pairs sharing at least one item, in canonical order.
    std::vector<PairOverlap> pairs() const
    {
        std::vector<PairOverlap> out;
        auto n = slots_.source_count();
        for (SourceId a = 0; a + 1 < n; ++a) {
            for (SourceId b = a + 1; b < n; ++b) {
                auto c = counts_[slots_.slot(a, b)];
                if (c != 0) {
                    out.push_back({{a, b}, c});
                }
            }
        }
        return out;
    }

  private:
    PairSlots slots_;
    std::vector<std::uint32_t> counts_;
};

/// l(S1,S2) = |D(S1) & D(S2)| for all pairs, counted item by item.
inline Overlaps pair_overlaps(const Dataset& d)
{
    Overlaps ov(d.source_count());
    for (ItemId item = 0; item < d.item_count(); ++item) {
        auto providers = d.providers_of(item);
        for (std::size_t i = 0; i < providers.size(); ++i) {
            for (std::size_t j = i + 1; j < providers.size(); ++j) {
                ++ov.at({providers[i].source, providers[j].source});
            }
        }
    }
    return ov;
}

}  // namespace copydet
