#pragma once

// Synthetic claim generator with planted copiers, plus the quality metrics
// used to compare detection and fusion runs.

#include <copydet/csv.hpp>
#include <copydet/detect.hpp>
#include <copydet/error.hpp>
#include <copydet/fusion.hpp>
#include <copydet/model.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <random>
#include <set>
#include <string>
#include <vector>

namespace copydet {

struct SynthConfig {
    std::uint32_t n_sources = 50;
    std::uint32_t n_items = 1000;
    double accuracy_low = 0.3;
    double accuracy_high = 0.8;
    std::uint32_t n_false = 50;      // false values per item
    double copier_fraction = 0.1;    // of all sources
    double selectivity = 0.8;        // probability a copier copies a shared item
    double coverage_low = 0.2;       // per-source fraction of items
    double coverage_high = 0.8;
    double coverage_skew = 1.0;      // coverage = low + (high - low) * u^skew
    std::uint64_t seed = 1;

    void validate() const
    {
        if (n_sources == 0 || n_items == 0) {
            throw ConfigError("need at least one source and one item");
        }
        if (!(accuracy_low >= 0.0 && accuracy_low <= accuracy_high && accuracy_high <= 1.0)) {
            throw ConfigError("accuracy range must satisfy 0 <= low <= high <= 1");
        }
        if (!(coverage_low >= 0.0 && coverage_low <= coverage_high && coverage_high <= 1.0)) {
            throw ConfigError("coverage range must satisfy 0 <= low <= high <= 1");
        }
        if (!(copier_fraction >= 0.0 && copier_fraction <= 1.0)) {
            throw ConfigError("copier fraction must be in [0, 1]");
        }
        if (!(selectivity >= 0.0 && selectivity <= 1.0)) {
            throw ConfigError("selectivity must be in [0, 1]");
        }
        if (!(coverage_skew > 0.0)) {
            throw ConfigError("coverage skew must be > 0");
        }
        if (n_false == 0) {
            throw ConfigError("need at least one false value per item");
        }
        if (copier_count() > 0 && copier_count() >= n_sources) {
            throw ConfigError("copiers need at least one independent source");
        }
    }

    std::uint32_t copier_count() const
    {
        return static_cast<std::uint32_t>(std::lround(copier_fraction * n_sources));
    }
};

struct CopyEdge {
    std::string copier;
    std::string origin;
    double selectivity = 0.0;
};

struct GroundTruth {
    std::vector<std::pair<std::string, std::string>> true_values;  // item, value
    std::vector<CopyEdge> edges;
    std::vector<std::pair<std::string, double>> accuracies;  // realized, per source
};

struct DatasetShape {
    std::size_t sources = 0;
    std::size_t items = 0;
    std::size_t claims = 0;
    double mean_values_per_item = 0.0;  // over items with at least one claim
    double mean_items_per_source = 0.0;
    std::size_t small_sources = 0;      // sources with at most 10 items
};

struct SynthData {
    Dataset data;
    GroundTruth truth;
};

inline std::string padded(char prefix, std::uint32_t i, std::uint32_t count)
{
    int width = 1;
    for (std::uint32_t x = count > 0 ? count - 1 : 0; x >= 10; x /= 10) {
        ++width;
    }
    auto digits = std::to_string(i);
    return prefix + std::string(width > int(digits.size()) ? width - digits.size() : 0, '0') + digits;
}

/// Independent sources claim the true value with their accuracy and a
/// uniform false value otherwise. The last copier_count() sources each copy
/// from one independent source chosen uniformly: on items both cover they
/// copy with probability `selectivity`, elsewhere they behave independently.
inline SynthData generate(const SynthConfig& cfg)
{
    cfg.validate();
    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_int_distribution<std::uint32_t> false_value(1, cfg.n_false);

    const auto ns = cfg.n_sources;
    const auto ni = cfg.n_items;
    const auto ncopy = cfg.copier_count();
    const auto nind = ns - ncopy;

    std::vector<double> accuracy(ns), coverage(ns);
    for (std::uint32_t s = 0; s < ns; ++s) {
        accuracy[s] = cfg.accuracy_low + (cfg.accuracy_high - cfg.accuracy_low) * unit(rng);
        coverage[s] = cfg.coverage_low + (cfg.coverage_high - cfg.coverage_low) * std::pow(unit(rng), cfg.coverage_skew);
    }
    std::vector<std::uint32_t> origin(ns, ns);
    if (ncopy > 0) {
        std::uniform_int_distribution<std::uint32_t> pick(0, nind - 1);
        for (std::uint32_t s = nind; s < ns; ++s) {
            origin[s] = pick(rng);
        }
    }

    // value 0 is the true value; 0xffffffff marks "no claim"
    constexpr std::uint32_t none = 0xffffffffu;
    std::vector<std::vector<std::uint32_t>> claim(ns, std::vector<std::uint32_t>(ni, none));
    for (std::uint32_t s = 0; s < ns; ++s) {
        for (std::uint32_t i = 0; i < ni; ++i) {
            if (unit(rng) >= coverage[s]) {
                continue;
            }
            auto o = origin[s];
            if (o != ns && claim[o][i] != none && unit(rng) < cfg.selectivity) {
                claim[s][i] = claim[o][i];
            } else {
                claim[s][i] = unit(rng) < accuracy[s] ? 0 : false_value(rng);
            }
        }
    }

    SynthData out;
    DatasetBuilder b;
    std::vector<std::string> sname(ns), iname(ni);
    for (std::uint32_t s = 0; s < ns; ++s) {
        sname[s] = padded('S', s, ns);
    }
    for (std::uint32_t i = 0; i < ni; ++i) {
        iname[i] = padded('D', i, ni);
        out.truth.true_values.emplace_back(iname[i], "V0");
    }
    for (std::uint32_t s = 0; s < ns; ++s) {
        std::size_t n = 0, right = 0;
        for (std::uint32_t i = 0; i < ni; ++i) {
            if (claim[s][i] == none) {
                continue;
            }
            b.add(sname[s], iname[i], "V" + std::to_string(claim[s][i]));
            ++n;
            right += claim[s][i] == 0;
        }
        out.truth.accuracies.emplace_back(sname[s], n ? double(right) / n : 0.0);
        if (origin[s] != ns) {
            out.truth.edges.push_back({sname[s], sname[origin[s]], cfg.selectivity});
        }
    }
    out.data = std::move(b).build();
    return out;
}

inline DatasetShape shape_of(const Dataset& d)
{
    DatasetShape sh;
    sh.sources = d.source_count();
    sh.items = d.item_count();
    sh.claims = d.claim_count();
    std::size_t values = 0, items = 0;
    for (ItemId i = 0; i < d.item_count(); ++i) {
        if (!d.providers_of(i).empty()) {
            values += d.value_count(i);
            ++items;
        }
    }
    sh.mean_values_per_item = items ? double(values) / items : 0.0;
    sh.mean_items_per_source = sh.sources ? double(sh.claims) / sh.sources : 0.0;
    for (SourceId s = 0; s < d.source_count(); ++s) {
        sh.small_sources += d.claims_of(s).size() <= 10;
    }
    return sh;
}

inline void write_truth(std::ostream& out, const GroundTruth& t)
{
    out << "item_id,value\n";
    for (const auto& [item, value] : t.true_values) {
        csv::write_row(out, {item, value});
    }
}

inline void write_edges(std::ostream& out, const GroundTruth& t)
{
    out << "copier,origin,selectivity\n";
    for (const auto& e : t.edges) {
        csv::write_row(out, {e.copier, e.origin, csv::format_double(e.selectivity)});
    }
}

struct Metrics {
    double precision = 1.0;
    double recall = 1.0;
    double f_measure = 1.0;
};

using NamedPair = std::pair<std::string, std::string>;  // ordered by name

inline NamedPair named_pair(std::string x, std::string y)
{
    if (y < x) {
        std::swap(x, y);
    }
    return {std::move(x), std::move(y)};
}

/// Precision, recall and F of `found` against `reference`. An empty set on
/// either side counts as perfect for its ratio; F is 0 when P + R is 0.
inline Metrics compare_pairs(const std::set<NamedPair>& found, const std::set<NamedPair>& reference)
{
    std::size_t hit = 0;
    for (const auto& p : found) {
        hit += reference.count(p);
    }
    Metrics m;
    m.precision = found.empty() ? 1.0 : double(hit) / found.size();
    m.recall = reference.empty() ? 1.0 : double(hit) / reference.size();
    double s = m.precision + m.recall;
    m.f_measure = s > 0.0 ? 2.0 * m.precision * m.recall / s : 0.0;
    return m;
}

inline std::set<NamedPair> copying_names(const Dataset& d, const CopyReport& rep)
{
    std::set<NamedPair> out;
    for (const auto& p : rep.copying_pairs()) {
        out.insert(named_pair(d.source_name(p.a), d.source_name(p.b)));
    }
    return out;
}

inline std::set<NamedPair> edge_names(const GroundTruth& t)
{
    std::set<NamedPair> out;
    for (const auto& e : t.edges) {
        out.insert(named_pair(e.copier, e.origin));
    }
    return out;
}

inline Metrics compare_reports(const Dataset& da, const CopyReport& found, const Dataset& db, const CopyReport& reference)
{
    return compare_pairs(copying_names(da, found), copying_names(db, reference));
}

inline Metrics compare_to_truth(const Dataset& d, const CopyReport& found, const GroundTruth& t)
{
    return compare_pairs(copying_names(d, found), edge_names(t));
}

/// Share of items whose top value matches the gold value; items absent
/// from the dataset are skipped.
inline double fusion_accuracy(const Dataset& d, const ValueProbs& probs, const GroundTruth& t)
{
    auto top = top_values(d, probs);
    std::size_t n = 0, right = 0;
    for (const auto& [item, value] : t.true_values) {
        auto i = d.find_item(item);
        if (!i || d.providers_of(*i).empty()) {
            continue;
        }
        ++n;
        right += d.value_name(*i, top[*i]) == value;
    }
    return n ? double(right) / n : 1.0;
}

/// Share of common items whose top values differ between two runs.
inline double fusion_difference(const Dataset& da, const ValueProbs& pa, const Dataset& db, const ValueProbs& pb)
{
    auto ta = top_values(da, pa);
    auto tb = top_values(db, pb);
    std::size_t n = 0, differ = 0;
    for (ItemId i = 0; i < da.item_count(); ++i) {
        auto j = db.find_item(da.item_name(i));
        if (!j || da.providers_of(i).empty() || db.providers_of(*j).empty()) {
            continue;
        }
        ++n;
        differ += da.value_name(i, ta[i]) != db.value_name(*j, tb[*j]);
    }
    return n ? double(differ) / n : 0.0;
}

/// Mean absolute accuracy difference over sources present in both runs.
inline double accuracy_variance(const Dataset& da, const SourceStats& sa, const Dataset& db, const SourceStats& sb)
{
    std::size_t n = 0;
    double sum = 0.0;
    for (SourceId s = 0; s < da.source_count(); ++s) {
        auto t = db.find_source(da.source_name(s));
        if (!t) {
            continue;
        }
        ++n;
        sum += std::abs(sa.accuracy[s] - sb.accuracy[*t]);
    }
    return n ? sum / n : 0.0;
}

}  // namespace copydet
