#pragma once

// Item sampling before index building: ScaleSample keeps a per-source floor
// of N items; ByItem and ByCell are plain uniform baselines.

#include <copydet/error.hpp>
#include <copydet/model.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <random>
#include <vector>

namespace copydet {

struct SamplePlan {
    double rate = 1.0;
    std::uint32_t min_per_source = 0;
    std::uint64_t seed = 0;
    std::vector<ItemId> selected;  // sorted, ids of the original dataset
    double item_fraction = 0.0;    // realized
    double cell_fraction = 0.0;    // realized
};

struct Sample {
    SamplePlan plan;
    Dataset data;
};

/// Keeps only the listed items.
inline Dataset restrict_items(const Dataset& d, const std::vector<ItemId>& items)
{
    DatasetBuilder b;
    for (auto item : items) {
        for (const auto& p : d.providers_of(item)) {
            b.add(d.source_name(p.source), d.item_name(item), d.value_name(item, p.value));
        }
    }
    return std::move(b).build();
}

namespace detail {

inline Sample finish_sample(const Dataset& d, SamplePlan plan, const std::vector<char>& chosen)
{
    std::size_t cells = 0;
    for (ItemId i = 0; i < d.item_count(); ++i) {
        if (chosen[i]) {
            plan.selected.push_back(i);
            cells += d.providers_of(i).size();
        }
    }
    plan.item_fraction = d.item_count() ? double(plan.selected.size()) / d.item_count() : 1.0;
    plan.cell_fraction = d.claim_count() ? double(cells) / d.claim_count() : 1.0;
    Sample s{plan, restrict_items(d, plan.selected)};
    return s;
}

inline std::vector<ItemId> shuffled_items(const Dataset& d, std::mt19937_64& rng)
{
    std::vector<ItemId> items(d.item_count());
    for (ItemId i = 0; i < items.size(); ++i) {
        items[i] = i;
    }
    std::shuffle(items.begin(), items.end(), rng);
    return items;
}

inline void check_rate(double rate)
{
    if (!(rate > 0.0 && rate <= 1.0)) {
        throw ConfigError("sample rate must be in (0, 1]");
    }
}

}  // namespace detail

/// Uniformly samples ceil(rate * |items|) items, then tops up every source
/// holding fewer than `min_per_source` selected items from its own items.
inline Sample scale_sample(const Dataset& d, double rate, std::uint32_t min_per_source, std::uint64_t seed)
{
    detail::check_rate(rate);
    std::mt19937_64 rng(seed);
    std::vector<char> chosen(d.item_count(), 0);
    auto order = detail::shuffled_items(d, rng);
    auto k = static_cast<std::size_t>(std::ceil(rate * d.item_count() - 1e-9));
    for (std::size_t i = 0; i < k && i < order.size(); ++i) {
        chosen[order[i]] = 1;
    }
    std::vector<ItemId> pool;
    for (SourceId s = 0; s < d.source_count(); ++s) {
        auto claims = d.claims_of(s);
        std::uint32_t have = 0;
        pool.clear();
        for (const auto& c : claims) {
            if (chosen[c.item]) {
                ++have;
            } else {
                pool.push_back(c.item);
            }
        }
        if (have >= min_per_source) {
            continue;
        }
        std::shuffle(pool.begin(), pool.end(), rng);
        for (std::size_t i = 0; i < pool.size() && have < min_per_source; ++i, ++have) {
            chosen[pool[i]] = 1;
        }
    }
    return detail::finish_sample(d, {rate, min_per_source, seed, {}, 0.0, 0.0}, chosen);
}

/// Uniform items at the given item fraction, no floor.
inline Sample sample_by_item(const Dataset& d, double item_fraction, std::uint64_t seed)
{
    detail::check_rate(item_fraction);
    std::mt19937_64 rng(seed);
    std::vector<char> chosen(d.item_count(), 0);
    auto order = detail::shuffled_items(d, rng);
    auto k = static_cast<std::size_t>(std::ceil(item_fraction * d.item_count() - 1e-9));
    for (std::size_t i = 0; i < k && i < order.size(); ++i) {
        chosen[order[i]] = 1;
    }
    return detail::finish_sample(d, {item_fraction, 0, seed, {}, 0.0, 0.0}, chosen);
}

/// Uniform items until the selected items hold the given fraction of cells.
inline Sample sample_by_cell(const Dataset& d, double cell_fraction, std::uint64_t seed)
{
    detail::check_rate(cell_fraction);
    std::mt19937_64 rng(seed);
    std::vector<char> chosen(d.item_count(), 0);
    auto order = detail::shuffled_items(d, rng);
    double target = cell_fraction * d.claim_count();
    std::size_t cells = 0;
    for (auto item : order) {
        if (cells >= target - 1e-9) {
            break;
        }
        chosen[item] = 1;
        cells += d.providers_of(item).size();
    }
    return detail::finish_sample(d, {cell_fraction, 0, seed, {}, 0.0, 0.0}, chosen);
}

/// Plan dump: selected item ids, one per line.
inline void write_plan(std::ostream& out, const SamplePlan& plan, const Dataset& d)
{
    for (auto item : plan.selected) {
        out << d.item_name(item) << '\n';
    }
}

}  // namespace copydet
