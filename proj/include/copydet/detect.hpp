#pragma once

// Single-round copy detection: Pairwise, Index, Bound, Bound+ and Hybrid.

#include <copydet/bayes.hpp>
#include <copydet/csv.hpp>
#include <copydet/index.hpp>
#include <copydet/model.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <unordered_map>
#include <vector>

namespace copydet {

enum class Algorithm { pairwise, index, bound, bound_plus, hybrid, incremental };

inline const char* to_string(Algorithm a)
{
    switch (a) {
    case Algorithm::pairwise:
        return "pairwise";
    case Algorithm::index:
        return "index";
    case Algorithm::bound:
        return "bound";
    case Algorithm::bound_plus:
        return "bound-plus";
    case Algorithm::hybrid:
        return "hybrid";
    case Algorithm::incremental:
        return "incremental";
    }
    return "?";
}

inline Algorithm parse_algorithm(std::string_view name)
{
    for (auto a : {Algorithm::pairwise, Algorithm::index, Algorithm::bound, Algorithm::bound_plus,
                   Algorithm::hybrid, Algorithm::incremental}) {
        if (name == to_string(a)) {
            return a;
        }
    }
    throw ConfigError("unknown algorithm '" + std::string(name) + "'");
}

struct PairResult {
    SourcePair pair;
    Decision decision = Decision::undecided;
    double p_no_copy = 1.0;
    double c_fwd = 0.0;
    double c_bwd = 0.0;
    std::int64_t decided_at_rank = -1;  // index position of the decision point; -1 for pairwise
    std::uint32_t shared_items = 0;     // l
    std::uint32_t n_before = 0;         // shared values up to and including the decision point
    std::uint32_t n_after = 0;          // shared values after it
    bool by_bound = false;              // decided by C^min / C^max rather than at end of scan

    friend bool operator==(const PairResult&, const PairResult&) = default;
};

struct CopyReport {
    std::string algorithm;
    std::vector<PairResult> pairs;  // sorted by canonical pair
    std::uint64_t computations = 0;
    std::uint64_t bound_computations = 0;
    std::uint64_t pairs_considered = 0;
    std::uint64_t shared_values_examined = 0;

    const PairResult* find(SourceId x, SourceId y) const
    {
        auto p = canonical_pair(x, y);
        auto it = std::lower_bound(pairs.begin(), pairs.end(), p,
                                   [](const PairResult& r, SourcePair q) { return r.pair < q; });
        return (it != pairs.end() && it->pair == p) ? &*it : nullptr;
    }

    bool copying(SourceId x, SourceId y) const
    {
        auto r = find(x, y);
        return r != nullptr && r->decision == Decision::copying;
    }

    std::vector<SourcePair> copying_pairs() const
    {
        std::vector<SourcePair> out;
        for (const auto& r : pairs) {
            if (r.decision == Decision::copying) {
                out.push_back(r.pair);
            }
        }
        return out;
    }

    friend bool operator==(const CopyReport&, const CopyReport&) = default;
};

inline void write_report(std::ostream& out, const CopyReport& rep, const Dataset& d)
{
    out << "source_a,source_b,decision,p_no_copy,c_fwd,c_bwd,decided_at_rank,algorithm\n";
    for (const auto& r : rep.pairs) {
        csv::write_row(out, {d.source_name(r.pair.a), d.source_name(r.pair.b), to_string(r.decision),
                             csv::format_double(r.p_no_copy), csv::format_double(r.c_fwd),
                             csv::format_double(r.c_bwd), std::to_string(r.decided_at_rank), rep.algorithm});
    }
}

/// Bound formulas, exposed for tests and for the incremental module.
namespace bounds {

/// C^min: every unseen shared item is assumed to differ.
inline double c_min(double c0, std::uint32_t l, std::uint32_t n0, double L) { return c0 + (double(l) - n0) * L; }

/// h: estimated number of shared items already scanned for either source.
inline double estimate_h(std::uint32_t n1, std::uint32_t n2, std::uint32_t items1, std::uint32_t items2,
                         std::uint32_t l, std::uint32_t n0)
{
    double h1 = items1 ? double(n1) * l / items1 : 0.0;
    double h2 = items2 ? double(n2) * l / items2 : 0.0;
    double h = std::round(std::max(h1, h2));
    return std::clamp(h, double(n0), double(l));
}

/// C^max: scanned-but-unshared items differ, unscanned items score at most M.
inline double c_max(double c0, double h, std::uint32_t l, std::uint32_t n0, double L, double M)
{
    return c0 + (h - n0) * L + (double(l) - h) * M;
}

inline constexpr std::uint32_t never = std::numeric_limits<std::uint32_t>::max();

inline std::uint32_t ceil_count(double x)
{
    if (!(x > 0.0)) {
        return 0;
    }
    if (x >= double(never)) {
        return never;
    }
    return static_cast<std::uint32_t>(std::ceil(x));
}

/// More shared values to observe before C^min can reach theta_cp.
inline std::uint32_t timer_min(double theta_cp, double cmin, double M, double L)
{
    if (M - L <= 0.0) {
        return never;
    }
    return ceil_count((theta_cp - cmin) / (M - L));
}

/// More differing values needed before C^max can fall below theta_ind.
inline std::uint32_t timer_max0(double cmax, double theta_ind, double M, double L)
{
    if (M - L <= 0.0) {
        return never;
    }
    return ceil_count((cmax - theta_ind) / (M - L));
}

/// n(S) watermark at which C^max is worth rechecking.
inline std::uint32_t timer_max_source(std::uint32_t t0, double h, std::uint32_t n0, std::uint32_t items,
                                      std::uint32_t l)
{
    if (t0 == never || l == 0) {
        return never;
    }
    return ceil_count((double(t0) + h - n0) * items / l);
}

}  // namespace bounds

/// Called at every shared-value checkpoint: the pair, the shared values seen
/// so far, and C^min in both directions.
using CheckpointObserver = std::function<void(SourcePair, std::uint32_t n0, double cmin_fwd, double cmin_bwd)>;

namespace detail {

/// Pair key -> dense state number. A flat table for moderate source counts,
/// a hash map beyond that.
class PairMap {
  public:
    static constexpr std::uint32_t none = std::numeric_limits<std::uint32_t>::max();

    explicit PairMap(std::size_t n_sources) : slots_(n_sources)
    {
        if (slots_.size() <= (std::size_t{1} << 24)) {
            dense_.assign(slots_.size(), none);
        }
    }

    std::uint32_t get(SourcePair p) const
    {
        if (!dense_.empty() || slots_.size() == 0) {
            return slots_.size() == 0 ? none : dense_[slots_.slot(p)];
        }
        auto it = sparse_.find(slots_.slot(p));
        return it == sparse_.end() ? none : it->second;
    }

    void put(SourcePair p, std::uint32_t v)
    {
        if (!dense_.empty()) {
            dense_[slots_.slot(p)] = v;
        } else {
            sparse_[slots_.slot(p)] = v;
        }
    }

  private:
    PairSlots slots_;
    std::vector<std::uint32_t> dense_;
    std::unordered_map<std::size_t, std::uint32_t> sparse_;
};

struct PairState {
    SourcePair pair;
    std::uint32_t l = 0;
    std::uint32_t n0 = 0;
    double c0_fwd = 0.0;
    double c0_bwd = 0.0;
    bool bounded = false;
    Decision decision = Decision::undecided;
    bool by_bound = false;
    std::uint32_t rank = 0;
    std::uint32_t n_after = 0;
    double c_fwd = 0.0;
    double c_bwd = 0.0;
    double p_no_copy = 1.0;
    // Bound+ timers
    std::uint32_t next_min_n0 = 0;
    std::uint32_t t1 = 0;
    std::uint32_t t2 = 0;
};

struct ScanOptions {
    // Pairs with l <= cutoff take the Index path; -1 sends every pair through the bounds.
    std::int64_t cutoff = std::numeric_limits<std::int64_t>::max();
    bool timers = false;
    bool three_way = false;
    std::function<bool(SourcePair)> filter;  // restrict to these pairs (incremental recompute)
    CheckpointObserver observer;
};

struct ScanResult {
    std::vector<PairState> states;  // in creation order
    std::vector<std::uint32_t> seen;  // n(S) at end of scan
    std::uint64_t computations = 0;
    std::uint64_t bound_computations = 0;
    std::uint64_t shared_values = 0;
};

/// One pass over the index serving both the Index path and the Bound(+) path.
inline ScanResult scan(const InvertedIndex& idx, const Overlaps& ov, std::span<const double> accuracy,
                       std::span<const std::uint32_t> item_count, const ModelParams& prm, const ScanOptions& opt)
{
    const auto th = opt.three_way ? thresholds(prm, 0.9, 0.1) : thresholds(prm);
    const double L = score_diff_value(prm);
    ScanResult res;
    res.seen.assign(accuracy.size(), 0);
    PairMap map(accuracy.size());
    auto& states = res.states;
    const auto n_entries = idx.size();

    auto decide_copy = [&](PairState& st, std::uint32_t pos, double f, double b) {
        st.decision = Decision::copying;
        st.by_bound = true;
        st.rank = pos;
        st.c_fwd = f;
        st.c_bwd = b;
        st.p_no_copy = posterior_no_copy(f, b, prm);
    };
    auto decide_indep = [&](PairState& st, std::uint32_t pos, double f, double b) {
        st.decision = Decision::no_copying;
        st.by_bound = true;
        st.rank = pos;
        st.c_fwd = f;
        st.c_bwd = b;
        st.p_no_copy = posterior_no_copy(f, b, prm);
    };

    for (std::uint32_t pos = 0; pos < n_entries; ++pos) {
        const auto& e = idx[pos];
        const bool tail = pos >= idx.tail_start();
        for (auto s : e.providers) {
            ++res.seen[s];
        }
        const double M = idx.next_score(pos);
        const auto& prov = e.providers;
        for (std::size_t i = 0; i + 1 < prov.size(); ++i) {
            for (std::size_t j = i + 1; j < prov.size(); ++j) {
                SourcePair p{prov[i], prov[j]};
                if (opt.filter && !opt.filter(p)) {
                    continue;
                }
                auto id = map.get(p);
                if (id == PairMap::none) {
                    if (tail) {
                        continue;
                    }
                    id = static_cast<std::uint32_t>(states.size());
                    map.put(p, id);
                    PairState st;
                    st.pair = p;
                    st.l = ov.l(p);
                    st.bounded = static_cast<std::int64_t>(st.l) > opt.cutoff;
                    states.push_back(st);
                }
                auto& st = states[id];
                if (st.decision != Decision::undecided) {
                    ++st.n_after;
                    continue;
                }
                st.c0_fwd += score_same_value(e.p_true, accuracy[p.a], accuracy[p.b], prm);
                st.c0_bwd += score_same_value(e.p_true, accuracy[p.b], accuracy[p.a], prm);
                ++st.n0;
                res.computations += 2;
                ++res.shared_values;
                if (opt.observer) {
                    opt.observer(p, st.n0, bounds::c_min(st.c0_fwd, st.l, st.n0, L),
                                 bounds::c_min(st.c0_bwd, st.l, st.n0, L));
                }
                if (!st.bounded) {
                    continue;
                }

                if (!opt.timers || st.n0 >= st.next_min_n0) {
                    double mf = bounds::c_min(st.c0_fwd, st.l, st.n0, L);
                    double mb = bounds::c_min(st.c0_bwd, st.l, st.n0, L);
                    res.bound_computations += 2;
                    if (std::max(mf, mb) >= th.theta_cp) {
                        decide_copy(st, pos, mf, mb);
                        continue;
                    }
                    if (opt.timers) {
                        auto t = bounds::timer_min(th.theta_cp, std::max(mf, mb), M, L);
                        st.next_min_n0 = t == bounds::never ? bounds::never : st.n0 + t;
                        ++res.bound_computations;
                    }
                }

                const auto n1 = res.seen[p.a];
                const auto n2 = res.seen[p.b];
                if (!opt.timers || n1 >= st.t1 || n2 >= st.t2) {
                    double h = bounds::estimate_h(n1, n2, item_count[p.a], item_count[p.b], st.l, st.n0);
                    double xf = bounds::c_max(st.c0_fwd, h, st.l, st.n0, L, M);
                    double xb = bounds::c_max(st.c0_bwd, h, st.l, st.n0, L, M);
                    res.bound_computations += 2;
                    if (std::max(xf, xb) < th.theta_ind) {
                        decide_indep(st, pos, xf, xb);
                        continue;
                    }
                    if (opt.timers) {
                        auto t0 = bounds::timer_max0(std::max(xf, xb), th.theta_ind, M, L);
                        st.t1 = bounds::timer_max_source(t0, h, st.n0, item_count[p.a], st.l);
                        st.t2 = bounds::timer_max_source(t0, h, st.n0, item_count[p.b], st.l);
                        ++res.bound_computations;
                    }
                }
            }
        }
    }

    const auto last = n_entries == 0 ? 0u : static_cast<std::uint32_t>(n_entries - 1);
    for (auto& st : states) {
        if (st.decision != Decision::undecided) {
            continue;
        }
        st.c_fwd = bounds::c_min(st.c0_fwd, st.l, st.n0, L);
        st.c_bwd = bounds::c_min(st.c0_bwd, st.l, st.n0, L);
        res.computations += 2;
        st.p_no_copy = posterior_no_copy(st.c_fwd, st.c_bwd, prm);
        st.decision = decide(st.p_no_copy, opt.three_way);
        st.rank = last;
    }
    return res;
}

inline PairResult to_result(const PairState& st)
{
    PairResult r;
    r.pair = st.pair;
    r.decision = st.decision;
    r.p_no_copy = st.p_no_copy;
    r.c_fwd = st.c_fwd;
    r.c_bwd = st.c_bwd;
    r.decided_at_rank = st.rank;
    r.shared_items = st.l;
    r.n_before = st.n0;
    r.n_after = st.n_after;
    r.by_bound = st.by_bound;
    return r;
}

inline CopyReport to_report(const ScanResult& res, const char* algorithm)
{
    CopyReport rep;
    rep.algorithm = algorithm;
    rep.pairs.reserve(res.states.size());
    for (const auto& st : res.states) {
        rep.pairs.push_back(to_result(st));
    }
    std::sort(rep.pairs.begin(), rep.pairs.end(),
              [](const PairResult& x, const PairResult& y) { return x.pair < y.pair; });
    rep.computations = res.computations;
    rep.bound_computations = res.bound_computations;
    rep.pairs_considered = res.states.size();
    rep.shared_values_examined = res.shared_values;
    return rep;
}

}  // namespace detail

struct DetectOptions {
    std::int64_t hybrid_cutoff = 16;
    bool three_way = false;
    unsigned threads = 1;
    CheckpointObserver observer;
};

/// Baseline: every pair sharing an item, every shared item.
inline CopyReport detect_pairwise(const Dataset& d, const ValueProbs& probs, const SourceStats& stats,
                                  const ModelParams& prm, const DetectOptions& opt = {})
{
    const auto nsrc = d.source_count();
    const double L = score_diff_value(prm);
    Overlaps ov = pair_overlaps(d);
    PairSlots slots(nsrc);
    std::vector<double> fwd(slots.size(), 0.0);
    std::vector<double> bwd(slots.size(), 0.0);
    std::vector<std::uint32_t> same(slots.size(), 0);

    // Row a owns the slots (a, b > a), so rows can run on separate threads
    // and each slot is summed in item order regardless of the thread count.
    auto row = [&](SourceId a) {
        for (const auto& c : d.claims_of(a)) {
            double p = probs(c.item, c.value);
            for (const auto& pv : d.providers_of(c.item)) {
                if (pv.source <= a || pv.value != c.value) {
                    continue;
                }
                auto k = slots.slot(a, pv.source);
                fwd[k] += score_same_value(p, stats.accuracy[a], stats.accuracy[pv.source], prm);
                bwd[k] += score_same_value(p, stats.accuracy[pv.source], stats.accuracy[a], prm);
                ++same[k];
            }
        }
    };
    unsigned threads = std::max(1u, opt.threads);
    if (threads == 1 || nsrc < 64) {
        for (SourceId a = 0; a < nsrc; ++a) {
            row(a);
        }
    } else {
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < threads; ++t) {
            pool.emplace_back([&, t] {
                for (SourceId a = t; a < nsrc; a += threads) {
                    row(a);
                }
            });
        }
        for (auto& th : pool) {
            th.join();
        }
    }

    CopyReport rep;
    rep.algorithm = to_string(Algorithm::pairwise);
    std::uint64_t shared_items = 0;
    for (SourceId a = 0; a + 1 < nsrc; ++a) {
        for (SourceId b = a + 1; b < nsrc; ++b) {
            auto k = slots.slot(a, b);
            auto l = ov.l(SourcePair{a, b});
            if (l == 0) {
                continue;
            }
            PairResult r;
            r.pair = {a, b};
            r.shared_items = l;
            r.n_before = same[k];
            r.c_fwd = fwd[k] + (double(l) - same[k]) * L;
            r.c_bwd = bwd[k] + (double(l) - same[k]) * L;
            r.p_no_copy = posterior_no_copy(r.c_fwd, r.c_bwd, prm);
            r.decision = decide(r.p_no_copy, opt.three_way);
            rep.pairs.push_back(r);
            shared_items += l;
        }
    }
    rep.pairs_considered = rep.pairs.size();
    rep.shared_values_examined = shared_items;
    rep.computations = 2 * shared_items;
    return rep;
}

inline CopyReport detect_index(const InvertedIndex& idx, const Overlaps& ov, const SourceStats& stats,
                               const ModelParams& prm, const DetectOptions& opt = {})
{
    detail::ScanOptions so;
    so.three_way = opt.three_way;
    so.observer = opt.observer;
    return detail::to_report(detail::scan(idx, ov, stats.accuracy, stats.item_count, prm, so),
                             to_string(Algorithm::index));
}

inline CopyReport detect_bound(const InvertedIndex& idx, const Overlaps& ov, const SourceStats& stats,
                               const ModelParams& prm, bool use_timers, const DetectOptions& opt = {})
{
    detail::ScanOptions so;
    so.cutoff = -1;
    so.timers = use_timers;
    so.three_way = opt.three_way;
    so.observer = opt.observer;
    return detail::to_report(detail::scan(idx, ov, stats.accuracy, stats.item_count, prm, so),
                             to_string(use_timers ? Algorithm::bound_plus : Algorithm::bound));
}

inline CopyReport detect_hybrid(const InvertedIndex& idx, const Overlaps& ov, const SourceStats& stats,
                                const ModelParams& prm, const DetectOptions& opt = {})
{
    if (opt.hybrid_cutoff < 0) {
        throw ConfigError("hybrid cutoff must be >= 0");
    }
    detail::ScanOptions so;
    so.cutoff = opt.hybrid_cutoff;
    so.timers = true;
    so.three_way = opt.three_way;
    so.observer = opt.observer;
    return detail::to_report(detail::scan(idx, ov, stats.accuracy, stats.item_count, prm, so),
                             to_string(Algorithm::hybrid));
}

/// Builds the index and runs the chosen single-round algorithm.
inline CopyReport detect(Algorithm algo, const Dataset& d, const ValueProbs& probs, const SourceStats& stats,
                         const ModelParams& prm, const DetectOptions& opt = {})
{
    if (algo == Algorithm::pairwise) {
        return detect_pairwise(d, probs, stats, prm, opt);
    }
    auto idx = build_index(d, probs, stats, prm, opt.threads);
    auto ov = pair_overlaps(d);
    switch (algo) {
    case Algorithm::index:
        return detect_index(idx, ov, stats, prm, opt);
    case Algorithm::bound:
        return detect_bound(idx, ov, stats, prm, false, opt);
    case Algorithm::bound_plus:
        return detect_bound(idx, ov, stats, prm, true, opt);
    case Algorithm::hybrid:
    case Algorithm::incremental:
        return detect_hybrid(idx, ov, stats, prm, opt);
    case Algorithm::pairwise:
        break;
    }
    return {};
}

}  // namespace copydet
