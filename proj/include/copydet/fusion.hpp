#pragma once

// Truth finding with copy-aware vote discounting, accuracy re-estimation and
// the iterative driver that alternates detection and fusion.

#include <copydet/bayes.hpp>
#include <copydet/csv.hpp>
#include <copydet/detect.hpp>
#include <copydet/incremental.hpp>
#include <copydet/model.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <unordered_map>
#include <vector>

namespace copydet {

/// Probability that `s` copies from `t` according to the report. Only pairs
/// decided as copying carry dependence; everything else counts as independent.
inline double dependence(const CopyReport& rep, SourceId s, SourceId t, const ModelParams& prm)
{
    auto r = rep.find(s, t);
    if (r == nullptr || r->decision != Decision::copying) {
        return 0.0;
    }
    return s < t ? posterior_copy_forward(r->c_fwd, r->c_bwd, prm) : posterior_copy_forward(r->c_bwd, r->c_fwd, prm);
}

/// Pluggable truth finder: value probabilities from a copy report and
/// accuracies, and accuracies from value probabilities.
class TruthFinder {
  public:
    virtual ~TruthFinder() = default;
    virtual ValueProbs fuse(const Dataset& d, const CopyReport& rep, const SourceStats& stats,
                            const ModelParams& prm) const = 0;
    virtual SourceStats accuracy(const Dataset& d, const ValueProbs& probs, const ModelParams& prm) const = 0;
};

/// Accuracy-weighted voting. Each provider votes ln(n A / (1 - A)); providers
/// are taken in decreasing accuracy and a provider's vote is scaled by
/// prod(1 - s * p_dep) over the providers already counted for the value.
/// Unobserved false values share the remaining mass with vote 0 each.
class VoteFinder : public TruthFinder {
  public:
    ValueProbs fuse(const Dataset& d, const CopyReport& rep, const SourceStats& stats,
                    const ModelParams& prm) const override
    {
        ValueProbs out(d, 0.0);
        // p_dep of every copying pair, both directions, keyed by (s << 32 | t)
        std::unordered_map<std::uint64_t, double> dep;
        for (const auto& r : rep.pairs) {
            if (r.decision == Decision::copying) {
                auto a = std::uint64_t(r.pair.a), b = std::uint64_t(r.pair.b);
                dep[a << 32 | b] = posterior_copy_forward(r.c_fwd, r.c_bwd, prm);
                dep[b << 32 | a] = posterior_copy_forward(r.c_bwd, r.c_fwd, prm);
            }
        }
        auto dep_of = [&](SourceId s, SourceId t) {
            auto it = dep.find(std::uint64_t(s) << 32 | t);
            return it == dep.end() ? 0.0 : it->second;
        };
        std::vector<std::vector<SourceId>> by_value;
        std::vector<double> votes;
        for (ItemId item = 0; item < d.item_count(); ++item) {
            auto k = d.value_count(item);
            by_value.assign(k, {});
            for (const auto& p : d.providers_of(item)) {
                by_value[p.value].push_back(p.source);
            }
            votes.assign(k, 0.0);
            for (ValueId v = 0; v < k; ++v) {
                auto& srcs = by_value[v];
                std::stable_sort(srcs.begin(), srcs.end(), [&](SourceId x, SourceId y) {
                    return stats.accuracy[x] > stats.accuracy[y];
                });
                double total = 0.0;
                for (std::size_t i = 0; i < srcs.size(); ++i) {
                    double indep = 1.0;
                    for (std::size_t j = 0; j < i; ++j) {
                        indep *= 1.0 - prm.s * dep_of(srcs[i], srcs[j]);
                    }
                    double a = prm.clamp_accuracy(stats.accuracy[srcs[i]]);
                    total += std::log(prm.n * a / (1.0 - a)) * indep;
                }
                votes[v] = total;
            }
            double hi = 0.0;
            for (double x : votes) {
                hi = std::max(hi, x);
            }
            double phantom = std::max(0.0, double(prm.n) + 1.0 - double(k));
            double denom = phantom * std::exp(-hi);
            for (double x : votes) {
                denom += std::exp(x - hi);
            }
            for (ValueId v = 0; v < k; ++v) {
                out(item, v) = std::exp(votes[v] - hi) / denom;
            }
        }
        return out;
    }

    SourceStats accuracy(const Dataset& d, const ValueProbs& probs, const ModelParams& prm) const override
    {
        auto st = SourceStats::uniform(d, prm.accuracy_init);
        for (SourceId s = 0; s < d.source_count(); ++s) {
            auto claims = d.claims_of(s);
            if (claims.empty()) {
                continue;
            }
            double sum = 0.0;
            for (const auto& c : claims) {
                sum += probs(c.item, c.value);
            }
            st.accuracy[s] = prm.clamp_accuracy(sum / claims.size());
        }
        return st;
    }
};

inline ValueProbs fuse_values(const Dataset& d, const CopyReport& rep, const SourceStats& stats,
                              const ModelParams& prm)
{
    return VoteFinder{}.fuse(d, rep, stats, prm);
}

inline SourceStats recompute_accuracy(const Dataset& d, const ValueProbs& probs, const ModelParams& prm)
{
    return VoteFinder{}.accuracy(d, probs, prm);
}

struct FusionState {
    ValueProbs probs;
    SourceStats stats;
    int round = 0;
    bool converged = false;
};

struct RoundSummary {
    int round = 0;
    std::string algorithm;
    std::uint64_t computations = 0;
    std::uint64_t bound_computations = 0;
    std::uint64_t pairs_considered = 0;
    std::uint64_t shared_values_examined = 0;
    std::uint64_t copying_pairs = 0;
    double max_dp = 0.0;
    double max_da = 0.0;
    double detect_seconds = 0.0;
    std::optional<RoundTrace> trace;  // incremental rounds only
};

struct IterativeOptions {
    Algorithm detector = Algorithm::hybrid;
    int max_rounds = 20;
    double epsilon = 1e-3;
    DetectOptions detect;
    IncrementalOptions incremental;
    bool copy_detection = true;              // false: plain voting, no copy report
    std::shared_ptr<const TruthFinder> finder;  // defaults to VoteFinder
    std::function<void(const RoundSummary&, const FusionState&)> on_round;
};

struct IterativeResult {
    FusionState state;
    CopyReport report;
    std::vector<RoundSummary> rounds;
};

inline double max_abs_diff(const ValueProbs& x, const ValueProbs& y)
{
    double m = 0.0;
    for (ItemId i = 0; i < x.item_count(); ++i) {
        auto a = x.item(i);
        auto b = y.item(i);
        for (std::size_t v = 0; v < a.size(); ++v) {
            m = std::max(m, std::abs(a[v] - b[v]));
        }
    }
    return m;
}

inline double max_abs_diff(const std::vector<double>& x, const std::vector<double>& y)
{
    double m = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        m = std::max(m, std::abs(x[i] - y[i]));
    }
    return m;
}

/// Alternates detection and fusion until value probabilities and accuracies
/// move by less than epsilon, or max_rounds is reached. With the incremental
/// detector, rounds 1 and 2 run Hybrid from scratch and later rounds refine.
inline IterativeResult run_iterative(const Dataset& d, const ModelParams& prm, const IterativeOptions& opt)
{
    prm.validate();
    if (opt.max_rounds < 1) {
        throw ConfigError("max-rounds must be >= 1");
    }
    if (!(opt.epsilon > 0.0)) {
        throw ConfigError("epsilon must be > 0");
    }
    auto finder = opt.finder ? opt.finder : std::make_shared<VoteFinder>();
    IterativeResult out;
    auto& st = out.state;
    st.stats = SourceStats::uniform(d, prm.accuracy_init);
    st.probs = finder->fuse(d, CopyReport{}, st.stats, prm);
    std::optional<RoundCarry> carry;

    for (int r = 1; r <= opt.max_rounds; ++r) {
        RoundSummary sum;
        sum.round = r;
        CopyReport rep;
        auto t0 = std::chrono::steady_clock::now();
        if (opt.copy_detection) {
            if (opt.detector != Algorithm::incremental) {
                rep = detect(opt.detector, d, st.probs, st.stats, prm, opt.detect);
            } else if (r == 1) {
                rep = detect(Algorithm::hybrid, d, st.probs, st.stats, prm, opt.detect);
            } else if (r == 2) {
                auto [first, c] = RoundCarry::full_round(d, st.probs, st.stats, prm, opt.incremental);
                rep = std::move(first);
                carry.emplace(std::move(c));
            } else {
                const auto& io = opt.incremental;
                auto cc = classify_changes(*carry, st.probs, st.stats, prm, io.rho_value, io.rho_accuracy, io.auto_rho);
                RoundTrace tr;
                rep = incremental_round(*carry, cc, prm, &tr);
                sum.trace = tr;
            }
        }
        sum.detect_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        auto probs = finder->fuse(d, rep, st.stats, prm);
        auto stats = finder->accuracy(d, probs, prm);
        sum.max_dp = max_abs_diff(probs, st.probs);
        sum.max_da = max_abs_diff(stats.accuracy, st.stats.accuracy);
        sum.algorithm = rep.algorithm.empty() ? "none" : rep.algorithm;
        sum.computations = rep.computations;
        sum.bound_computations = rep.bound_computations;
        sum.pairs_considered = rep.pairs_considered;
        sum.shared_values_examined = rep.shared_values_examined;
        sum.copying_pairs = rep.copying_pairs().size();
        st.probs = std::move(probs);
        st.stats = std::move(stats);
        st.round = r;
        out.report = std::move(rep);
        out.rounds.push_back(sum);
        st.converged = sum.max_dp < opt.epsilon && sum.max_da < opt.epsilon;
        if (opt.on_round) {
            opt.on_round(out.rounds.back(), st);
        }
        if (st.converged) {
            break;
        }
    }
    return out;
}

/// Argmax value per item (lowest value id on ties).
inline std::vector<ValueId> top_values(const Dataset& d, const ValueProbs& probs)
{
    std::vector<ValueId> top(d.item_count(), 0);
    for (ItemId i = 0; i < d.item_count(); ++i) {
        auto p = probs.item(i);
        top[i] = static_cast<ValueId>(std::max_element(p.begin(), p.end()) - p.begin());
    }
    return top;
}

inline void write_fusion(std::ostream& out, const Dataset& d, const ValueProbs& probs)
{
    out << "item_id,value,probability,is_top\n";
    auto top = top_values(d, probs);
    for (ItemId i = 0; i < d.item_count(); ++i) {
        for (ValueId v = 0; v < d.value_count(i); ++v) {
            csv::write_row(out, {d.item_name(i), d.value_name(i, v), csv::format_double(probs(i, v)),
                                 top[i] == v ? "1" : "0"});
        }
    }
}

inline void write_accuracy(std::ostream& out, const Dataset& d, const SourceStats& stats, int round)
{
    out << "source_id,accuracy,round\n";
    for (SourceId s = 0; s < d.source_count(); ++s) {
        csv::write_row(out, {d.source_name(s), csv::format_double(stats.accuracy[s]), std::to_string(round)});
    }
}

}  // namespace copydet
