#pragma once

// Cross-round refinement: reuse last round's pair scores and touch only the
// index entries whose contribution changed, in three passes over a frozen
// index order.

#include <copydet/bayes.hpp>
#include <copydet/detect.hpp>
#include <copydet/index.hpp>
#include <copydet/model.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <unordered_set>
#include <utility>
#include <vector>

namespace copydet {

struct IncrementalOptions {
    double rho_value = 1.0;     // big entry-score change
    double rho_accuracy = 0.2;  // big source-accuracy change
    bool auto_rho = false;      // pick rho_value at the widest gap between sorted changes
    std::int64_t hybrid_cutoff = 16;
    bool three_way = false;
};

enum class EntryChange : std::uint8_t { unchanged, big_decrease, small_decrease, big_increase, small_increase };

struct ChangeClass {
    std::vector<EntryChange> category;  // per frozen index position
    std::vector<double> new_prob;
    std::vector<double> new_score;
    std::vector<double> new_accuracy;
    std::vector<char> big_source;
    double rho_value = 1.0;
    double delta_down = 0.0;  // largest small decrease (magnitude)
    double delta_up = 0.0;    // largest small increase

    bool any_change() const
    {
        return std::any_of(category.begin(), category.end(), [](EntryChange c) { return c != EntryChange::unchanged; })
               || std::any_of(big_source.begin(), big_source.end(), [](char b) { return b != 0; });
    }
};

/// Per-pair state carried from one round to the next.
struct CarryPair {
    SourcePair pair;
    std::uint32_t l = 0;
    Decision decision = Decision::undecided;
    std::uint32_t rank = 0;  // decision point
    bool by_bound = false;
    double hat_fwd = 0.0;  // starting scores for the next round
    double hat_bwd = 0.0;
    std::uint32_t n_before = 0;
    std::uint32_t n_after = 0;
    // no-copying pairs: items known to differ at the decision point, and the
    // bound M charged for every shared item not yet seen
    std::uint32_t diff = 0;
    double m_dec = 0.0;
    // probabilities this pair used where they differ from the entry basis
    std::vector<std::pair<std::uint32_t, double>> overrides;
    // reported values
    double c_fwd = 0.0;
    double c_bwd = 0.0;
    double p_no_copy = 1.0;
    // last round: 0 scanned from scratch, 1..3 stopped in that pass, 4 ran through
    std::uint8_t pass = 0;

    std::uint32_t unseen() const { return l - n_before - diff; }
};

/// Per-round counts of where pairs stopped.
struct RoundTrace {
    std::uint64_t computations = 0;
    std::uint64_t bound_computations = 0;
    std::uint64_t recomputed_pairs = 0;
    // index 0..2: terminated in pass 1..3, 3: kept after all passes, 4: flipped
    std::uint64_t copying[5] = {0, 0, 0, 0, 0};
    std::uint64_t no_copying[5] = {0, 0, 0, 0, 0};
    std::uint64_t entries[5] = {0, 0, 0, 0, 0};  // by EntryChange
    bool reused_report = false;
};

class RoundCarry;
ChangeClass classify_changes(const RoundCarry&, const ValueProbs&, const SourceStats&, const ModelParams&,
                             double rho_value, double rho_accuracy, bool auto_rho = false);
CopyReport incremental_round(RoundCarry&, const ChangeClass&, const ModelParams&, RoundTrace* = nullptr);

class RoundCarry {
  public:
    /// Runs a full Hybrid round and prepares the carry. The dataset must
    /// outlive the carry.
    static std::pair<CopyReport, RoundCarry> full_round(const Dataset& d, const ValueProbs& probs,
                                                        const SourceStats& stats, const ModelParams& prm,
                                                        const IncrementalOptions& opt = {})
    {
        RoundCarry c;
        c.d_ = &d;
        c.opt_ = opt;
        c.ov_ = pair_overlaps(d);
        c.idx_ = build_index(d, probs, stats, prm);
        c.snap_ = stats.accuracy;
        c.item_count_ = stats.item_count;
        c.basis_p_.resize(c.idx_.size());
        c.basis_score_.resize(c.idx_.size());
        for (std::size_t i = 0; i < c.idx_.size(); ++i) {
            c.basis_p_[i] = c.idx_[i].p_true;
            c.basis_score_[i] = c.idx_[i].score;
        }
        c.override_count_.assign(c.idx_.size(), 0);
        auto res = detail::scan(c.idx_, c.ov_, c.snap_, c.item_count_, prm, c.scan_options({}));
        for (const auto& st : res.states) {
            c.pairs_.push_back(c.carry_from(st, prm));
        }
        c.sort_pairs();
        c.report_ = c.make_report(res.computations, res.bound_computations, res.shared_values);
        c.report_.pairs_considered = res.states.size();
        return {c.report_, std::move(c)};
    }

    const InvertedIndex& index() const noexcept { return idx_; }
    const Dataset& dataset() const noexcept { return *d_; }
    std::span<const double> snapshot() const noexcept { return snap_; }
    std::span<const CarryPair> pairs() const noexcept { return pairs_; }
    const CopyReport& last_report() const noexcept { return report_; }
    const IncrementalOptions& options() const noexcept { return opt_; }
    double basis_prob(std::size_t pos) const { return basis_p_[pos]; }
    double basis_score(std::size_t pos) const { return basis_score_[pos]; }
    std::uint32_t override_count(std::size_t pos) const { return override_count_[pos]; }

    const CarryPair* find(SourceId x, SourceId y) const
    {
        auto p = canonical_pair(x, y);
        auto it = std::lower_bound(pairs_.begin(), pairs_.end(), p,
                                   [](const CarryPair& c, SourcePair q) { return c.pair < q; });
        return (it != pairs_.end() && it->pair == p) ? &*it : nullptr;
    }

    /// Probability behind the contribution the pair currently holds for the
    /// entry at `pos`.
    static double used_prob(const CarryPair& cp, std::span<const double> basis, std::uint32_t pos)
    {
        auto it = std::lower_bound(cp.overrides.begin(), cp.overrides.end(), pos,
                                   [](const auto& o, std::uint32_t q) { return o.first < q; });
        return (it != cp.overrides.end() && it->first == pos) ? it->second : basis[pos];
    }
    double used_prob(const CarryPair& cp, std::uint32_t pos) const { return used_prob(cp, basis_p_, pos); }

  private:
    friend ChangeClass classify_changes(const RoundCarry&, const ValueProbs&, const SourceStats&,
                                        const ModelParams&, double, double, bool);
    friend CopyReport incremental_round(RoundCarry&, const ChangeClass&, const ModelParams&, RoundTrace*);

    detail::ScanOptions scan_options(std::function<bool(SourcePair)> filter) const
    {
        detail::ScanOptions so;
        so.cutoff = opt_.hybrid_cutoff;
        so.timers = true;
        so.three_way = opt_.three_way;
        so.filter = std::move(filter);
        return so;
    }

    /// Items the two sources disagree on whose entry for either value lies at
    /// or before `rank`.
    std::uint32_t observed_diff(SourcePair p, std::uint32_t rank) const
    {
        auto ca = d_->claims_of(p.a);
        auto cb = d_->claims_of(p.b);
        std::uint32_t diff = 0;
        std::size_t i = 0;
        std::size_t j = 0;
        auto seen = [&](ItemId item, ValueId v) {
            auto pos = idx_.position(item, v);
            return pos != InvertedIndex::npos && pos <= rank;
        };
        while (i < ca.size() && j < cb.size()) {
            if (ca[i].item < cb[j].item) {
                ++i;
            } else if (cb[j].item < ca[i].item) {
                ++j;
            } else {
                if (ca[i].value != cb[j].value && (seen(ca[i].item, ca[i].value) || seen(cb[j].item, cb[j].value))) {
                    ++diff;
                }
                ++i;
                ++j;
            }
        }
        return diff;
    }

    CarryPair carry_from(const detail::PairState& st, const ModelParams& prm) const
    {
        const double L = score_diff_value(prm);
        CarryPair cp;
        cp.pair = st.pair;
        cp.l = st.l;
        cp.decision = st.decision == Decision::copying ? Decision::copying : Decision::no_copying;
        cp.rank = st.rank;
        cp.by_bound = st.by_bound;
        cp.n_before = st.n0;
        cp.n_after = st.n_after;
        cp.c_fwd = st.c_fwd;
        cp.c_bwd = st.c_bwd;
        cp.p_no_copy = st.p_no_copy;
        if (st.decision == Decision::uncertain) {
            // carried like a no-copying pair; reported as scanned
            cp.decision = Decision::uncertain;
        }
        if (cp.decision == Decision::copying) {
            double pen = (double(st.l) - st.n0 - st.n_after) * L;
            cp.hat_fwd = st.c0_fwd + pen;
            cp.hat_bwd = st.c0_bwd + pen;
        } else {
            cp.diff = st.by_bound ? observed_diff(st.pair, st.rank) : st.l - st.n0;
            cp.m_dec = idx_.next_score(st.rank);
            double rest = cp.diff * L + double(cp.unseen()) * cp.m_dec;
            cp.hat_fwd = st.c0_fwd + rest;
            cp.hat_bwd = st.c0_bwd + rest;
        }
        return cp;
    }

    void sort_pairs()
    {
        std::sort(pairs_.begin(), pairs_.end(), [](const CarryPair& x, const CarryPair& y) { return x.pair < y.pair; });
        map_ = detail::PairMap(snap_.size());
        for (std::uint32_t i = 0; i < pairs_.size(); ++i) {
            map_.put(pairs_[i].pair, i);
        }
        std::fill(override_count_.begin(), override_count_.end(), 0);
        for (const auto& cp : pairs_) {
            for (const auto& o : cp.overrides) {
                ++override_count_[o.first];
            }
        }
    }

    CopyReport make_report(std::uint64_t comps, std::uint64_t bound_comps, std::uint64_t shared) const
    {
        CopyReport rep;
        rep.algorithm = to_string(Algorithm::incremental);
        rep.pairs.reserve(pairs_.size());
        for (const auto& cp : pairs_) {
            PairResult r;
            r.pair = cp.pair;
            r.decision = cp.decision;
            r.p_no_copy = cp.p_no_copy;
            r.c_fwd = cp.c_fwd;
            r.c_bwd = cp.c_bwd;
            r.decided_at_rank = cp.rank;
            r.shared_items = cp.l;
            r.n_before = cp.n_before;
            r.n_after = cp.n_after;
            r.by_bound = cp.by_bound;
            rep.pairs.push_back(r);
        }
        rep.computations = comps;
        rep.bound_computations = bound_comps;
        rep.pairs_considered = pairs_.size();
        rep.shared_values_examined = shared;
        return rep;
    }

    const Dataset* d_ = nullptr;
    IncrementalOptions opt_;
    Overlaps ov_;
    InvertedIndex idx_;
    std::vector<double> snap_;
    std::vector<std::uint32_t> item_count_;
    std::vector<double> basis_p_;
    std::vector<double> basis_score_;
    std::vector<std::uint32_t> override_count_;
    std::vector<CarryPair> pairs_;
    detail::PairMap map_{0};
    CopyReport report_;
};

/// Picks rho at the widest gap between consecutive sorted |changes|: rho is
/// the change just above the gap.
inline double gap_rho(std::vector<double> changes, double fallback)
{
    std::sort(changes.begin(), changes.end(), std::greater<>());
    changes.erase(std::remove(changes.begin(), changes.end(), 0.0), changes.end());
    if (changes.size() < 2) {
        return fallback;
    }
    double best_gap = -1.0;
    double rho = fallback;
    for (std::size_t i = 0; i + 1 < changes.size(); ++i) {
        double gap = changes[i] - changes[i + 1];
        if (gap > best_gap) {
            best_gap = gap;
            rho = changes[i];
        }
    }
    return rho;
}

/// Scores every frozen entry under the new probabilities and classifies the
/// change against the probability last applied. Accuracies enter through the
/// carried snapshot; a source whose accuracy moved by rho_accuracy or more
/// is flagged and takes its new accuracy.
inline ChangeClass classify_changes(const RoundCarry& c, const ValueProbs& probs_new, const SourceStats& stats_new,
                                    const ModelParams& prm, double rho_value, double rho_accuracy, bool auto_rho)
{
    const auto& idx = c.idx_;
    const auto nsrc = c.snap_.size();
    if (stats_new.accuracy.size() != nsrc || probs_new.item_count() != c.d_->item_count()) {
        throw ContractViolation("round inputs do not match the carried dataset");
    }
    ChangeClass cc;
    cc.new_accuracy = stats_new.accuracy;
    cc.big_source.assign(nsrc, 0);
    std::vector<double> snap = c.snap_;
    for (std::size_t s = 0; s < nsrc; ++s) {
        if (std::abs(stats_new.accuracy[s] - c.snap_[s]) >= rho_accuracy) {
            cc.big_source[s] = 1;
            snap[s] = stats_new.accuracy[s];
        }
    }
    const auto n = idx.size();
    cc.category.assign(n, EntryChange::unchanged);
    cc.new_prob.resize(n);
    cc.new_score.resize(n);
    std::vector<double> delta(n, 0.0);
    std::vector<char> touched(n, 0);
    std::vector<double> acc;
    for (std::size_t pos = 0; pos < n; ++pos) {
        const auto& e = idx[pos];
        double p = probs_new(e.item, e.value);
        cc.new_prob[pos] = p;
        bool big_provider = false;
        acc.clear();
        for (auto s : e.providers) {
            acc.push_back(snap[s]);
            big_provider = big_provider || cc.big_source[s];
        }
        if (p == c.basis_p_[pos] && !big_provider) {
            cc.new_score[pos] = c.basis_score_[pos];
        } else {
            cc.new_score[pos] = max_contribution(p, acc, prm);
        }
        if (big_provider) {
            touched[pos] = 1;
        } else if (p != c.basis_p_[pos] || c.override_count_[pos] != 0) {
            // touched only if some pair holding the entry used another probability
            const auto& pv = e.providers;
            for (std::size_t i = 0; i + 1 < pv.size() && !touched[pos]; ++i) {
                for (std::size_t j = i + 1; j < pv.size(); ++j) {
                    auto id = c.map_.get(SourcePair{pv[i], pv[j]});
                    if (id != detail::PairMap::none && pos <= c.pairs_[id].rank &&
                        c.used_prob(c.pairs_[id], pos) != p) {
                        touched[pos] = 1;
                        break;
                    }
                }
            }
        }
        delta[pos] = cc.new_score[pos] - c.basis_score_[pos];
    }
    cc.rho_value = rho_value;
    if (auto_rho) {
        std::vector<double> mags;
        for (std::size_t pos = 0; pos < n; ++pos) {
            if (touched[pos]) {
                mags.push_back(std::abs(delta[pos]));
            }
        }
        cc.rho_value = gap_rho(std::move(mags), rho_value);
    }
    for (std::size_t pos = 0; pos < n; ++pos) {
        if (!touched[pos]) {
            continue;
        }
        double dl = delta[pos];
        bool big = std::abs(dl) >= cc.rho_value;
        if (dl < 0.0) {
            cc.category[pos] = big ? EntryChange::big_decrease : EntryChange::small_decrease;
            if (!big) {
                cc.delta_down = std::max(cc.delta_down, -dl);
            }
        } else {
            cc.category[pos] = big ? EntryChange::big_increase : EntryChange::small_increase;
            if (!big) {
                cc.delta_up = std::max(cc.delta_up, dl);
            }
        }
    }
    return cc;
}

/// One incremental round. Copying pairs take decreases first and then look
/// for compensation; no-copying pairs mirror this. A pair stops as soon as
/// its maintained score confirms the old decision; pairs that run through
/// all three passes end with exact scores and are re-decided.
inline CopyReport incremental_round(RoundCarry& c, const ChangeClass& cc, const ModelParams& prm, RoundTrace* trace)
{
    auto& idx = c.idx_;
    const auto n = idx.size();
    if (cc.category.size() != n || cc.new_prob.size() != n || cc.big_source.size() != c.snap_.size()) {
        throw ContractViolation("change classification does not match the carried index");
    }
    RoundTrace local;
    RoundTrace& tr = trace ? *trace : local;
    tr = RoundTrace{};
    for (auto cat : cc.category) {
        ++tr.entries[static_cast<int>(cat)];
    }
    if (!cc.any_change()) {
        tr.reused_report = true;
        CopyReport rep = c.report_;
        rep.computations = 0;
        rep.bound_computations = 0;
        rep.shared_values_examined = 0;
        c.report_ = rep;
        return rep;
    }

    const auto th = c.opt_.three_way ? thresholds(prm, 0.9, 0.1) : thresholds(prm);
    const double L = score_diff_value(prm);
    std::uint64_t comps = 0;
    std::uint64_t bound_comps = 0;
    std::uint64_t shared = 0;

    // New snapshot, scores in place, refreshed M / m / tail.
    for (std::size_t s = 0; s < c.snap_.size(); ++s) {
        if (cc.big_source[s]) {
            c.snap_[s] = cc.new_accuracy[s];
        }
    }
    const auto old_tail = idx.tail_start();
    for (std::size_t pos = 0; pos < n; ++pos) {
        idx.set_score(pos, cc.new_prob[pos], cc.new_score[pos]);
    }
    idx.refresh(th.theta_ind);
    const double m = idx.min_score();
    const auto& snap = c.snap_;

    // Pairs recomputed from scratch: any pair with a big-accuracy source, and
    // pairs outside the carry that now meet outside the tail.
    std::unordered_set<std::size_t> extra;
    PairSlots slots(snap.size());
    for (std::size_t pos = old_tail; pos < idx.tail_start(); ++pos) {
        const auto& pv = idx[pos].providers;
        for (std::size_t i = 0; i + 1 < pv.size(); ++i) {
            for (std::size_t j = i + 1; j < pv.size(); ++j) {
                SourcePair p{pv[i], pv[j]};
                if (c.map_.get(p) == detail::PairMap::none) {
                    extra.insert(slots.slot(p));
                }
            }
        }
    }
    auto recompute = [&](SourcePair p) {
        return cc.big_source[p.a] || cc.big_source[p.b] || (!extra.empty() && extra.count(slots.slot(p)) != 0);
    };

    // Working state per carried pair.
    struct Work {
        bool skip = false;  // recomputed instead
        bool active = true;
        int pass = 0;       // 1..3 terminated in that pass, 4 ran through
        std::uint32_t rank_old = 0;
        std::uint32_t small = 0;  // small-change entries before the decision point (same sign as the estimate)
        double d1 = 0.0;
        double d2 = 0.0;
        double rep_fwd = 0.0;
        double rep_bwd = 0.0;
        std::uint32_t absorbed = 0;
        std::uint32_t last_absorbed = 0;
        std::uint32_t unseen = 0;
        bool charged = false;  // leftover unseen items charged ln(1-s)
    };
    auto& pairs = c.pairs_;
    std::vector<Work> work(pairs.size());
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        work[i].skip = recompute(pairs[i].pair);
        work[i].active = !work[i].skip;
        work[i].rank_old = pairs[i].rank;
        work[i].unseen = pairs[i].decision == Decision::copying ? 0 : pairs[i].unseen();
    }
    auto is_copy = [&](std::size_t i) { return pairs[i].decision == Decision::copying; };

    struct Event {
        std::uint32_t pair;
        std::uint32_t pos;
        bool holder;  // replacement of a contribution held before the round
    };
    std::vector<Event> events;

    auto for_pairs = [&](std::uint32_t pos, auto&& fn) {
        const auto& pv = idx[pos].providers;
        for (std::size_t i = 0; i + 1 < pv.size(); ++i) {
            for (std::size_t j = i + 1; j < pv.size(); ++j) {
                auto id = c.map_.get(SourcePair{pv[i], pv[j]});
                if (id != detail::PairMap::none && work[id].active) {
                    fn(id);
                }
            }
        }
    };
    auto contrib = [&](double p, SourcePair q) {
        return Contribution{score_same_value(p, snap[q.a], snap[q.b], prm),
                            score_same_value(p, snap[q.b], snap[q.a], prm)};
    };
    auto replace = [&](std::uint32_t id, std::uint32_t pos) {
        auto& cp = pairs[id];
        auto old = contrib(c.used_prob(cp, pos), cp.pair);
        auto now = contrib(idx[pos].p_true, cp.pair);
        cp.hat_fwd += now.forward - old.forward;
        cp.hat_bwd += now.backward - old.backward;
        comps += 4;
        events.push_back({id, pos, true});
    };
    auto copy_done = [&](std::size_t i) { return std::max(pairs[i].hat_fwd, pairs[i].hat_bwd) >= th.theta_cp; };
    auto indep_done = [&](std::size_t i) { return std::max(pairs[i].hat_fwd, pairs[i].hat_bwd) < th.theta_ind; };
    auto terminate = [&](std::size_t i, int pass) {
        work[i].active = false;
        work[i].pass = pass;
        work[i].rep_fwd = pairs[i].hat_fwd;
        work[i].rep_bwd = pairs[i].hat_bwd;
    };

    // Small-change tallies before each pair's decision point.
    for (std::uint32_t pos = 0; pos < n; ++pos) {
        auto cat = cc.category[pos];
        if (cat != EntryChange::small_decrease && cat != EntryChange::small_increase) {
            continue;
        }
        for_pairs(pos, [&](std::uint32_t id) {
            if (pos > work[id].rank_old) {
                return;
            }
            if (is_copy(id) ? cat == EntryChange::small_decrease : cat == EntryChange::small_increase) {
                ++work[id].small;
            }
        });
    }

    // Upfront refresh of M for no-copying pairs.
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        auto& cp = pairs[i];
        if (!work[i].active || is_copy(i) || work[i].unseen == 0) {
            continue;
        }
        double m_now = idx.next_score(cp.rank);
        if (std::abs(m_now - cp.m_dec) >= cc.rho_value) {
            double adj = work[i].unseen * (m_now - cp.m_dec);
            cp.hat_fwd += adj;
            cp.hat_bwd += adj;
            cp.m_dec = m_now;
            bound_comps += 2;
        }
    }

    // Pass 1: big changes against the decision, then the small-change estimate.
    for (std::uint32_t pos = 0; pos < n; ++pos) {
        auto cat = cc.category[pos];
        if (cat != EntryChange::big_decrease && cat != EntryChange::big_increase) {
            continue;
        }
        for_pairs(pos, [&](std::uint32_t id) {
            if (pos <= work[id].rank_old && is_copy(id) == (cat == EntryChange::big_decrease)) {
                replace(id, pos);
            }
        });
    }
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        if (!work[i].active) {
            continue;
        }
        auto& cp = pairs[i];
        auto& w = work[i];
        if (is_copy(i)) {
            w.d1 = cc.delta_down * w.small;
            cp.hat_fwd -= w.d1;
            cp.hat_bwd -= w.d1;
            if (copy_done(i)) {
                terminate(i, 1);
                continue;
            }
            w.d2 = m * cp.n_after;
            cp.hat_fwd += w.d2;
            cp.hat_bwd += w.d2;
            if (copy_done(i)) {
                terminate(i, 1);
            }
        } else {
            w.d1 = cc.delta_up * w.small;
            cp.hat_fwd += w.d1;
            cp.hat_bwd += w.d1;
            if (indep_done(i)) {
                terminate(i, 1);
            }
        }
    }

    // Pass 2: big changes in favour of the decision, and the shared entries
    // after the decision point.
    bool any_active = std::any_of(work.begin(), work.end(), [](const Work& w) { return w.active; });
    for (std::uint32_t pos = 0; any_active && pos < n; ++pos) {
        auto cat = cc.category[pos];
        for_pairs(pos, [&](std::uint32_t id) {
            auto& cp = pairs[id];
            auto& w = work[id];
            bool copying = is_copy(id);
            if (pos <= w.rank_old) {
                if (cat != (copying ? EntryChange::big_increase : EntryChange::big_decrease)) {
                    return;
                }
                replace(id, pos);
            } else {
                auto now = contrib(idx[pos].p_true, cp.pair);
                comps += 2;
                ++shared;
                events.push_back({id, pos, false});
                ++w.absorbed;
                w.last_absorbed = pos;
                if (copying) {
                    cp.hat_fwd += now.forward - m;
                    cp.hat_bwd += now.backward - m;
                    w.d2 -= m;
                } else {
                    cp.hat_fwd += now.forward - cp.m_dec;
                    cp.hat_bwd += now.backward - cp.m_dec;
                    --w.unseen;
                }
            }
            if (copying ? copy_done(id) : indep_done(id)) {
                terminate(id, 2);
            }
        });
    }
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        if (!work[i].active || is_copy(i)) {
            continue;
        }
        // every shared value is now accounted for; the rest differ
        double adj = work[i].unseen * (L - pairs[i].m_dec);
        pairs[i].hat_fwd += adj;
        pairs[i].hat_bwd += adj;
        work[i].unseen = 0;
        work[i].charged = true;
        if (indep_done(i)) {
            terminate(i, 2);
        }
    }

    // Pass 3: exact replacement of the small changes.
    any_active = std::any_of(work.begin(), work.end(), [](const Work& w) { return w.active; });
    for (std::uint32_t pos = 0; any_active && pos < n; ++pos) {
        auto cat = cc.category[pos];
        if (cat != EntryChange::small_decrease && cat != EntryChange::small_increase) {
            continue;
        }
        for_pairs(pos, [&](std::uint32_t id) {
            auto& cp = pairs[id];
            auto& w = work[id];
            if (pos > w.rank_old) {
                return;
            }
            replace(id, pos);
            if (is_copy(id)) {
                if (cat == EntryChange::small_decrease) {
                    cp.hat_fwd += cc.delta_down;
                    cp.hat_bwd += cc.delta_down;
                    w.d1 -= cc.delta_down;
                }
                if (copy_done(id)) {
                    terminate(id, 3);
                }
            } else {
                if (cat == EntryChange::small_increase) {
                    cp.hat_fwd -= cc.delta_up;
                    cp.hat_bwd -= cc.delta_up;
                    w.d1 -= cc.delta_up;
                }
                if (indep_done(id)) {
                    terminate(id, 3);
                }
            }
        });
    }

    // Final step: strip estimates, move decision points, re-decide pairs
    // that ran through.
    const auto last = n == 0 ? 0u : static_cast<std::uint32_t>(n - 1);
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        auto& cp = pairs[i];
        auto& w = work[i];
        if (w.skip) {
            continue;
        }
        bool copying = is_copy(i);
        auto* bucket = copying ? tr.copying : tr.no_copying;
        if (w.active) {
            w.pass = 4;
        }
        cp.pass = static_cast<std::uint8_t>(w.pass);
        if (w.absorbed != 0) {
            cp.n_before += w.absorbed;
            cp.n_after -= w.absorbed;
            cp.rank = w.last_absorbed;
        }
        if (w.pass == 4) {
            cp.rank = std::max(cp.rank, last);
            cp.n_before += cp.n_after;
            cp.n_after = 0;
            cp.p_no_copy = posterior_no_copy(cp.hat_fwd, cp.hat_bwd, prm);
            auto dec = decide(cp.p_no_copy, c.opt_.three_way);
            cp.c_fwd = cp.hat_fwd;
            cp.c_bwd = cp.hat_bwd;
            cp.by_bound = false;
            if ((dec == Decision::copying) != copying) {
                ++bucket[4];
            } else {
                ++bucket[3];
            }
            cp.decision = dec;
            if (dec != Decision::copying) {
                cp.diff = cp.l - cp.n_before;
                cp.m_dec = idx.next_score(cp.rank);
            }
            continue;
        }
        ++bucket[w.pass - 1];
        cp.by_bound = true;
        cp.c_fwd = w.rep_fwd;
        cp.c_bwd = w.rep_bwd;
        cp.p_no_copy = posterior_no_copy(cp.c_fwd, cp.c_bwd, prm);
        if (w.charged) {
            cp.rank = last;
            cp.n_before += cp.n_after;
            cp.n_after = 0;
            cp.diff = cp.l - cp.n_before;
        }
        if (copying) {
            double fix = w.d1 - w.d2;
            cp.hat_fwd += fix;
            cp.hat_bwd += fix;
        } else {
            cp.hat_fwd -= w.d1;
            cp.hat_bwd -= w.d1;
        }
    }

    // Entry basis: advance where every holder applied the new probability.
    std::vector<std::uint32_t> holders(n, 0);
    std::vector<std::uint32_t> applied(n, 0);
    for (std::uint32_t pos = 0; pos < n; ++pos) {
        if (cc.category[pos] == EntryChange::unchanged) {
            continue;
        }
        const auto& pv = idx[pos].providers;
        for (std::size_t i = 0; i + 1 < pv.size(); ++i) {
            for (std::size_t j = i + 1; j < pv.size(); ++j) {
                auto id = c.map_.get(SourcePair{pv[i], pv[j]});
                if (id != detail::PairMap::none && !work[id].skip && pos <= work[id].rank_old) {
                    ++holders[pos];
                }
            }
        }
    }
    for (const auto& ev : events) {
        if (ev.holder) {
            ++applied[ev.pos];
        }
    }
    std::vector<char> advanced(n, 0);
    for (std::uint32_t pos = 0; pos < n; ++pos) {
        if (cc.category[pos] != EntryChange::unchanged && applied[pos] == holders[pos]) {
            advanced[pos] = 1;
            c.basis_p_[pos] = cc.new_prob[pos];
            c.basis_score_[pos] = cc.new_score[pos];
        }
    }
    auto set_override = [&](CarryPair& cp, std::uint32_t pos, double p, bool keep) {
        auto it = std::lower_bound(cp.overrides.begin(), cp.overrides.end(), pos,
                                   [](const auto& o, std::uint32_t q) { return o.first < q; });
        bool found = it != cp.overrides.end() && it->first == pos;
        if (keep) {
            if (found) {
                it->second = p;
            } else {
                cp.overrides.insert(it, {pos, p});
            }
        } else if (found) {
            cp.overrides.erase(it);
        }
    };
    for (const auto& ev : events) {
        double p = cc.new_prob[ev.pos];
        set_override(pairs[ev.pair], ev.pos, p, c.basis_p_[ev.pos] != p);
    }

    // Recompute the flagged pairs over the frozen order.
    std::vector<CarryPair> fresh;
    bool need_recompute = !extra.empty() || std::any_of(cc.big_source.begin(), cc.big_source.end(), [](char b) { return b; });
    if (need_recompute) {
        auto res = detail::scan(idx, c.ov_, snap, c.item_count_, prm, c.scan_options(recompute));
        comps += res.computations;
        bound_comps += res.bound_computations;
        shared += res.shared_values;
        tr.recomputed_pairs = res.states.size();
        for (const auto& st : res.states) {
            auto cp = c.carry_from(st, prm);
            fresh.push_back(std::move(cp));
        }
    }
    std::vector<CarryPair> kept;
    kept.reserve(pairs.size() + fresh.size());
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        if (!work[i].skip) {
            kept.push_back(std::move(pairs[i]));
        }
    }
    std::size_t first_fresh = kept.size();
    for (auto& cp : fresh) {
        kept.push_back(std::move(cp));
    }
    pairs = std::move(kept);
    // Recomputed pairs hold the new probability everywhere before their
    // decision point; record it where the basis stayed behind.
    if (first_fresh < pairs.size()) {
        detail::PairMap fresh_map(snap.size());
        for (std::uint32_t i = static_cast<std::uint32_t>(first_fresh); i < pairs.size(); ++i) {
            fresh_map.put(pairs[i].pair, i);
        }
        for (std::uint32_t pos = 0; pos < n; ++pos) {
            if (c.basis_p_[pos] == cc.new_prob[pos]) {
                continue;
            }
            const auto& pv = idx[pos].providers;
            for (std::size_t i = 0; i + 1 < pv.size(); ++i) {
                for (std::size_t j = i + 1; j < pv.size(); ++j) {
                    auto id = fresh_map.get(SourcePair{pv[i], pv[j]});
                    if (id != detail::PairMap::none && pos <= pairs[id].rank) {
                        set_override(pairs[id], pos, cc.new_prob[pos], true);
                    }
                }
            }
        }
    }
    c.sort_pairs();

    tr.computations = comps;
    tr.bound_computations = bound_comps;
    c.report_ = c.make_report(comps, bound_comps, shared);
    return c.report_;
}

}  // namespace copydet
