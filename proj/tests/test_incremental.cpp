#include "fixtures.hpp"
#include "oracles.hpp"

#include <copydet/fusion.hpp>
#include <copydet/incremental.hpp>

#include <gtest/gtest.h>

#include <set>

using namespace copydet;

namespace {

struct Trace {
    Dataset d = fixtures::capitals();
    ModelParams prm;
    IncrementalOptions opt;
    std::optional<RoundCarry> carry;
    CopyReport round2;

    Trace()
    {
        opt.hybrid_cutoff = 0;
        auto [rep, c] = RoundCarry::full_round(d, fixtures::probs_from(d, fixtures::round1_probs()),
                                               fixtures::stats_from(d, fixtures::round1_accuracy()), prm, opt);
        round2 = std::move(rep);
        carry.emplace(std::move(c));
    }

    ChangeClass next() const
    {
        return classify_changes(*carry, fixtures::probs_from(d, fixtures::round2_probs()),
                                fixtures::stats_from(d, fixtures::round2_accuracy()), prm, 1.0, 0.2);
    }

    const CarryPair& pair(const char* a, const char* b) const
    {
        return *carry->find(fixtures::src(d, a), fixtures::src(d, b));
    }

    std::string entry(std::size_t pos) const
    {
        const auto& e = carry->index()[pos];
        return fixtures::entry_name(d, e.item, e.value);
    }
};

/// C0 of a carried pair from the probabilities it actually used.
std::pair<double, double> shadow_c0(const RoundCarry& c, const CarryPair& cp, const ModelParams& prm)
{
    double f = 0.0, b = 0.0;
    auto snap = c.snapshot();
    const auto& idx = c.index();
    for (std::uint32_t pos = 0; pos <= cp.rank && pos < idx.size(); ++pos) {
        const auto& pv = idx[pos].providers;
        bool has_a = std::binary_search(pv.begin(), pv.end(), cp.pair.a);
        bool has_b = std::binary_search(pv.begin(), pv.end(), cp.pair.b);
        if (has_a && has_b) {
            double p = c.used_prob(cp, pos);
            f += score_same_value(p, snap[cp.pair.a], snap[cp.pair.b], prm);
            b += score_same_value(p, snap[cp.pair.b], snap[cp.pair.a], prm);
        }
    }
    return {f, b};
}

void expect_carry_consistent(const RoundCarry& c, const ModelParams& prm, const std::string& where)
{
    const double L = score_diff_value(prm);
    for (const auto& cp : c.pairs()) {
        auto [f, b] = shadow_c0(c, cp, prm);
        if (cp.decision == Decision::copying) {
            double rest = (double(cp.l) - cp.n_before - cp.n_after) * L;
            EXPECT_NEAR(cp.hat_fwd, f + rest, 1e-9) << where;
            EXPECT_NEAR(cp.hat_bwd, b + rest, 1e-9) << where;
        } else {
            double rest = cp.diff * L + cp.unseen() * cp.m_dec;
            EXPECT_NEAR(cp.hat_fwd, f + rest, 1e-9) << where;
            EXPECT_NEAR(cp.hat_bwd, b + rest, 1e-9) << where;
        }
    }
}

struct Rounds {
    oracle::Instance inst;
    std::vector<FusionState> inputs;  // inputs[r] feeds round r + 2
};

Rounds trajectory(std::uint64_t seed, int rounds)
{
    Rounds out{oracle::random_instance(seed), {}};
    IterativeOptions opt;
    opt.detector = Algorithm::hybrid;
    opt.max_rounds = rounds;
    opt.epsilon = 1e-12;
    opt.on_round = [&](const RoundSummary&, const FusionState& st) { out.inputs.push_back(st); };
    run_iterative(out.inst.data, ModelParams{}, opt);
    return out;
}

}  // namespace

TEST(Incremental, RoundTwoCarry)
{
    Trace t;
    const auto& s23 = t.pair("S2", "S3");
    EXPECT_EQ(s23.decision, Decision::copying);
    EXPECT_EQ(t.entry(s23.rank), "NY.NewYork");
    EXPECT_EQ(s23.n_before, 3u);
    EXPECT_EQ(s23.n_after, 1u);
    EXPECT_NEAR(s23.hat_fwd, 6.33, 0.02);
    EXPECT_NEAR(s23.hat_bwd, 6.33, 0.02);
    const auto& s01 = t.pair("S0", "S1");
    EXPECT_EQ(s01.decision, Decision::copying);
    EXPECT_NEAR(s01.hat_fwd, 1.15, 0.02);
    EXPECT_NEAR(s01.hat_bwd, 1.66, 0.02);
    const auto& s02 = t.pair("S0", "S2");
    EXPECT_EQ(s02.decision, Decision::no_copying);
    EXPECT_EQ(t.entry(s02.rank), "AZ.Phoenix");
    expect_carry_consistent(*t.carry, t.prm, "round 2");
}

TEST(Incremental, ClassifiesRoundThreeEntries)
{
    Trace t;
    auto cc = t.next();
    std::set<std::string> big_down, big_up;
    for (std::size_t pos = 0; pos < cc.category.size(); ++pos) {
        if (cc.category[pos] == EntryChange::big_decrease) {
            big_down.insert(t.entry(pos));
        }
        if (cc.category[pos] == EntryChange::big_increase) {
            big_up.insert(t.entry(pos));
        }
    }
    EXPECT_EQ(big_down, std::set<std::string>{"NY.Albany"});
    EXPECT_EQ(big_up, std::set<std::string>{"NY.NewYork"});
    EXPECT_NEAR(cc.delta_down, 0.12, 0.01);
    for (std::size_t pos = 0; pos < cc.category.size(); ++pos) {
        if (cc.category[pos] == EntryChange::small_decrease) {
            EXPECT_LE(t.carry->basis_score(pos) - cc.new_score[pos], cc.delta_down + 1e-12);
        }
    }
    EXPECT_FALSE(std::any_of(cc.big_source.begin(), cc.big_source.end(), [](char b) { return b != 0; }));
}

TEST(Incremental, RoundThreeTrace)
{
    Trace t;
    auto cc = t.next();
    RoundTrace tr;
    auto rep = incremental_round(*t.carry, cc, t.prm, &tr);

    const auto& s23 = t.pair("S2", "S3");
    EXPECT_EQ(s23.pass, 1);
    EXPECT_EQ(s23.decision, Decision::copying);
    EXPECT_NEAR(s23.c_fwd, 6.33, 0.02);

    const auto& s01 = t.pair("S0", "S1");
    EXPECT_EQ(s01.pass, 4);
    EXPECT_EQ(s01.decision, Decision::no_copying);
    EXPECT_NEAR(s01.c_fwd, 0.95, 0.02);
    EXPECT_NEAR(s01.c_bwd, 0.20, 0.02);
    EXPECT_LT(std::max(s01.c_fwd, s01.c_bwd), thresholds(t.prm).theta_ind);

    const auto& s02 = t.pair("S0", "S2");
    EXPECT_EQ(s02.pass, 1);
    EXPECT_EQ(s02.decision, Decision::no_copying);

    EXPECT_FALSE(rep.copying(fixtures::src(t.d, "S0"), fixtures::src(t.d, "S1")));
    EXPECT_TRUE(rep.copying(fixtures::src(t.d, "S2"), fixtures::src(t.d, "S3")));
    EXPECT_EQ(tr.copying[4], 1u);
    EXPECT_GT(tr.computations, 0u);
    EXPECT_LT(tr.computations, t.round2.computations);
    expect_carry_consistent(*t.carry, t.prm, "round 3");
}

TEST(Incremental, UnchangedInputsReuseReport)
{
    Trace t;
    auto cc = classify_changes(*t.carry, fixtures::probs_from(t.d, fixtures::round1_probs()),
                               fixtures::stats_from(t.d, fixtures::round1_accuracy()), t.prm, 1.0, 0.2);
    EXPECT_FALSE(cc.any_change());
    EXPECT_EQ(cc.delta_down, 0.0);
    EXPECT_EQ(cc.delta_up, 0.0);
    RoundTrace tr;
    auto rep = incremental_round(*t.carry, cc, t.prm, &tr);
    EXPECT_TRUE(tr.reused_report);
    EXPECT_EQ(tr.computations, 0u);
    EXPECT_EQ(rep.pairs, t.round2.pairs);
}

TEST(Incremental, ShapeMismatchIsContractViolation)
{
    Trace t;
    auto other = oracle::random_instance(2);
    EXPECT_THROW(classify_changes(*t.carry, other.probs, other.stats, t.prm, 1.0, 0.2), ContractViolation);
    ChangeClass bad;
    EXPECT_THROW(incremental_round(*t.carry, bad, t.prm), ContractViolation);
}

TEST(Incremental, BigAccuracyChangeRecomputesPairs)
{
    Trace t;
    auto acc = fixtures::round2_accuracy();
    acc["S2"] = 0.7;
    auto cc = classify_changes(*t.carry, fixtures::probs_from(t.d, fixtures::round2_probs()),
                               fixtures::stats_from(t.d, acc), t.prm, 1.0, 0.2);
    EXPECT_TRUE(cc.big_source[fixtures::src(t.d, "S2")]);
    RoundTrace tr;
    incremental_round(*t.carry, cc, t.prm, &tr);
    EXPECT_GT(tr.recomputed_pairs, 0u);
    EXPECT_NEAR(t.carry->snapshot()[fixtures::src(t.d, "S2")], 0.7, 1e-12);
    EXPECT_EQ(t.pair("S2", "S3").pass, 0);
    expect_carry_consistent(*t.carry, t.prm, "recompute");
}

TEST(Incremental, GapRho)
{
    EXPECT_NEAR(gap_rho({0.1, 0.12, 2.0, 2.5}, 1.0), 2.0, 1e-12);
    EXPECT_NEAR(gap_rho({}, 1.0), 1.0, 1e-12);
}

TEST(Incremental, CarryMatchesUsedProbabilities)
{
    ModelParams prm;
    for (std::uint64_t seed = 1; seed <= 40; ++seed) {
        auto r = trajectory(seed, 6);
        if (r.inputs.size() < 3) {
            continue;
        }
        auto [rep, carry] = RoundCarry::full_round(r.inst.data, r.inputs[0].probs, r.inputs[0].stats, prm);
        expect_carry_consistent(carry, prm, "seed " + std::to_string(seed) + " full");
        for (std::size_t k = 1; k < r.inputs.size(); ++k) {
            auto cc = classify_changes(carry, r.inputs[k].probs, r.inputs[k].stats, prm, 1.0, 0.2);
            incremental_round(carry, cc, prm);
            expect_carry_consistent(carry, prm, "seed " + std::to_string(seed) + " round " + std::to_string(k + 2));
        }
    }
}

TEST(Incremental, RanThroughPairsAreExact)
{
    ModelParams prm;
    std::size_t checked = 0;
    for (std::uint64_t seed = 1; seed <= 40; ++seed) {
        auto r = trajectory(seed, 5);
        if (r.inputs.size() < 2) {
            continue;
        }
        auto [rep, carry] = RoundCarry::full_round(r.inst.data, r.inputs[0].probs, r.inputs[0].stats, prm);
        for (std::size_t k = 1; k < r.inputs.size(); ++k) {
            const auto& in = r.inputs[k];
            auto cc = classify_changes(carry, in.probs, in.stats, prm, 1.0, 0.2);
            incremental_round(carry, cc, prm);
            auto snap = SourceStats::with_accuracy(r.inst.data, {carry.snapshot().begin(), carry.snapshot().end()});
            for (const auto& cp : carry.pairs()) {
                if (cp.pass != 4) {
                    continue;
                }
                auto ex = oracle::pair_score(r.inst.data, in.probs, snap, prm, cp.pair.a, cp.pair.b);
                EXPECT_NEAR(cp.c_fwd, ex.fwd, 1e-9) << "seed " << seed;
                EXPECT_NEAR(cp.c_bwd, ex.bwd, 1e-9) << "seed " << seed;
                ++checked;
            }
        }
    }
    EXPECT_GT(checked, 0u);
}

TEST(Incremental, AgreesWithFreshHybrid)
{
    ModelParams prm;
    std::size_t hit = 0, found = 0, reference = 0, rounds = 0;
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
        auto r = trajectory(seed, 6);
        if (r.inputs.size() < 2) {
            continue;
        }
        auto [rep, carry] = RoundCarry::full_round(r.inst.data, r.inputs[0].probs, r.inputs[0].stats, prm);
        for (std::size_t k = 1; k < r.inputs.size(); ++k) {
            const auto& in = r.inputs[k];
            auto cc = classify_changes(carry, in.probs, in.stats, prm, 1.0, 0.2);
            auto inc = incremental_round(carry, cc, prm);
            auto fresh = detect(Algorithm::hybrid, r.inst.data, in.probs, in.stats, prm);
            auto a = inc.copying_pairs(), b = fresh.copying_pairs();
            std::set<SourcePair> sb(b.begin(), b.end());
            for (auto p : a) {
                hit += sb.count(p);
            }
            found += a.size();
            reference += b.size();
            ++rounds;
        }
    }
    ASSERT_GT(rounds, 100u);
    double prec = found ? double(hit) / found : 1.0;
    double rec = reference ? double(hit) / reference : 1.0;
    EXPECT_GE(2 * prec * rec / (prec + rec), 0.96) << "P " << prec << " R " << rec;
}
