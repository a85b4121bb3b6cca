#include "fixtures.hpp"
#include "oracles.hpp"

#include <copydet/sampling.hpp>
#include <copydet/synth.hpp>

#include <gtest/gtest.h>

#include <set>
#include <sstream>

using namespace copydet;

namespace {

SynthConfig skewed(std::uint64_t seed)
{
    SynthConfig c;
    c.n_sources = 60;
    c.n_items = 400;
    c.coverage_low = 0.005;
    c.coverage_high = 1.0;
    c.coverage_skew = 12.0;
    c.seed = seed;
    return c;
}

std::size_t selected_of(const Dataset& d, SourceId s, const std::vector<ItemId>& sel)
{
    std::set<ItemId> in(sel.begin(), sel.end());
    std::size_t n = 0;
    for (const auto& c : d.claims_of(s)) {
        n += in.count(c.item);
    }
    return n;
}

}  // namespace

TEST(ScaleSample, RateOneIsIdentity)
{
    auto d = fixtures::capitals();
    auto s = scale_sample(d, 1.0, 4, 3);
    EXPECT_EQ(s.data, d);
    EXPECT_DOUBLE_EQ(s.plan.item_fraction, 1.0);
    EXPECT_DOUBLE_EQ(s.plan.cell_fraction, 1.0);
}

TEST(ScaleSample, FullCoverageNeverTopsUp)
{
    SynthConfig c;
    c.n_sources = 10;
    c.n_items = 200;
    c.coverage_low = c.coverage_high = 1.0;
    auto g = generate(c);
    auto s = scale_sample(g.data, 0.1, 4, 9);
    EXPECT_DOUBLE_EQ(s.plan.item_fraction, 0.1);
    EXPECT_EQ(s.plan.selected.size(), 20u);
}

TEST(ScaleSample, FloorOnSkewedData)
{
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        auto g = generate(skewed(seed));
        auto sh = shape_of(g.data);
        ASSERT_GE(2 * sh.small_sources, sh.sources) << "seed " << seed;
        auto s = scale_sample(g.data, 0.1, 4, seed);
        EXPECT_GE(s.plan.selected.size(), std::size_t(0.1 * g.data.item_count()));
        EXPECT_GT(s.plan.item_fraction, 0.1);
        for (SourceId src = 0; src < g.data.source_count(); ++src) {
            auto own = g.data.claims_of(src).size();
            EXPECT_GE(selected_of(g.data, src, s.plan.selected), std::min<std::size_t>(4, own));
        }
    }
}

TEST(ScaleSample, SampleIsRestriction)
{
    auto g = generate(skewed(2));
    auto s = scale_sample(g.data, 0.2, 4, 5);
    for (SourceId src = 0; src < s.data.source_count(); ++src) {
        auto orig = *g.data.find_source(s.data.source_name(src));
        for (const auto& c : s.data.claims_of(src)) {
            auto item = *g.data.find_item(s.data.item_name(c.item));
            auto v = g.data.value_of(orig, item);
            ASSERT_TRUE(v);
            EXPECT_EQ(g.data.value_name(item, *v), s.data.value_name(c.item, c.value));
        }
    }
}

TEST(ScaleSample, SeedDeterminism)
{
    auto g = generate(skewed(3));
    auto a = scale_sample(g.data, 0.1, 4, 42);
    auto b = scale_sample(g.data, 0.1, 4, 42);
    auto c = scale_sample(g.data, 0.1, 4, 43);
    EXPECT_EQ(a.plan.selected, b.plan.selected);
    EXPECT_NE(a.plan.selected, c.plan.selected);
}

TEST(ScaleSample, RateOutOfRange)
{
    auto d = fixtures::capitals();
    EXPECT_THROW(scale_sample(d, 0.0, 4, 1), ConfigError);
    EXPECT_THROW(scale_sample(d, 1.5, 4, 1), ConfigError);
    EXPECT_THROW(sample_by_item(d, -0.1, 1), ConfigError);
}

TEST(Baselines, ByItemAndByCell)
{
    auto g = generate(skewed(4));
    auto bi = sample_by_item(g.data, 0.25, 7);
    EXPECT_EQ(bi.plan.selected.size(), 100u);
    auto bc = sample_by_cell(g.data, 0.25, 7);
    EXPECT_GE(bc.plan.cell_fraction, 0.25);
    EXPECT_EQ(bc.data.claim_count(), std::size_t(bc.plan.cell_fraction * g.data.claim_count() + 0.5));
}

TEST(Plan, OneItemPerLine)
{
    auto d = fixtures::capitals();
    auto s = scale_sample(d, 0.4, 0, 1);
    std::ostringstream out;
    write_plan(out, s.plan, d);
    std::istringstream in(out.str());
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        EXPECT_TRUE(d.find_item(line));
        ++n;
    }
    EXPECT_EQ(n, 2u);
}

TEST(ScaleSample, DetectionOnSampleMatchesFullData)
{
    SynthConfig c;
    c.n_sources = 30;
    c.n_items = 600;
    c.coverage_low = 0.8;
    c.coverage_high = 1.0;
    c.seed = 12;
    auto g = generate(c);
    auto s = scale_sample(g.data, 0.1, 4, 12);
    ModelParams prm;
    IterativeOptions opt;
    auto full = run_iterative(g.data, prm, opt);
    auto part = run_iterative(s.data, prm, opt);
    auto m = compare_reports(s.data, part.report, g.data, full.report);
    EXPECT_GE(m.f_measure, 0.85) << "P " << m.precision << " R " << m.recall;
}
