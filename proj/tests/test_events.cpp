#include <gtest/gtest.h>

#include <cmath>

#include "mdhp/events.hpp"
#include "mdhp/likelihood.hpp"
#include "mdhp/padded.hpp"
#include "mdhp/rng.hpp"
#include "mdhp/solver.hpp"
#include "oracles.hpp"

using namespace mdhp;

TEST(EventSequences, RejectsBadInput) {
    EXPECT_THROW(EventSequences({}, 1.0), ConfigError);
    EXPECT_THROW(EventSequences({{0.1}}, -1.0), ConfigError);
    EXPECT_THROW(EventSequences({{0.1}}, NAN), ConfigError);
    EXPECT_THROW(EventSequences({{1.5}}, 1.0), DataError);
    EXPECT_THROW(EventSequences({{-0.1}}, 1.0), DataError);
}

TEST(EventSequences, SortsAndBreaksTies) {
    EventSequences ev({{0.5, 0.2, 0.5}, {0.3, 0.3}}, 1.0);
    for (std::size_t i = 0; i < ev.dims(); ++i) {
        auto t = ev.times(i);
        for (std::size_t k = 1; k < t.size(); ++k) EXPECT_LT(t[k - 1], t[k]);
    }
    EXPECT_EQ(ev.times(0)[0], 0.2);
    EXPECT_EQ(ev.times(0)[1], 0.5);
    EXPECT_EQ(ev.times(0)[2], std::nextafter(0.5, 1.0));
    EXPECT_EQ(ev.total_count(), 5u);
    EXPECT_EQ(ev.max_count(), 3u);
    EXPECT_EQ(ev.min_count(), 2u);
}

TEST(EventSequences, CrossDimensionTiesKept) {
    EventSequences ev({{0.4}, {0.4}}, 1.0);
    EXPECT_EQ(ev.times(0)[0], ev.times(1)[0]);
}

TEST(Standardize, AffineEndpoints) {
    auto out = standardize(EventSequences({{0, 5, 10}}, 10.0), 0.0, 1.0);
    ASSERT_EQ(out.count(0), 3u);
    EXPECT_DOUBLE_EQ(out.times(0)[0], 0.0);
    EXPECT_DOUBLE_EQ(out.times(0)[1], 0.5);
    EXPECT_DOUBLE_EQ(out.times(0)[2], 1.0);
    EXPECT_DOUBLE_EQ(out.t_span(), 1.0);
}

TEST(Standardize, JointAcrossDims) {
    auto out = standardize(EventSequences({{2, 4}, {3}}, 5.0), 0.0, 1.0);
    EXPECT_DOUBLE_EQ(out.times(0)[0], 0.0);
    EXPECT_DOUBLE_EQ(out.times(0)[1], 1.0);
    EXPECT_DOUBLE_EQ(out.times(1)[0], 0.5);
}

TEST(Standardize, Errors) {
    EXPECT_THROW(standardize(EventSequences::empty(2, 1.0), 0.0, 1.0), DataError);
    EXPECT_THROW(standardize(EventSequences({{0.3}, {0.3}}, 1.0), 0.0, 1.0), DegenerateWindowError);
    EXPECT_THROW(standardize(EventSequences({{0.1, 0.3}}, 1.0), 1.0, 1.0), ConfigError);
}

TEST(Standardize, RandomEndpointsProperty) {
    Rng rng(7);
    for (int rep = 0; rep < 200; ++rep) {
        const std::size_t d = 1 + rng.below(4);
        auto ev = oracle::random_events(rng, d, 20, rng.uniform(0.5, 100.0));
        if (ev.total_count() < 2) continue;
        double lo = rng.uniform(0.0, 3.0), hi = lo + rng.uniform(0.5, 50.0);
        EventSequences out;
        try {
            out = standardize(ev, lo, hi);
        } catch (const DegenerateWindowError&) {
            continue;
        }
        double mn = INFINITY, mx = -INFINITY;
        for (const auto& s : out.all()) {
            for (double t : s) mn = std::min(mn, t), mx = std::max(mx, t);
            for (std::size_t k = 1; k < s.size(); ++k) ASSERT_LT(s[k - 1], s[k]);
        }
        EXPECT_NEAR(mn, lo, 1e-12 * hi);
        EXPECT_NEAR(mx, hi, 1e-12 * hi);
        EXPECT_DOUBLE_EQ(out.t_span(), hi);
    }
}

TEST(PadAndStack, ShapeArithmetic) {
    auto pe = pad_and_stack(EventSequences({{0.1, 0.2, 0.3}, {0.5}}, 1.0));
    EXPECT_EQ(pe.dims, 2u);
    EXPECT_EQ(pe.max_len, 3u);
    EXPECT_EQ(pe.padded.size(), 6u);
    int valid = 0;
    for (auto m : pe.mask) valid += m;
    EXPECT_EQ(valid, 4);
    EXPECT_EQ(pe.padded[pe.slot(1, 1)], 1.0);
    EXPECT_EQ(pe.padded[pe.slot(1, 2)], 1.0);
}

TEST(PadAndStack, PairTensorByHand) {
    auto pe = pad_and_stack(EventSequences({{0.2, 0.5}}, 1.0));
    EXPECT_NEAR(pe.tmpt[pe.pair(0, 1, 0, 0)], 0.3, 1e-15);
    EXPECT_TRUE(pe.pair_mask[pe.pair(0, 1, 0, 0)]);
    EXPECT_FALSE(pe.pair_mask[pe.pair(0, 0, 0, 0)]);
    EXPECT_FALSE(pe.pair_mask[pe.pair(0, 1, 0, 1)]);
    EXPECT_FALSE(pe.pair_mask[pe.pair(0, 0, 0, 1)]);
}

TEST(PadAndStack, AllEmpty) {
    auto ev = EventSequences::empty(3, 1.0);
    auto pe = pad_and_stack(ev);
    for (auto m : pe.mask) EXPECT_EQ(m, 0);
    MdhpParams p = MdhpParams::uniform(3, 0.5, 1.0, 0.7);
    EXPECT_DOUBLE_EQ(log_likelihood(p, pe, 1.0), -1.0 * 2.1);
}

TEST(PadAndStack, InvariantsOnRandomInputs) {
    Rng rng(11);
    for (int rep = 0; rep < 50; ++rep) {
        const std::size_t d = 1 + rng.below(4);
        auto ev = oracle::random_events(rng, d, 12, 1.0);
        auto pe = pad_and_stack(ev);
        for (std::size_t i = 0; i < d; ++i) {
            for (std::size_t a = 0; a < pe.max_len; ++a) {
                const bool valid = a < ev.count(i);
                ASSERT_EQ(pe.mask[pe.slot(i, a)] != 0, valid);
                ASSERT_EQ(pe.padded[pe.slot(i, a)], valid ? ev.times(i)[a] : ev.t_span());
                for (std::size_t j = 0; j < d; ++j) {
                    std::size_t run = 0;
                    bool in_prefix = true;
                    for (std::size_t b = 0; b < pe.max_len; ++b) {
                        const auto idx = pe.pair(i, a, j, b);
                        ASSERT_EQ(pe.tmpt[idx], pe.padded[pe.slot(i, a)] - pe.padded[pe.slot(j, b)]);
                        if (pe.pair_mask[idx]) {
                            ASSERT_GT(pe.tmpt[idx], 0.0);
                            ASSERT_TRUE(in_prefix);
                            ++run;
                        } else {
                            in_prefix = false;
                        }
                    }
                    ASSERT_EQ(pe.prefix[(i * pe.max_len + a) * d + j], run);
                }
            }
        }
    }
}

TEST(MdhpParams, Validate) {
    auto p = MdhpParams::uniform(2, 0.5, 1.0, 0.1);
    EXPECT_NO_THROW(p.validate());
    p.beta(0, 1) = 0.0;
    EXPECT_THROW(p.validate(), ConfigError);
    p = MdhpParams::uniform(2, 0.5, 1.0, 0.1);
    p.alpha(1, 0) = -1e-3;
    EXPECT_THROW(p.validate(), ConfigError);
    EXPECT_THROW(p.check_compatible(EventSequences::empty(3, 1.0)), ConfigError);
}
