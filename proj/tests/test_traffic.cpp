#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "checks.hpp"
#include "mdhp/traffic.hpp"

using namespace mdhp;
using namespace mdhp::traffic;

namespace {

AttackScenario with_rate(RateParams rate, Sampler sampler = Sampler::npp) {
    AttackScenario s = scenario_row(0);
    s.rate = rate;
    s.sampler = sampler;
    return s;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST(AttackRate, Examples) {
    EXPECT_DOUBLE_EQ(attack_rate(with_rate(PlaRate{2, 1}), 0.5), 1.0);
    for (double t : {0.0, 0.25, 0.5, 0.9, 1.0}) {
        EXPECT_NEAR(attack_rate(with_rate(DamRate{1.0, 3.0, 4.0}), t), 3.0 * t * t, 1e-15);
    }
    EXPECT_DOUBLE_EQ(attack_rate(with_rate(DamRate{0.0, 3.0, 4.0}), 0.0), 4.0);
}

TEST(AttackRate, PiecewiseAndVerbatimForms) {
    DeaRate d{1.5, 0.5, 2.0, 3.0, 2.0, 0.4};
    auto s = with_rate(d);
    EXPECT_NEAR(attack_rate(s, 0.3), 1.5 * 2.0 * 0.3, 1e-15);
    EXPECT_NEAR(attack_rate(s, 0.4), 0.5 * 3.0, 1e-15);
    EXPECT_NEAR(attack_rate(s, 0.9), 0.5 * 3.0 * std::exp(2.0 * 0.5), 1e-14);
    AsaRate a{4.0, 8.0, 0.5};
    const double den = 1.0 + std::exp(8.0 * (0.7 - 0.5));
    EXPECT_NEAR(attack_rate(with_rate(a), 0.7), 4.0 * std::exp(8.0 * 0.7) / (den * den), 1e-14);
}

TEST(AttackRate, Errors) {
    EXPECT_THROW(attack_rate(with_rate(PlaRate{2, 1}), 1.5), ConfigError);
    EXPECT_THROW(attack_rate(scenario_row(4), 0.5), ConfigError);
    EXPECT_THROW(with_rate(PlaRate{-1, 1}).validate(), ConfigError);
    EXPECT_THROW(with_rate(DamRate{1.2, 3, 4}).validate(), ConfigError);
    AttackScenario s = scenario_row(4);
    s.sampler = Sampler::npp;
    EXPECT_THROW(s.validate(), ConfigError);
}

TEST(AttackRate, MaxBoundsTheRate) {
    for (int row : {0, 1, 2, 3}) {
        auto s = scenario_row(row);
        const double m = attack_rate_max(s);
        for (int k = 0; k <= 10000; ++k) EXPECT_LE(attack_rate(s, k / 10000.0), m);
    }
}

TEST(IpCount, Examples) {
    AttackScenario s = scenario_row(0);
    s.ip = PlaIp{2.0, 1.0};
    EXPECT_EQ(ip_count(s, 1.0), 1u);
    EXPECT_EQ(ip_count(s, 0.1), 1u);  // clamped to >= 1

    s.ip = AsaIp{7.0, 5.0, 0.5};
    EXPECT_NEAR(ip_control(s, 1e3), 7.0, 1e-12);
    EXPECT_EQ(ip_count(s, 1.0), 6u);

    DeaIp d{2.0, 3.0, 1.0, 2.0, 0.6};
    s.ip = d;
    const double t = std::nextafter(0.6, 0.0);
    EXPECT_DOUBLE_EQ(ip_control(s, t), 2.0 + 3.0 * t);
    EXPECT_DOUBLE_EQ(ip_control(s, 0.3), 2.0 + 0.9);
}

TEST(IpCount, DamVerbatimAndFlag) {
    AttackScenario s = scenario_row(3);
    DamIp p;
    s.ip = p;
    const double at0 = ip_control(s, 0.0);
    EXPECT_NEAR(at0, p.n_base + (p.n_max - p.n_base) * p.alpha * std::exp(p.beta), 1e-12);
    p.time_dependent_burst = true;
    s.ip = p;
    EXPECT_NEAR(ip_control(s, 0.0), p.n_base + (p.n_max - p.n_base) * p.alpha, 1e-12);
}

TEST(Samplers, ZeroRateIsEmpty) {
    Rng rng(1);
    auto zero = [](double) { return 0.0; };
    EXPECT_TRUE(sample_npp(0, 1, zero, 1.0, rng).empty());
    EXPECT_TRUE(sample_nd(0, 1, zero, 1.0, rng).empty());
    EXPECT_TRUE(sample_npp(1, 1, zero, 1.0, rng).empty());
    EXPECT_THROW(sample_npp(0, 1, zero, 0.0, rng), ConfigError);
}

TEST(Samplers, ConstantRateNppCount) {
    auto one = [](double) { return 1.0; };
    double total = 0.0;
    for (std::uint64_t s = 0; s < 100; ++s) {
        Rng rng(s);
        total += static_cast<double>(sample_npp(0, 1, one, 1.0, rng).size());
    }
    EXPECT_LE(std::abs(total - 51200.0), 4.0 * std::sqrt(51200.0));
}

TEST(Samplers, ConstantRateNdCount) {
    // folded normal with sigma = mu / 2 has mean ~ mu, so ~512 per unit time
    auto one = [](double) { return 1.0; };
    double total = 0.0;
    for (std::uint64_t s = 0; s < 100; ++s) {
        Rng rng(1000 + s);
        total += static_cast<double>(sample_nd(0, 1, one, 1.0, rng).size());
    }
    EXPECT_LE(std::abs(total - 51200.0), 4.0 * std::sqrt(51200.0));
}

TEST(Samplers, ShiftedRange) {
    Rng rng(2);
    auto one = [](double) { return 1.0; };
    for (double t : sample_nd(5, 6, one, 1.0, rng)) {
        EXPECT_GT(t, 5.0);
        EXPECT_LE(t, 6.0);
    }
    auto v = sample_npp(5, 6, one, 1.0, rng);
    EXPECT_TRUE(std::is_sorted(v.begin(), v.end()));
}

TEST(Samplers, QuartileProportionality) {
    for (Sampler sampler : {Sampler::npp, Sampler::nd}) {
        for (int strategy = 0; strategy < 4; ++strategy) {
            auto r = checks::sampler_quartiles(checks::strategy_scenario(strategy, sampler), 200, 77);
            EXPECT_GT(r.chi.p_value, 0.01) << "strategy " << strategy;
        }
    }
    EXPECT_GT(checks::sampler_quartiles(scenario_row(4), 200, 77).chi.p_value, 0.01);
}

TEST(Samplers, PlaQuartileShares) {
    auto sh = checks::quartile_shares([](double t) { return 2.0 * t; });
    for (int q = 0; q < 4; ++q) EXPECT_NEAR(sh[q], (2 * q + 1) / 16.0, 1e-12);
}

TEST(Drp, ConstantsAndDeterminism) {
    EXPECT_EQ(DrpIntensity::kAlpha1, 3.0);
    EXPECT_EQ(DrpIntensity::kAlpha2, 4.0);
    Rng a(9), b(9);
    auto x = sample_drp(0, 1, a);
    auto y = sample_drp(0, 1, b);
    EXPECT_EQ(x.times, y.times);
    EXPECT_EQ(x.intensity.w, y.intensity.w);
    EXPECT_LT(x.intensity.w[0], 0.33);
    EXPECT_GE(x.intensity.w[2], 0.66);
    for (int k = 0; k <= 1000; ++k) EXPECT_LE(x.intensity(k / 1000.0), x.intensity.g_max);
}

TEST(Drp, LargerExponentialShareRaisesLateDensity) {
    // split seeds by the last segment's weight: smaller w means larger (1 - w)
    double low_w = 0.0, high_w = 0.0;
    int n_low = 0, n_high = 0;
    for (std::uint64_t s = 0; s < 200; ++s) {
        Rng rng(5000 + s);
        auto out = sample_drp(0, 1, rng);
        // raw (un-normalized) late density: events per unit time times g_max / 512
        double late = 0.0;
        for (double t : out.times) late += t >= 2.0 / 3.0;
        late *= out.intensity.g_max / kCandidateRate * 3.0;
        if (out.intensity.w[2] < 0.83) {
            low_w += late;
            ++n_low;
        } else {
            high_w += late;
            ++n_high;
        }
    }
    EXPECT_GT(low_w / n_low, high_w / n_high);
}

TEST(Benign, DeterministicAscendingValid) {
    auto sched = BenignSchedule::defaults(6);
    auto a = gen_normal_window(sched, 11);
    auto b = gen_normal_window(sched, 11);
    ASSERT_EQ(a.messages.size(), kWindowSize);
    EXPECT_NO_THROW(a.validate(6));
    for (std::size_t k = 0; k < kWindowSize; ++k) {
        EXPECT_EQ(a.messages[k].fields(), b.messages[k].fields());
    }
    EXPECT_EQ(a.label, Label::normal);
    EXPECT_THROW(gen_normal_window(BenignSchedule::defaults(1), 1), ConfigError);
}

TEST(Benign, CountsProportionalToRates) {
    auto sched = BenignSchedule::defaults(4);
    std::array<double, 4> counts{};
    for (std::uint64_t s = 0; s < 100; ++s) {
        for (const auto& m : gen_normal_window(sched, s).messages) counts[m.src_ip_index] += 1.0;
    }
    const double total_rate = 100.0 * (1 + 0.5 + 1.0 / 3 + 0.25);
    for (int e = 0; e < 4; ++e) {
        const double expect = 12800.0 * sched.rates_hz[e] / total_rate;
        EXPECT_LE(std::abs(counts[e] - expect), 4.0 * std::sqrt(expect)) << "ecu " << e;
    }
}

TEST(Message, FieldRoundtripAndRanges) {
    auto w = gen_normal_window(BenignSchedule::defaults(3), 4);
    for (const auto& m : w.messages) EXPECT_EQ(Message::from_fields(m.fields()).fields(), m.fields());
    auto f = w.messages[0].fields();
    f[0] = 70000;
    EXPECT_THROW(Message::from_fields(f), DataError);
    f = w.messages[0].fields();
    f[10] = -1;
    EXPECT_THROW(Message::from_fields(f), DataError);
}

TEST(Inject, ZeroRateReturnsInputFlagged) {
    auto w = gen_normal_window(BenignSchedule::defaults(4), 3);
    auto s = with_rate(PlaRate{0.0, 1.0});
    s.seed = 5;
    auto out = inject_attack(w, 4, s);
    EXPECT_TRUE(out.no_injection);
    EXPECT_EQ(out.window.label, Label::normal);
    for (std::size_t k = 0; k < kWindowSize; ++k) EXPECT_EQ(out.window.messages[k].fields(), w.messages[k].fields());
}

TEST(Inject, InjectedMessagesAreValid) {
    for (int row = 0; row < kScenarioCount; ++row) {
        Rng rng(row);
        auto block = gen_normal_block(BenignSchedule::defaults(6), 384, rng);
        auto merged = inject_into_block(block, 6, scenario_row(row), rng);
        EXPECT_EQ(merged.messages.size(), 384 + merged.injected_count);
        for (std::size_t k = 0; k < merged.messages.size(); ++k) {
            EXPECT_TRUE(merged.messages[k].valid(6));
            if (k) EXPECT_LE(merged.messages[k - 1].timestamp, merged.messages[k].timestamp);
        }
        for (const auto& w : frame_windows(merged, row)) EXPECT_NO_THROW(w.validate(6));
    }
}

TEST(Inject, PlaLateQuarterDenser) {
    double first = 0.0, last = 0.0;
    for (std::uint64_t s = 0; s < 100; ++s) {
        Rng rng(s);
        auto block = gen_normal_block(BenignSchedule::defaults(6), 384, rng);
        const double t0 = block.front().timestamp, span = block.back().timestamp - t0;
        auto merged = inject_into_block(block, 6, scenario_row(0), rng);
        for (std::size_t k = 0; k < merged.messages.size(); ++k) {
            if (!merged.injected[k]) continue;
            const double u = (merged.messages[k].timestamp - t0) / span;
            first += u < 0.25;
            last += u >= 0.75;
        }
    }
    EXPECT_GT(last, first);
}

TEST(Inject, FramingLabelsFollowFlags) {
    Rng rng(3);
    auto block = gen_normal_block(BenignSchedule::defaults(6), 384, rng);
    auto merged = inject_into_block(block, 6, scenario_row(2), rng);
    auto frames = frame_windows(merged, 2);
    EXPECT_EQ(frames.size(), merged.messages.size() / kWindowSize);
    for (std::size_t f = 0; f < frames.size(); ++f) {
        bool any = false;
        for (std::size_t k = 0; k < kWindowSize; ++k) any = any || merged.injected[f * kWindowSize + k];
        EXPECT_EQ(frames[f].label == Label::attack, any);
        EXPECT_EQ(frames[f].scenario_id, 2);
    }
}

TEST(Inject, SourceWithinControlledPool) {
    AttackScenario s = scenario_row(0);
    s.ip = PlaIp{0.0, 1.0};  // one controlled IP throughout
    Rng rng(8);
    auto block = gen_normal_block(BenignSchedule::defaults(6), 384, rng);
    auto merged = inject_into_block(block, 6, s, rng);
    ASSERT_GT(merged.injected_count, 0u);
    for (std::size_t k = 0; k < merged.messages.size(); ++k) {
        if (merged.injected[k]) EXPECT_EQ(merged.messages[k].src_ip_index, 0);
    }
}

TEST(WindowEvents, RelativeTimes) {
    auto w = gen_normal_window(BenignSchedule::defaults(3), 6);
    auto ev = window_events(w, 3);
    EXPECT_EQ(ev.total_count(), kWindowSize);
    EXPECT_NEAR(ev.t_span(), w.messages.back().timestamp - w.messages.front().timestamp, 1e-12);
    EXPECT_THROW(window_events(w, 2), DataError);
}

TEST(Scenarios, TableRows) {
    const char* rate[] = {"PLA", "DEA", "ASA", "DAM", "/", "PLA", "DEA", "ASA", "DAM"};
    const char* ip[] = {"PLA", "DEA", "ASA", "DAM", "DAM", "PLA", "DEA", "ASA", "DAM"};
    const char* smp[] = {"NPP", "NPP", "NPP", "NPP", "DRP", "ND", "ND", "ND", "ND"};
    for (int id = 0; id < kScenarioCount; ++id) {
        auto s = scenario_row(id);
        EXPECT_EQ(s.rate_name(), rate[id]);
        EXPECT_EQ(s.ip_name(), ip[id]);
        EXPECT_EQ(s.sampler_name(), smp[id]);
        EXPECT_NO_THROW(s.validate());
    }
    EXPECT_THROW(scenario_row(9), ConfigError);
}

TEST(Dataset, SplitArithmeticAndDeterminism) {
    DatasetConfig cfg;
    cfg.scenarios = {0};
    cfg.count = 100;
    const auto dir = std::filesystem::temp_directory_path() / "mdhp_ds_test";
    std::filesystem::remove_all(dir);
    auto ds = build_dataset(cfg, (dir / "a").string());
    ASSERT_EQ(ds.train.size(), 80u);
    ASSERT_EQ(ds.val.size(), 20u);
    for (auto* split : {&ds.train, &ds.val}) {
        std::size_t attacks = 0;
        for (const auto& r : *split) {
            attacks += r.window.label == Label::attack;
            EXPECT_NO_THROW(r.window.validate(cfg.dims));
        }
        EXPECT_EQ(attacks * 2, split->size());
    }
    cfg.workers = 3;
    build_dataset(cfg, (dir / "b").string());
    for (const char* f : {"train.jsonl", "val.jsonl", "manifest.json"}) {
        EXPECT_EQ(slurp((dir / "a" / f).string()), slurp((dir / "b" / f).string())) << f;
    }
    auto back = read_dataset((dir / "a").string());
    ASSERT_EQ(back.train.size(), 80u);
    EXPECT_EQ(back.train[0].window_id, ds.train[0].window_id);
    EXPECT_EQ(back.train[0].window.messages[5].fields(), ds.train[0].window.messages[5].fields());

    auto manifest = nlohmann::json::parse(slurp((dir / "a" / "manifest.json").string()));
    const auto& row = manifest.at("scenarios").at(0);
    EXPECT_EQ(row.at("ID"), "00");
    EXPECT_EQ(row.at("Train"), 80);
    EXPECT_EQ(row.at("Val"), 20);
    EXPECT_EQ(row.at("Attk Rate"), "PLA");
    EXPECT_EQ(row.at("IP Ctrl"), "PLA");
    EXPECT_EQ(row.at("Sample"), "NPP");
    std::filesystem::remove_all(dir);
}

TEST(Dataset, Errors) {
    DatasetConfig cfg;
    cfg.dims = 1;
    EXPECT_THROW(generate_dataset(cfg), ConfigError);
    cfg = {};
    cfg.scenarios = {12};
    EXPECT_THROW(generate_dataset(cfg), ConfigError);
    EXPECT_THROW(read_split("/nonexistent/x.jsonl"), IoError);
    EXPECT_THROW(record_from_json_line("{\"split\":\"train\"}"), DataError);
    EXPECT_THROW(write_dataset("/proc/forbidden/x", Dataset{}, DatasetConfig{}), IoError);
}
