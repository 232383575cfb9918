#include <gtest/gtest.h>

#include <filesystem>

#include "dada/eval.hpp"
#include "dada/io.hpp"
#include "dada/sim.hpp"
#include "dada/sweep.hpp"

using namespace dada;

namespace {

SimConfig toy_config() {
    SimConfig c;
    c.signal = {.sensors = 4, .days = 16, .readings_per_day = 24, .noise_std = 0.04, .seed = 11};
    c.anomalies = {.kind = AnomalyKind::Mixed, .rate_per_day = 3, .magnitude_mean = 0.3, .magnitude_var = 0.01,
                   .burst_min = 2, .burst_max = 6, .seed = 12};
    c.shape = {24, 8};
    c.training = {.epochs = 150, .seed = 13, .halve_on_increase = true};
    c.policy = {.d_u = 4};
    c.bootstrap_days = 4;
    c.seed = 14;
    return c;
}

void expect_same(const SimResult& a, const SimResult& b) {
    EXPECT_EQ(a.reading, b.reading);
    EXPECT_EQ(a.reconstruction, b.reconstruction);
    EXPECT_EQ(a.residual, b.residual);
    EXPECT_EQ(a.flag, b.flag);
    EXPECT_EQ(a.label, b.label);
    EXPECT_EQ(a.score, b.score);
    EXPECT_EQ(a.comms, b.comms);
    EXPECT_EQ(a.retrains, b.retrains);
    EXPECT_EQ(a.events, b.events);
    EXPECT_EQ(a.alerts_per_sensor, b.alerts_per_sensor);
    EXPECT_EQ(a.inference_macs, b.inference_macs);
    EXPECT_EQ(a.initial_params, b.initial_params);
    ASSERT_EQ(a.update_params.size(), b.update_params.size());
    for (std::size_t i = 0; i < a.update_params.size(); ++i) EXPECT_EQ(a.update_params[i], b.update_params[i]);
}

}  // namespace

TEST(Simulation, IdenticalConfigsGiveIdenticalResults) {
    const auto c = toy_config();
    expect_same(run_simulation(c), run_simulation(c));
}

TEST(Simulation, SeedChangesResults) {
    auto c = toy_config();
    const auto a = run_simulation(c);
    c.signal.seed += 1;
    EXPECT_NE(a.reading, run_simulation(c).reading);
}

TEST(Simulation, OneDayWithUnitPeriodRetrainsOnce) {
    auto c = toy_config();
    c.signal.days = c.bootstrap_days + 1;
    c.policy.d_u = 1;
    const auto r = run_simulation(c);
    ASSERT_EQ(r.retrains.size(), 1u);
    EXPECT_EQ(r.retrains[0].day, c.bootstrap_days + 1);
}

TEST(Simulation, RetrainsOnlyOnMultiplesOfPeriod) {
    auto c = toy_config();
    c.signal.days = 30;
    c.policy.d_u = 3;
    const auto r = run_simulation(c);
    std::vector<int> days;
    for (const auto& ev : r.retrains) days.push_back(ev.day);
    std::vector<int> want;
    for (int d = c.bootstrap_days + 1; d <= 30; ++d)
        if (d % 3 == 0) want.push_back(d);
    EXPECT_EQ(days, want);
}

TEST(Simulation, CommunicationCounts) {
    auto c = toy_config();
    c.bootstrap_days = 4;
    c.signal.days = 4 + 28;
    c.policy.d_u = 14;
    const auto r = run_simulation(c);
    const auto rep = communication_report(r);
    for (auto n : rep.downlink_per_sensor) EXPECT_EQ(n, 2u);
    // batch mode sends no alerts: one upload per sensor per day
    for (auto n : rep.uplink_per_sensor) EXPECT_EQ(n, 28u);
    EXPECT_EQ(rep.sensor_to_sensor_messages, 0u);
    EXPECT_EQ(rep.sensor_to_sensor_bytes, 0u);
    EXPECT_EQ(rep.uplink_bytes, 4u * 28u * upload_wire_bytes(24));
    EXPECT_DOUBLE_EQ(rep.readings_per_uplink, 24.0);
}

// Oracle: each stored reconstruction equals the forward pass of whichever
// parameter set was in effect that day, so updates only land at day starts.
TEST(Simulation, UpdatesTakeEffectAtDayBoundaries) {
    const auto c = toy_config();
    const auto r = run_simulation(c);
    ASSERT_FALSE(r.retrains.empty());
    for (int e = 0; e < r.eval_days(); ++e) {
        const int day = e + r.bootstrap_days + 1;
        const ModelParams* params = &r.initial_params;
        for (std::size_t i = 0; i < r.retrains.size(); ++i)
            if (r.retrains[i].effective_day <= day) params = &r.update_params[i];
        for (int s = 0; s < r.sensors; ++s) {
            Vector x(24);
            for (int m = 0; m < 24; ++m) x(m) = r.reading[r.index(s, e, m)];
            const auto xh = forward(*params, x).output;
            for (int m = 0; m < 24; ++m) ASSERT_EQ(r.reconstruction[r.index(s, e, m)], xh(m)) << "day " << day;
        }
    }
}

TEST(Simulation, FlagsAgreeWithScores) {
    const auto c = toy_config();
    const auto r = run_simulation(c);
    for (std::size_t i = 0; i < r.flag.size(); ++i) ASSERT_EQ(r.flag[i] != 0, exceeds(r.score[i], c.threshold));
}

TEST(Simulation, PerReadingModeUploadsTheSameFlags) {
    auto c = toy_config();
    const auto batch = run_simulation(c);
    c.mode = DetectionMode::PerReading;
    const auto live = run_simulation(c);
    EXPECT_EQ(batch.flag, live.flag);
    EXPECT_EQ(batch.reconstruction, live.reconstruction);
    std::uint64_t alerts = 0;
    for (auto a : live.alerts_per_sensor) alerts += a;
    std::uint64_t alert_msgs = 0;
    for (const auto& d : live.comms) alert_msgs += d.alert_messages;
    EXPECT_EQ(alerts, alert_msgs);
    EXPECT_GT(live.inference_macs, batch.inference_macs);
}

TEST(Simulation, LossyTransportStillCompletes) {
    auto c = toy_config();
    c.drop_probability = 0.3;
    const auto r = run_simulation(c);
    std::uint64_t dropped = 0;
    for (const auto& d : r.comms) dropped += d.dropped_uploads;
    EXPECT_GT(dropped, 0u);
    EXPECT_FALSE(r.retrains.empty());
}

TEST(Simulation, RejectsInvalidConfig) {
    auto c = toy_config();
    c.bootstrap_days = c.signal.days;
    EXPECT_THROW(run_simulation(c), ContractViolation);
    c = toy_config();
    c.shape.input_dim = 12;
    EXPECT_THROW(run_simulation(c), ContractViolation);
}

TEST(Simulation, ResultDirectoryReplaysMetrics) {
    const auto c = toy_config();
    const auto r = run_simulation(c);
    const auto dir = std::filesystem::temp_directory_path() / "dada_test_simdir";
    std::filesystem::remove_all(dir);
    io::write_sim_result(dir, r);
    EXPECT_TRUE(io::missing_artifacts(dir).empty());
    const auto back = io::read_sim_result(dir);
    EXPECT_EQ(back.reading, r.reading);
    EXPECT_EQ(back.score, r.score);
    EXPECT_EQ(back.flag, r.flag);
    EXPECT_EQ(back.comms, r.comms);
    EXPECT_EQ(back.retrains, r.retrains);
    const auto m1 = measure(r, c.threshold);
    const auto m2 = measure(back, c.threshold);
    EXPECT_EQ(m1.auc, m2.auc);
    EXPECT_EQ(m1.tpr, m2.tpr);
    EXPECT_EQ(m1.fpr, m2.fpr);
    EXPECT_EQ(io::load_params(dir / "models" / "bootstrap.bin"), r.initial_params);
    std::filesystem::remove(dir / "flags.csv");
    EXPECT_EQ(io::missing_artifacts(dir), std::vector<std::string>{"flags.csv"});
    std::filesystem::remove_all(dir);
}
