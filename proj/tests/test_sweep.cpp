#include <gtest/gtest.h>

#include <atomic>
#include <filesystem>
#include <string>

#include "dada/sweep.hpp"

using namespace dada;

namespace {

SimConfig tiny() {
    SimConfig c;
    c.signal = {.sensors = 3, .days = 9, .readings_per_day = 16, .noise_std = 0.04, .seed = 21};
    c.anomalies = {.kind = AnomalyKind::Mixed, .rate_per_day = 3, .magnitude_mean = 0.2, .magnitude_var = 0.01,
                   .burst_min = 2, .burst_max = 4, .seed = 22};
    c.shape = {16, 5};
    c.training = {.epochs = 60, .seed = 23, .halve_on_increase = true};
    c.policy = {.d_u = 3};
    c.bootstrap_days = 3;
    c.seed = 24;
    return c;
}

}  // namespace

TEST(Sweep, HeatmapShapeAndCsv) {
    const HeatmapGrid grid{{-0.2, 0.05, 0.2}, {0.001, 0.002, 0.005}};
    const auto r = sweep_heatmap(tiny(), grid);
    ASSERT_EQ(r.cells.size(), 3u);
    for (const auto& row : r.cells) EXPECT_EQ(row.size(), 3u);
    const auto csv = io::heatmap_csv(r);
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 4);
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "mu_v,var_0.001,var_0.002,var_0.005");
}

TEST(Sweep, OppositeMagnitudesSharePairedSeeds) {
    const HeatmapGrid grid{{-0.2, 0.2}, {0.002}};
    const auto cells = heatmap_cells(tiny(), grid);
    ASSERT_EQ(cells.size(), 2u);
    EXPECT_EQ(seeds_json(cells[0].config), seeds_json(cells[1].config));
    const auto other = heatmap_cells(tiny(), HeatmapGrid{{0.2}, {0.005}});
    EXPECT_NE(seeds_json(cells[0].config), seeds_json(other[0].config));
}

TEST(Sweep, FrequencyDropsZeroAndSingleCellIsOneRun) {
    const auto r = sweep_frequency(tiny(), {0, 2});
    ASSERT_EQ(r.k, std::vector<int>{2});
    const auto cell = frequency_cells(tiny(), {2}).front();
    const auto direct = measure(run_simulation(cell.config), cell.config.threshold);
    EXPECT_EQ(r.cells[0].auc, direct.auc);
    EXPECT_EQ(r.cells[0].fpr, direct.fpr);
    EXPECT_THROW(sweep_frequency(tiny(), {0}), ContractViolation);
}

TEST(Sweep, SchemesAgreeWhenNoRetrainHappens) {
    auto c = tiny();
    c.policy.d_u = 100;
    const auto r = sweep_adaptivity(c, {3}, {1, 2, 3});
    ASSERT_EQ(r.rows.size(), 6u);
    for (std::size_t i = 0; i < r.rows.size(); i += 2) {
        EXPECT_EQ(r.rows[i].scheme, RetrainScheme::Random);
        EXPECT_EQ(r.rows[i + 1].scheme, RetrainScheme::Prioritized);
        EXPECT_EQ(r.rows[i].metrics.tpr, r.rows[i + 1].metrics.tpr);
        EXPECT_EQ(r.rows[i].metrics.fpr, r.rows[i + 1].metrics.fpr);
        EXPECT_EQ(r.rows[i].metrics.auc, r.rows[i + 1].metrics.auc);
    }
    EXPECT_EQ(r.median(3, RetrainScheme::Random).fpr, r.median(3, RetrainScheme::Prioritized).fpr);
}

TEST(Sweep, AdaptivityRowsPerScheme) {
    const auto r = sweep_adaptivity(tiny(), {3}, {1, 2, 3, 4, 5, 6, 7, 8, 9, 10});
    int random = 0, prioritized = 0;
    for (const auto& row : r.rows) (row.scheme == RetrainScheme::Random ? random : prioritized) += 1;
    EXPECT_EQ(random, 10);
    EXPECT_EQ(prioritized, 10);
    const auto csv = io::adaptivity_csv(r);
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 21);
}

TEST(Sweep, ParallelismDoesNotChangeResults) {
    const HeatmapGrid grid{{-0.2, 0.2}, {0.001, 0.005}};
    SweepOptions opts;
    const auto serial = sweep_heatmap(tiny(), grid, opts);
    opts.jobs = 3;
    const auto parallel = sweep_heatmap(tiny(), grid, opts);
    EXPECT_EQ(io::heatmap_csv(serial), io::heatmap_csv(parallel));
}

TEST(Sweep, CacheResumesCompletedCells) {
    const auto dir = std::filesystem::temp_directory_path() / "dada_test_sweep_cache";
    std::filesystem::remove_all(dir);
    std::atomic<int> fresh{0};
    SweepOptions opts{.jobs = 1, .cache_dir = dir, .progress = [&](const std::string&) { ++fresh; }};
    const auto a = sweep_frequency(tiny(), {2, 4, 6}, opts);
    EXPECT_EQ(fresh.load(), 3);
    std::filesystem::remove(dir / "cells" / "frequency_k4.json");
    fresh = 0;
    const auto b = sweep_frequency(tiny(), {2, 4, 6}, opts);
    EXPECT_EQ(fresh.load(), 1);
    EXPECT_EQ(io::frequency_csv(a), io::frequency_csv(b));

    // a cached cell from a different config is recomputed, not reused
    auto changed = tiny();
    changed.threshold.p = 3.0;
    fresh = 0;
    sweep_frequency(changed, {2, 4, 6}, opts);
    EXPECT_EQ(fresh.load(), 3);
    std::filesystem::remove_all(dir);
}

TEST(Sweep, FirstFailingCellIsReported) {
    const HeatmapGrid grid{{0.2}, {-1.0}};
    EXPECT_THROW(sweep_heatmap(tiny(), grid), ContractViolation);
}
