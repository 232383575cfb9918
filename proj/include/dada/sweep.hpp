#pragma once

// Parameter sweeps over whole simulations: AUC heat map over anomaly
// magnitude, AUC versus anomaly frequency, and the retraining-scheme
// comparison under drift. Cells run on a small thread pool; each cell is a
// single-threaded deterministic simulation.

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <filesystem>
#include <functional>
#include <limits>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "dada/config.hpp"
#include "dada/eval.hpp"
#include "dada/io.hpp"
#include "dada/sim.hpp"

namespace dada {

namespace fs = std::filesystem;

struct CellMetrics {
    double auc = std::numeric_limits<double>::quiet_NaN();  // NaN when a class is missing
    double tpr = std::numeric_limits<double>::quiet_NaN();
    double fpr = std::numeric_limits<double>::quiet_NaN();
    double flagged_fraction = 0.0;
    std::uint64_t positives = 0;
    std::uint64_t negatives = 0;
    std::uint64_t sensor_to_sensor_messages = 0;
    double wall_ms = 0.0;  // not part of any output file
};

inline CellMetrics measure(const SimResult& r, const DetectionThreshold& threshold) {
    CellMetrics m;
    for (auto l : r.label) (l ? m.positives : m.negatives) += 1;
    m.flagged_fraction = r.flagged_fraction();
    for (const auto& c : r.comms) m.sensor_to_sensor_messages += c.sensor_to_sensor_messages;
    if (m.positives > 0 && m.negatives > 0) {
        const auto pts = scored_points(r);
        m.auc = auc(pts);
        const auto rates = tpr_fpr_at(pts, threshold);
        m.tpr = rates.tpr;
        m.fpr = rates.fpr;
    }
    return m;
}

namespace detail {

inline nlohmann::json num_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }
inline double num_or_nan(const nlohmann::json& j) {
    return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

inline nlohmann::json metrics_json(const CellMetrics& m) {
    return {{"auc", num_or_null(m.auc)},
            {"tpr", num_or_null(m.tpr)},
            {"fpr", num_or_null(m.fpr)},
            {"flagged_fraction", m.flagged_fraction},
            {"positives", m.positives},
            {"negatives", m.negatives},
            {"sensor_to_sensor_messages", m.sensor_to_sensor_messages}};
}

inline CellMetrics metrics_from_json(const nlohmann::json& j) {
    CellMetrics m;
    m.auc = num_or_nan(j.at("auc"));
    m.tpr = num_or_nan(j.at("tpr"));
    m.fpr = num_or_nan(j.at("fpr"));
    m.flagged_fraction = j.at("flagged_fraction").get<double>();
    m.positives = j.at("positives").get<std::uint64_t>();
    m.negatives = j.at("negatives").get<std::uint64_t>();
    m.sensor_to_sensor_messages = j.at("sensor_to_sensor_messages").get<std::uint64_t>();
    return m;
}

inline double median(std::vector<double> v) {
    std::erase_if(v, [](double x) { return std::isnan(x); });
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(v.begin(), v.end());
    const auto n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace detail

/// Where and how cells run. With a cache directory, each finished cell is
/// stored as cells/<name>.json and reused on the next run when its config
/// echo matches, so an interrupted sweep resumes where it stopped.
struct SweepOptions {
    int jobs = 1;
    fs::path cache_dir;
    std::function<void(const std::string&)> progress;  // called after each fresh cell
};

struct SweepCell {
    std::string name;
    SimConfig config;
};

/// Runs every cell and returns metrics in cell order regardless of `jobs`.
inline std::vector<CellMetrics> run_cells(const std::vector<SweepCell>& cells, const SweepOptions& options) {
    require(options.jobs >= 1, "run_cells: jobs must be >= 1");
    std::vector<CellMetrics> out(cells.size());
    if (!options.cache_dir.empty()) fs::create_directories(options.cache_dir / "cells");

    std::atomic<std::size_t> next{0};
    std::mutex mu;
    std::exception_ptr failure;
    std::size_t failed_at = cells.size();

    auto worker = [&] {
        for (;;) {
            const auto i = next.fetch_add(1);
            if (i >= cells.size()) return;
            {
                std::lock_guard lock(mu);
                if (failure) return;
            }
            const auto& cell = cells[i];
            try {
                const auto echo = to_json(cell.config);
                fs::path cache;
                if (!options.cache_dir.empty()) {
                    cache = options.cache_dir / "cells" / (cell.name + ".json");
                    if (fs::exists(cache)) {
                        const auto j = io::read_json(cache);
                        if (j.value("config", nlohmann::json()) == echo) {
                            out[i] = detail::metrics_from_json(j.at("metrics"));
                            continue;
                        }
                    }
                }
                const auto t0 = std::chrono::steady_clock::now();
                const auto result = run_simulation(cell.config);
                out[i] = measure(result, cell.config.threshold);
                out[i].wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
                if (!cache.empty())
                    io::write_atomic(cache, nlohmann::json{{"name", cell.name},
                                                           {"config", echo},
                                                           {"metrics", detail::metrics_json(out[i])}}
                                                    .dump(1) +
                                                "\n");
                if (options.progress) {
                    std::lock_guard lock(mu);
                    options.progress(cell.name);
                }
            } catch (...) {
                std::lock_guard lock(mu);
                if (i < failed_at) {
                    failed_at = i;
                    failure = std::current_exception();
                }
                return;
            }
        }
    };

    const auto n = std::min<std::size_t>(static_cast<std::size_t>(options.jobs), std::max<std::size_t>(cells.size(), 1));
    if (n == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t t = 0; t < n; ++t) pool.emplace_back(worker);
    }
    if (failure) std::rethrow_exception(failure);
    return out;
}

// ---------------------------------------------------------------------------
// heat map

struct HeatmapResult {
    std::vector<double> mu_v;
    std::vector<double> var_v;
    std::vector<std::vector<CellMetrics>> cells;  // [mu index][var index]
};

/// +mu and -mu cells with the same variance share their seeds, so the two
/// runs see the same data, positions and unit magnitude draws.
inline std::vector<SweepCell> heatmap_cells(const SimConfig& base, const HeatmapGrid& grid) {
    require(!grid.mu_v.empty() && !grid.var_v.empty(), "sweep_heatmap: empty grid");
    std::vector<SweepCell> cells;
    for (std::size_t i = 0; i < grid.mu_v.size(); ++i)
        for (std::size_t j = 0; j < grid.var_v.size(); ++j) {
            const double mu = grid.mu_v[i], var = grid.var_v[j];
            require(std::isfinite(mu) && std::isfinite(var) && var >= 0.0, "sweep_heatmap: invalid grid value");
            SweepCell c{"heatmap_" + std::to_string(i) + "_" + std::to_string(j), base};
            c.config.anomalies.magnitude_mean = mu;
            c.config.anomalies.magnitude_var = var;
            apply_seed_override(c.config, derive_seed(base.seed, "heatmap|mu|=" + io::format_double(std::fabs(mu)) +
                                                                     ",var=" + io::format_double(var)));
            cells.push_back(std::move(c));
        }
    return cells;
}

inline HeatmapResult sweep_heatmap(const SimConfig& base, const HeatmapGrid& grid, const SweepOptions& options = {}) {
    const auto metrics = run_cells(heatmap_cells(base, grid), options);
    HeatmapResult r{grid.mu_v, grid.var_v, {}};
    for (std::size_t i = 0; i < grid.mu_v.size(); ++i)
        r.cells.emplace_back(metrics.begin() + static_cast<std::ptrdiff_t>(i * grid.var_v.size()),
                             metrics.begin() + static_cast<std::ptrdiff_t>((i + 1) * grid.var_v.size()));
    return r;
}

// ---------------------------------------------------------------------------
// frequency

struct FrequencyResult {
    std::vector<int> k;  // K=0 entries are dropped: no positives, no ROC
    std::vector<CellMetrics> cells;
};

inline std::vector<SweepCell> frequency_cells(const SimConfig& base, const std::vector<int>& k_grid) {
    std::vector<SweepCell> cells;
    for (int k : k_grid) {
        require(k >= 0, "sweep_frequency: K must be >= 0");
        if (k == 0) continue;
        SweepCell c{"frequency_k" + std::to_string(k), base};
        c.config.anomalies.rate_per_day = k;
        apply_seed_override(c.config, derive_seed(base.seed, "frequency|k=" + std::to_string(k)));
        cells.push_back(std::move(c));
    }
    require(!cells.empty(), "sweep_frequency: grid has no K > 0");
    return cells;
}

inline FrequencyResult sweep_frequency(const SimConfig& base, const std::vector<int>& k_grid,
                                       const SweepOptions& options = {}) {
    const auto cells = frequency_cells(base, k_grid);
    FrequencyResult r;
    for (const auto& c : cells) r.k.push_back(c.config.anomalies.rate_per_day);
    r.cells = run_cells(cells, options);
    return r;
}

// ---------------------------------------------------------------------------
// adaptivity

struct AdaptivityRow {
    int k = 0;
    std::uint64_t seed = 0;
    RetrainScheme scheme = RetrainScheme::Random;
    CellMetrics metrics;
};

struct SchemeMedians {
    int k = 0;
    RetrainScheme scheme = RetrainScheme::Random;
    double tpr = 0.0;
    double fpr = 0.0;
    double auc = 0.0;
};

struct AdaptivityResult {
    std::vector<AdaptivityRow> rows;  // k-major, then seed, then scheme
    std::vector<SchemeMedians> medians;

    const SchemeMedians& median(int k, RetrainScheme scheme) const {
        for (const auto& m : medians)
            if (m.k == k && m.scheme == scheme) return m;
        throw ContractViolation("AdaptivityResult: no medians for K=" + std::to_string(k));
    }
};

/// Both schemes see identical datasets: the run seed fixes data and
/// training seeds, only the policy differs. Positives follow v > mu_v.
inline std::vector<SweepCell> adaptivity_cells(const SimConfig& base, const std::vector<int>& k_grid,
                                               const std::vector<std::uint64_t>& seeds) {
    require(!k_grid.empty() && !seeds.empty(), "sweep_adaptivity: empty grid");
    std::vector<SweepCell> cells;
    for (int k : k_grid) {
        require(k >= 1, "sweep_adaptivity: K must be >= 1");
        for (auto seed : seeds)
            for (auto scheme : {RetrainScheme::Random, RetrainScheme::Prioritized}) {
                SweepCell c{"adaptivity_k" + std::to_string(k) + "_s" + std::to_string(seed) + "_" + to_string(scheme),
                            base};
                c.config.anomalies.rate_per_day = k;
                c.config.anomalies.label_rule = LabelRule::AboveMean;
                c.config.policy.scheme = scheme;
                apply_seed_override(c.config, seed);
                cells.push_back(std::move(c));
            }
    }
    return cells;
}

inline AdaptivityResult sweep_adaptivity(const SimConfig& base, const std::vector<int>& k_grid,
                                         const std::vector<std::uint64_t>& seeds, const SweepOptions& options = {}) {
    const auto cells = adaptivity_cells(base, k_grid, seeds);
    const auto metrics = run_cells(cells, options);
    AdaptivityResult r;
    std::size_t i = 0;
    for (int k : k_grid)
        for (auto seed : seeds)
            for (auto scheme : {RetrainScheme::Random, RetrainScheme::Prioritized})
                r.rows.push_back({k, seed, scheme, metrics[i++]});
    for (int k : k_grid)
        for (auto scheme : {RetrainScheme::Random, RetrainScheme::Prioritized}) {
            std::vector<double> tpr, fpr, a;
            for (const auto& row : r.rows)
                if (row.k == k && row.scheme == scheme) {
                    tpr.push_back(row.metrics.tpr);
                    fpr.push_back(row.metrics.fpr);
                    a.push_back(row.metrics.auc);
                }
            r.medians.push_back({k, scheme, detail::median(tpr), detail::median(fpr), detail::median(a)});
        }
    return r;
}

// ---------------------------------------------------------------------------
// output files

namespace io {

inline std::string num_cell(double v) { return std::isnan(v) ? "" : format_double(v); }

/// mu_v rows, sigma_v^2 columns, AUC values.
inline std::string heatmap_csv(const HeatmapResult& r) {
    std::string s = "mu_v";
    for (double v : r.var_v) s += ",var_" + format_double(v);
    s += '\n';
    for (std::size_t i = 0; i < r.mu_v.size(); ++i) {
        s += format_double(r.mu_v[i]);
        for (const auto& c : r.cells[i]) s += "," + num_cell(c.auc);
        s += '\n';
    }
    return s;
}

inline std::string frequency_csv(const FrequencyResult& r) {
    std::string s = "k,auc,tpr,fpr,positives,negatives\n";
    for (std::size_t i = 0; i < r.k.size(); ++i) {
        const auto& c = r.cells[i];
        s += std::to_string(r.k[i]) + "," + num_cell(c.auc) + "," + num_cell(c.tpr) + "," + num_cell(c.fpr) + "," +
             std::to_string(c.positives) + "," + std::to_string(c.negatives) + "\n";
    }
    return s;
}

inline std::string adaptivity_csv(const AdaptivityResult& r) {
    std::string s = "k,seed,scheme,tpr,fpr,auc,positives,negatives\n";
    for (const auto& row : r.rows) {
        const auto& c = row.metrics;
        s += std::to_string(row.k) + "," + std::to_string(row.seed) + "," + to_string(row.scheme) + "," +
             num_cell(c.tpr) + "," + num_cell(c.fpr) + "," + num_cell(c.auc) + "," + std::to_string(c.positives) + "," +
             std::to_string(c.negatives) + "\n";
    }
    return s;
}

inline nlohmann::json summary_json(const HeatmapResult& r) {
    nlohmann::json cells = nlohmann::json::array();
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (std::size_t i = 0; i < r.mu_v.size(); ++i)
        for (std::size_t j = 0; j < r.var_v.size(); ++j) {
            const auto& c = r.cells[i][j];
            if (!std::isnan(c.auc)) lo = std::min(lo, c.auc), hi = std::max(hi, c.auc);
            auto m = ::dada::detail::metrics_json(c);
            m["mu_v"] = r.mu_v[i];
            m["var_v"] = r.var_v[j];
            cells.push_back(m);
        }
    return {{"kind", "heatmap"}, {"cells", cells}, {"auc_min", ::dada::detail::num_or_null(lo)},
            {"auc_max", ::dada::detail::num_or_null(hi)}};
}

inline nlohmann::json summary_json(const FrequencyResult& r) {
    nlohmann::json cells = nlohmann::json::array();
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (std::size_t i = 0; i < r.k.size(); ++i) {
        auto m = ::dada::detail::metrics_json(r.cells[i]);
        m["k"] = r.k[i];
        cells.push_back(m);
        if (!std::isnan(r.cells[i].auc)) lo = std::min(lo, r.cells[i].auc), hi = std::max(hi, r.cells[i].auc);
    }
    return {{"kind", "frequency"},
            {"cells", cells},
            {"auc_min", ::dada::detail::num_or_null(lo)},
            {"auc_max", ::dada::detail::num_or_null(hi)},
            {"auc_spread", ::dada::detail::num_or_null(hi - lo)}};
}

inline nlohmann::json summary_json(const AdaptivityResult& r) {
    nlohmann::json medians = nlohmann::json::array();
    for (const auto& m : r.medians)
        medians.push_back({{"k", m.k},
                           {"scheme", to_string(m.scheme)},
                           {"median_tpr", ::dada::detail::num_or_null(m.tpr)},
                           {"median_fpr", ::dada::detail::num_or_null(m.fpr)},
                           {"median_auc", ::dada::detail::num_or_null(m.auc)}});
    return {{"kind", "adaptivity"}, {"rows", r.rows.size()}, {"medians", medians}};
}

}  // namespace io

}  // namespace dada
