#pragma once

// File formats: dataset CSV + labels sidecar, model records and the
// simulation result directory. Layouts are described in docs/formats.md.

#include <nlohmann/json.hpp>

#include <charconv>
#include <cstdio>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "dada/autoencoder.hpp"
#include "dada/datagen.hpp"
#include "dada/error.hpp"
#include "dada/sim.hpp"

namespace dada::io {

namespace fs = std::filesystem;

inline constexpr int kResultFormatVersion = 1;

/// Shortest decimal text that parses back to the same double.
inline std::string format_double(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    if (std::isnan(v)) return "nan";
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    if (ec != std::errc{}) throw IoError("cannot format number");
    return {buf, end};
}

inline double parse_double(std::string_view s) {
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) throw IoError("invalid number '" + std::string(s) + "'");
    return v;
}

inline long long parse_int(std::string_view s) {
    long long v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) throw IoError("invalid integer '" + std::string(s) + "'");
    return v;
}

inline std::vector<std::string_view> split_csv(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const auto comma = line.find(',', start);
        out.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

inline std::ofstream open_out(const fs::path& path, std::ios::openmode mode = std::ios::out) {
    std::ofstream os(path, mode | std::ios::trunc);
    if (!os) throw IoError("cannot open " + path.string() + " for writing");
    return os;
}

inline std::ifstream open_in(const fs::path& path, std::ios::openmode mode = std::ios::in) {
    std::ifstream is(path, mode);
    if (!is) throw IoError("cannot open " + path.string());
    return is;
}

/// Writes via a temporary sibling and renames into place.
inline void write_atomic(const fs::path& path, const std::string& content) {
    auto tmp = path;
    tmp += ".tmp";
    {
        auto os = open_out(tmp, std::ios::out | std::ios::binary);
        os << content;
        if (!os) throw IoError("failed writing " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) throw IoError("cannot rename " + tmp.string() + ": " + ec.message());
}

inline nlohmann::json read_json(const fs::path& path) {
    auto is = open_in(path);
    try {
        return nlohmann::json::parse(is);
    } catch (const nlohmann::json::exception& e) {
        throw IoError(path.string() + ": " + e.what());
    }
}

inline std::string slot_header(int m) {
    std::string h = "sensor,day";
    for (int i = 0; i < m; ++i) h += ",m" + std::to_string(i);
    return h;
}

// ---------------------------------------------------------------------------
// dataset CSV + labels sidecar

inline AnomalyKind kind_from_string(std::string_view s) {
    if (s == "spike") return AnomalyKind::Spike;
    if (s == "burst") return AnomalyKind::Burst;
    if (s == "mixed") return AnomalyKind::Mixed;
    throw IoError("unknown anomaly kind '" + std::string(s) + "'");
}

/// One row per (sensor, day) with 1-based sensor and day numbers.
inline void write_dataset_csv(std::ostream& os, const LabeledDataset& ds) {
    os << slot_header(ds.readings_per_day) << '\n';
    for (int s = 0; s < ds.sensors; ++s)
        for (int d = 0; d < ds.days; ++d) {
            os << (s + 1) << ',' << (d + 1);
            for (double v : ds.day(s, d)) os << ',' << format_double(v);
            os << '\n';
        }
}

inline nlohmann::json labels_json(const LabeledDataset& ds) {
    nlohmann::json rows = nlohmann::json::array();
    for (int s = 0; s < ds.sensors; ++s)
        for (int d = 0; d < ds.days; ++d) {
            std::vector<int> slots;
            const auto lab = ds.day_labels(s, d);
            for (std::size_t m = 0; m < lab.size(); ++m)
                if (lab[m]) slots.push_back(static_cast<int>(m));
            if (!slots.empty()) rows.push_back({{"sensor", s + 1}, {"day", d + 1}, {"slots", slots}});
        }
    nlohmann::json injections = nlohmann::json::array();
    for (const auto& inj : ds.injection_log)
        injections.push_back({{"sensor", inj.sensor + 1},
                              {"day", inj.day + 1},
                              {"first_slot", inj.first_slot},
                              {"last_slot", inj.last_slot},
                              {"v", inj.v},
                              {"kind", to_string(inj.kind)},
                              {"labeled", inj.labeled},
                              {"clamp_collision", inj.clamp_collision}});
    return {{"format_version", kResultFormatVersion},
            {"sensors", ds.sensors},
            {"days", ds.days},
            {"readings_per_day", ds.readings_per_day},
            {"labeled_slots", ds.label_count()},
            {"labels", rows},
            {"injections", injections}};
}

inline void write_dataset(const fs::path& dir, const LabeledDataset& ds) {
    fs::create_directories(dir);
    {
        auto os = open_out(dir / "dataset.csv");
        write_dataset_csv(os, ds);
        if (!os) throw IoError("failed writing dataset.csv");
    }
    write_atomic(dir / "labels.json", labels_json(ds).dump(1) + "\n");
}

/// Reads a dataset CSV (values must already be normalized to [0,1]) and an
/// optional labels sidecar.
inline LabeledDataset read_dataset(const fs::path& csv_path, const fs::path& labels_path = {}) {
    auto is = open_in(csv_path);
    std::string line;
    if (!std::getline(is, line)) throw IoError(csv_path.string() + ": empty file");
    const auto header = split_csv(line);
    if (header.size() < 3 || header[0] != "sensor" || header[1] != "day")
        throw IoError(csv_path.string() + ": bad header");
    const int M = static_cast<int>(header.size()) - 2;

    struct Row {
        int sensor, day;
        std::vector<double> v;
    };
    std::vector<Row> rows;
    int S = 0, D = 0;
    for (int lineno = 2; std::getline(is, line); ++lineno) {
        if (line.empty()) continue;
        const auto cells = split_csv(line);
        if (static_cast<int>(cells.size()) != M + 2)
            throw IoError(csv_path.string() + ":" + std::to_string(lineno) + ": expected " + std::to_string(M + 2) +
                          " columns");
        Row r{static_cast<int>(parse_int(cells[0])), static_cast<int>(parse_int(cells[1])), {}};
        r.v.reserve(static_cast<std::size_t>(M));
        for (int m = 0; m < M; ++m) {
            const double v = parse_double(cells[static_cast<std::size_t>(m) + 2]);
            if (!(v >= 0.0 && v <= 1.0))
                throw IoError(csv_path.string() + ":" + std::to_string(lineno) + ": reading outside [0,1]");
            r.v.push_back(v);
        }
        if (r.sensor < 1 || r.day < 1) throw IoError(csv_path.string() + ":" + std::to_string(lineno) + ": bad index");
        S = std::max(S, r.sensor);
        D = std::max(D, r.day);
        rows.push_back(std::move(r));
    }
    if (rows.size() != static_cast<std::size_t>(S) * static_cast<std::size_t>(D))
        throw IoError(csv_path.string() + ": expected one row per (sensor, day)");
    LabeledDataset ds(S, D, M);
    for (const auto& r : rows) std::copy(r.v.begin(), r.v.end(), ds.day(r.sensor - 1, r.day - 1).begin());

    if (!labels_path.empty()) {
        const auto j = read_json(labels_path);
        if (j.at("sensors").get<int>() != S || j.at("days").get<int>() != D ||
            j.at("readings_per_day").get<int>() != M)
            throw IoError(labels_path.string() + ": shape does not match " + csv_path.string());
        for (const auto& row : j.at("labels")) {
            auto lab = ds.day_labels(row.at("sensor").get<int>() - 1, row.at("day").get<int>() - 1);
            for (int m : row.at("slots")) lab[static_cast<std::size_t>(m)] = 1;
        }
        for (const auto& inj : j.at("injections")) {
            ds.injection_log.push_back({inj.at("sensor").get<int>() - 1, inj.at("day").get<int>() - 1,
                                        inj.at("first_slot").get<int>(), inj.at("last_slot").get<int>(),
                                        inj.at("v").get<double>(), kind_from_string(inj.at("kind").get<std::string>()),
                                        inj.at("labeled").get<bool>(), inj.at("clamp_collision").get<bool>()});
        }
    }
    return ds;
}

// ---------------------------------------------------------------------------
// model records

inline void save_params(const fs::path& path, const ModelParams& p) {
    auto os = open_out(path, std::ios::out | std::ios::binary);
    write_params(os, p);
}

inline ModelParams load_params(const fs::path& path) {
    auto is = open_in(path, std::ios::in | std::ios::binary);
    return read_params(is);
}

// ---------------------------------------------------------------------------
// simulation result directory

inline const std::vector<std::string>& result_artifacts() {
    static const std::vector<std::string> names = {
        "readings.csv", "reconstructions.csv", "residuals.csv", "flags.csv",  "labels.csv",
        "scores.csv",   "events.jsonl",        "messages.jsonl", "comms.json", "result.json"};
    return names;
}

namespace detail {

template <typename T, typename Fmt>
void write_slot_table(const fs::path& path, const SimResult& r, const std::vector<T>& values, Fmt fmt) {
    auto os = open_out(path);
    os << slot_header(r.readings_per_day) << '\n';
    for (int s = 0; s < r.sensors; ++s)
        for (int e = 0; e < r.eval_days(); ++e) {
            os << (s + 1) << ',' << (e + r.bootstrap_days + 1);
            for (int m = 0; m < r.readings_per_day; ++m) os << ',' << fmt(values[r.index(s, e, m)]);
            os << '\n';
        }
    if (!os) throw IoError("failed writing " + path.string());
}

template <typename T, typename Parse>
void read_slot_table(const fs::path& path, const SimResult& r, std::vector<T>& values, Parse parse) {
    auto is = open_in(path);
    std::string line;
    if (!std::getline(is, line) || line != slot_header(r.readings_per_day))
        throw IoError(path.string() + ": bad header");
    std::size_t rows = 0;
    for (int lineno = 2; std::getline(is, line); ++lineno) {
        if (line.empty()) continue;
        const auto cells = split_csv(line);
        if (static_cast<int>(cells.size()) != r.readings_per_day + 2)
            throw IoError(path.string() + ":" + std::to_string(lineno) + ": wrong column count");
        const int s = static_cast<int>(parse_int(cells[0])) - 1;
        const int e = static_cast<int>(parse_int(cells[1])) - r.bootstrap_days - 1;
        if (s < 0 || s >= r.sensors || e < 0 || e >= r.eval_days())
            throw IoError(path.string() + ":" + std::to_string(lineno) + ": index out of range");
        for (int m = 0; m < r.readings_per_day; ++m)
            values[r.index(s, e, m)] = parse(cells[static_cast<std::size_t>(m) + 2]);
        ++rows;
    }
    if (rows != static_cast<std::size_t>(r.sensors) * static_cast<std::size_t>(r.eval_days()))
        throw IoError(path.string() + ": missing rows");
}

inline nlohmann::json comms_json(const DayComms& c) {
    return {{"day", c.day},
            {"uplink_messages", c.uplink_messages},
            {"uplink_bytes", c.uplink_bytes},
            {"alert_messages", c.alert_messages},
            {"alert_bytes", c.alert_bytes},
            {"downlink_messages", c.downlink_messages},
            {"downlink_bytes", c.downlink_bytes},
            {"sensor_to_sensor_messages", c.sensor_to_sensor_messages},
            {"sensor_to_sensor_bytes", c.sensor_to_sensor_bytes},
            {"dropped_uploads", c.dropped_uploads}};
}

inline DayComms comms_from_json(const nlohmann::json& j) {
    DayComms c;
    c.day = j.at("day").get<int>();
    c.uplink_messages = j.at("uplink_messages").get<std::uint64_t>();
    c.uplink_bytes = j.at("uplink_bytes").get<std::uint64_t>();
    c.alert_messages = j.at("alert_messages").get<std::uint64_t>();
    c.alert_bytes = j.at("alert_bytes").get<std::uint64_t>();
    c.downlink_messages = j.at("downlink_messages").get<std::uint64_t>();
    c.downlink_bytes = j.at("downlink_bytes").get<std::uint64_t>();
    c.sensor_to_sensor_messages = j.at("sensor_to_sensor_messages").get<std::uint64_t>();
    c.sensor_to_sensor_bytes = j.at("sensor_to_sensor_bytes").get<std::uint64_t>();
    c.dropped_uploads = j.at("dropped_uploads").get<std::uint64_t>();
    return c;
}

}  // namespace detail

inline nlohmann::json comm_report_json(const CommReport& rep) {
    return {{"uplink_per_sensor", rep.uplink_per_sensor},
            {"downlink_per_sensor", rep.downlink_per_sensor},
            {"uplink_bytes", rep.uplink_bytes},
            {"downlink_bytes", rep.downlink_bytes},
            {"sensor_to_sensor_messages", rep.sensor_to_sensor_messages},
            {"sensor_to_sensor_bytes", rep.sensor_to_sensor_bytes},
            {"dropped_uploads", rep.dropped_uploads},
            {"readings_per_uplink", rep.readings_per_uplink}};
}

inline void write_sim_result(const fs::path& dir, const SimResult& r) {
    fs::create_directories(dir);
    auto num = [](double v) { return format_double(v); };
    auto bit = [](std::uint8_t v) { return v ? "1" : "0"; };
    detail::write_slot_table(dir / "readings.csv", r, r.reading, num);
    detail::write_slot_table(dir / "reconstructions.csv", r, r.reconstruction, num);
    detail::write_slot_table(dir / "residuals.csv", r, r.residual, num);
    detail::write_slot_table(dir / "flags.csv", r, r.flag, bit);
    detail::write_slot_table(dir / "labels.csv", r, r.label, bit);
    detail::write_slot_table(dir / "scores.csv", r, r.score, num);

    {
        auto os = open_out(dir / "events.jsonl");
        for (const auto& ev : r.events) os << ev.dump() << '\n';
    }
    {
        auto os = open_out(dir / "messages.jsonl");
        for (int e = 0; e < r.eval_days(); ++e)
            for (int s = 0; s < r.sensors; ++s) {
                UploadMessage msg;
                msg.sensor_id = s + 1;
                msg.day_index = e + r.bootstrap_days + 1;
                const auto M = static_cast<Eigen::Index>(r.readings_per_day);
                const auto base = r.index(s, e, 0);
                msg.x = Eigen::Map<const Vector>(r.reading.data() + base, M);
                msg.x_hat = Eigen::Map<const Vector>(r.reconstruction.data() + base, M);
                msg.r = Eigen::Map<const Vector>(r.residual.data() + base, M);
                msg.alpha.assign(r.flag.begin() + static_cast<std::ptrdiff_t>(base),
                                 r.flag.begin() + static_cast<std::ptrdiff_t>(base) + M);
                os << to_json(msg).dump() << '\n';
            }
    }

    nlohmann::json per_day = nlohmann::json::array();
    for (const auto& c : r.comms) per_day.push_back(detail::comms_json(c));
    write_atomic(dir / "comms.json", nlohmann::json{{"format_version", kResultFormatVersion},
                                                    {"per_day", per_day},
                                                    {"summary", comm_report_json(communication_report(r))}}
                                             .dump(1) +
                                         "\n");

    if (r.initial_params.consistent()) {
        fs::create_directories(dir / "models");
        save_params(dir / "models" / "bootstrap.bin", r.initial_params);
        for (std::size_t i = 0; i < r.update_params.size() && i < r.retrains.size(); ++i) {
            char name[48];
            std::snprintf(name, sizeof name, "update_day_%04d.bin", r.retrains[i].day);
            save_params(dir / "models" / name, r.update_params[i]);
        }
    }

    nlohmann::json retrains = nlohmann::json::array();
    for (const auto& ev : r.retrains)
        retrains.push_back({{"day", ev.day},
                            {"effective_day", ev.effective_day},
                            {"training_samples", ev.training_samples},
                            {"initial_cost", ev.initial_cost},
                            {"final_cost", ev.final_cost}});
    write_atomic(dir / "result.json", nlohmann::json{{"format_version", kResultFormatVersion},
                                                     {"sensors", r.sensors},
                                                     {"total_days", r.total_days},
                                                     {"bootstrap_days", r.bootstrap_days},
                                                     {"readings_per_day", r.readings_per_day},
                                                     {"bootstrap_rmse", r.bootstrap_rmse},
                                                     {"inference_macs", r.inference_macs},
                                                     {"alerts_per_sensor", r.alerts_per_sensor},
                                                     {"retrains", retrains}}
                                              .dump(1) +
                                          "\n");
}

/// Names from result_artifacts() that are absent in `dir`.
inline std::vector<std::string> missing_artifacts(const fs::path& dir) {
    std::vector<std::string> missing;
    for (const auto& name : result_artifacts())
        if (!fs::exists(dir / name)) missing.push_back(name);
    return missing;
}

inline SimResult read_sim_result(const fs::path& dir) {
    const auto meta = read_json(dir / "result.json");
    if (meta.at("format_version").get<int>() != kResultFormatVersion)
        throw IoError("unsupported result format version");
    SimResult r;
    r.sensors = meta.at("sensors").get<int>();
    r.total_days = meta.at("total_days").get<int>();
    r.bootstrap_days = meta.at("bootstrap_days").get<int>();
    r.readings_per_day = meta.at("readings_per_day").get<int>();
    r.allocate();
    r.bootstrap_rmse = meta.at("bootstrap_rmse").get<double>();
    r.inference_macs = meta.at("inference_macs").get<std::uint64_t>();
    r.alerts_per_sensor = meta.at("alerts_per_sensor").get<std::vector<std::uint64_t>>();
    for (const auto& ev : meta.at("retrains"))
        r.retrains.push_back({ev.at("day").get<int>(), ev.at("effective_day").get<int>(),
                              ev.at("training_samples").get<std::size_t>(), ev.at("initial_cost").get<double>(),
                              ev.at("final_cost").get<double>()});

    auto num = [](std::string_view s) { return parse_double(s); };
    auto bit = [](std::string_view s) -> std::uint8_t {
        if (s == "0") return 0;
        if (s == "1") return 1;
        throw IoError("expected 0 or 1, got '" + std::string(s) + "'");
    };
    detail::read_slot_table(dir / "readings.csv", r, r.reading, num);
    detail::read_slot_table(dir / "reconstructions.csv", r, r.reconstruction, num);
    detail::read_slot_table(dir / "residuals.csv", r, r.residual, num);
    detail::read_slot_table(dir / "flags.csv", r, r.flag, bit);
    detail::read_slot_table(dir / "labels.csv", r, r.label, bit);
    detail::read_slot_table(dir / "scores.csv", r, r.score, num);

    const auto comms = read_json(dir / "comms.json");
    for (const auto& c : comms.at("per_day")) r.comms.push_back(detail::comms_from_json(c));
    auto is = open_in(dir / "events.jsonl");
    std::string line;
    while (std::getline(is, line))
        if (!line.empty()) r.events.push_back(nlohmann::json::parse(line));
    return r;
}

}  // namespace dada::io
