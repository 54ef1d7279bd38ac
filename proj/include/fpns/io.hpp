#pragma once

#include <atomic>
#include <bit>
#include <chrono>
#include <csignal>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "fpns/config.hpp"
#include "fpns/coupling.hpp"
#include "fpns/diagnostics.hpp"

namespace fpns {

inline constexpr std::uint32_t kSnapshotVersion = 1;
inline constexpr int kCsvVersion = 1;
inline constexpr const char* kCodeVersion = "0.1.0";

// ------------------------------------------------------------ binary snapshots
//
// little-endian:  "FPNS" | u32 version | i64 Nx | i64 Nv | f64 L | f64 V | f64 sigma
//                 | f[Nx*Nx*Nv*Nv] (x1, x2, v1, v2 row-major) | u1[Nx*Nx] | u2[Nx*Nx]
//                 | f64 t | i64 step | u64 n | n bytes of resolved config JSON

namespace detail {

template <typename T>
T to_little(T v) {
    if constexpr (std::endian::native == std::endian::big) {
        unsigned char b[sizeof(T)];
        std::memcpy(b, &v, sizeof(T));
        for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
        std::memcpy(&v, b, sizeof(T));
    }
    return v;
}

template <typename T>
void put(std::ostream& out, T v) {
    v = to_little(v);
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in, const char* what) {
    T v;
    if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) throw FormatError(std::string("snapshot truncated at ") + what);
    return to_little(v);
}

inline void put_array(std::ostream& out, const double* p, std::size_t n) {
    if constexpr (std::endian::native == std::endian::little) {
        out.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(n * sizeof(double)));
    } else {
        for (std::size_t i = 0; i < n; ++i) put(out, p[i]);
    }
}

inline void get_array(std::istream& in, double* p, std::size_t n, const char* what) {
    if (!in.read(reinterpret_cast<char*>(p), static_cast<std::streamsize>(n * sizeof(double))))
        throw FormatError(std::string("snapshot truncated in ") + what);
    if constexpr (std::endian::native != std::endian::little)
        for (std::size_t i = 0; i < n; ++i) p[i] = to_little(p[i]);
}

}  // namespace detail

inline void write_snapshot(std::ostream& out, const SimState& st, const SimConfig& cfg) {
    out.write("FPNS", 4);
    detail::put<std::uint32_t>(out, kSnapshotVersion);
    detail::put<std::int64_t>(out, st.f.xgrid.points);
    detail::put<std::int64_t>(out, st.f.vgrid.points);
    detail::put<double>(out, st.f.xgrid.length);
    detail::put<double>(out, st.f.vgrid.half_width);
    detail::put<double>(out, cfg.params.sigma);
    detail::put_array(out, st.f.values.data(), st.f.size());
    detail::put_array(out, st.u.c1.values.data(), st.u.size());
    detail::put_array(out, st.u.c2.values.data(), st.u.size());
    detail::put<double>(out, st.t);
    detail::put<std::int64_t>(out, st.step);
    const std::string json = config_to_json(cfg).dump();
    detail::put<std::uint64_t>(out, json.size());
    out.write(json.data(), static_cast<std::streamsize>(json.size()));
}

struct Snapshot {
    SimState state;
    SimConfig config;
};

inline Snapshot read_snapshot(std::istream& in) {
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, "FPNS", 4) != 0) throw FormatError("not an FPNS snapshot (bad magic)");
    const auto version = detail::get<std::uint32_t>(in, "version");
    if (version != kSnapshotVersion) throw FormatError("unsupported snapshot version " + std::to_string(version));
    const auto nx = detail::get<std::int64_t>(in, "Nx");
    const auto nv = detail::get<std::int64_t>(in, "Nv");
    const double L = detail::get<double>(in, "L");
    const double V = detail::get<double>(in, "V");
    const double sigma = detail::get<double>(in, "sigma");
    if (nx < 8 || nx > 4096 || nv < 16 || nv > 4096) throw FormatError("snapshot grid sizes out of range");
    TorusGrid xg(L, static_cast<int>(nx));
    VelocityGrid vg(V, static_cast<int>(nv));
    Snapshot s;
    s.state.f = DistributionField(xg, vg);
    s.state.u = VectorField(xg);
    detail::get_array(in, s.state.f.values.data(), s.state.f.size(), "f");
    detail::get_array(in, s.state.u.c1.values.data(), s.state.u.size(), "u1");
    detail::get_array(in, s.state.u.c2.values.data(), s.state.u.size(), "u2");
    s.state.t = detail::get<double>(in, "t");
    s.state.step = static_cast<long>(detail::get<std::int64_t>(in, "step"));
    const auto len = detail::get<std::uint64_t>(in, "config length");
    if (len > (1u << 24)) throw FormatError("snapshot config block too large");
    std::string json(len, '\0');
    if (!in.read(json.data(), static_cast<std::streamsize>(len))) throw FormatError("snapshot truncated in config");
    s.config = parse_config_text(json);
    const auto& g = s.config.grid;
    if (g.Nx != nx || g.Nv != nv || g.L != L || g.V != V || s.config.params.sigma != sigma)
        throw FormatError("snapshot header disagrees with its embedded config");
    return s;
}

inline void write_snapshot(const std::filesystem::path& path, const SimState& st, const SimConfig& cfg) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot write snapshot '" + path.string() + "'");
    write_snapshot(out, st, cfg);
    if (!out) throw FormatError("write failed for snapshot '" + path.string() + "'");
}

inline Snapshot read_snapshot(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open snapshot '" + path.string() + "'");
    return read_snapshot(in);
}

// ------------------------------------------------------------ text outputs

/// Shortest round-trip decimal form; "nan" / "inf" / "-inf" for non-finite values.
inline std::string format_number(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

inline void write_records_csv(std::ostream& out, const std::vector<DiagnosticsRecord>& recs) {
    const auto& cols = record_columns();
    for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
    out << '\n';
    for (const auto& r : recs) {
        const auto vals = record_values(r);
        for (std::size_t i = 0; i < vals.size(); ++i) out << (i ? "," : "") << format_number(vals[i]);
        out << '\n';
    }
}

/// One row per x-cell: i, j, x1, x2, rho, m1, m2.
inline void write_macro_csv(std::ostream& out, const MacroFields& m) {
    const auto& g = m.rho.grid;
    out << "i,j,x1,x2,rho,m1,m2\n";
    for (int i = 0; i < g.points; ++i)
        for (int j = 0; j < g.points; ++j) {
            const std::size_t c = static_cast<std::size_t>(i) * g.points + j;
            out << i << ',' << j << ',' << format_number(g.coord(i)) << ',' << format_number(g.coord(j)) << ','
                << format_number(m.rho[c]) << ',' << format_number(m.momentum.c1[c]) << ','
                << format_number(m.momentum.c2[c]) << '\n';
        }
}

/// Write through a temporary file and rename, so readers never see a partial file.
inline std::uintmax_t write_file_atomic(const std::filesystem::path& path, const std::string& text) {
    const auto tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw FormatError("cannot write '" + tmp + "'");
        out << text;
        if (!out) throw FormatError("write failed for '" + tmp + "'");
    }
    std::filesystem::rename(tmp, path);
    return text.size();
}

// ------------------------------------------------------------ plot data and summary

/// Norms exported as (t, value, log_value) series, in this order.
inline const std::vector<std::string>& plot_norms() {
    static const std::vector<std::string> n{"f_dist", "v_dist", "u_dist", "E_bar", "H", "Y"};
    return n;
}

inline double record_column(const DiagnosticsRecord& r, const std::string& name) {
    const auto& cols = record_columns();
    const auto vals = record_values(r);
    for (std::size_t i = 0; i < cols.size(); ++i)
        if (cols[i] == name) return vals[i];
    throw ParameterError("unknown record column '" + name + "'");
}

struct RateEntry {
    std::string norm;
    bool ok = false;
    DecayFit fit;
    double t0 = 0.0, t1 = 0.0;
    std::string reason;
};

/// Decay fits of the three synchronization norms on the last two thirds of the trajectory.
inline std::vector<RateEntry> fitted_rates(const std::vector<DiagnosticsRecord>& recs) {
    std::vector<RateEntry> out;
    const double tend = recs.empty() ? 0.0 : recs.back().t;
    const double tstart = recs.empty() ? 0.0 : recs.front().t;
    for (const char* name : {"f_dist", "v_dist", "u_dist"}) {
        RateEntry e;
        e.norm = name;
        e.t0 = tstart + (tend - tstart) / 3.0;
        e.t1 = tend;
        std::vector<double> t, y;
        for (const auto& r : recs) {
            t.push_back(r.t);
            y.push_back(record_column(r, name));
        }
        try {
            e.fit = decay_fit(t, y, e.t0, e.t1);
            e.ok = true;
        } catch (const Error& err) {
            e.reason = err.what();
        }
        out.push_back(e);
    }
    return out;
}

/// Per-norm files plot_<norm>.csv with (t, value, log_value) and rates.csv with the fitted
/// decay rates.  An empty trajectory gives header-only files.  Returns the written paths.
inline std::vector<std::filesystem::path> emit_plot_data(const std::vector<DiagnosticsRecord>& recs,
                                                         const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    std::vector<std::filesystem::path> files;
    for (const auto& name : plot_norms()) {
        std::ostringstream os;
        os << "t,value,log_value\n";
        for (const auto& r : recs) {
            const double v = record_column(r, name);
            os << format_number(r.t) << ',' << format_number(v) << ','
               << format_number(v > 0.0 ? std::log(v) : std::numeric_limits<double>::quiet_NaN()) << '\n';
        }
        files.push_back(dir / ("plot_" + name + ".csv"));
        write_file_atomic(files.back(), os.str());
    }
    std::ostringstream os;
    os << "norm,rate,r2,samples,t0,t1\n";
    if (!recs.empty())
        for (const auto& e : fitted_rates(recs)) {
            if (!e.ok) continue;
            os << e.norm << ',' << format_number(e.fit.rate) << ',' << format_number(e.fit.r2) << ',' << e.fit.samples
               << ',' << format_number(e.t0) << ',' << format_number(e.t1) << '\n';
        }
    files.push_back(dir / "rates.csv");
    write_file_atomic(files.back(), os.str());
    return files;
}

inline Json json_number(double x) { return std::isfinite(x) ? Json(x) : Json(nullptr); }

/// Deterministic summary: conservation drifts, monotonicity, residual and fitted rates.
inline Json run_summary(const std::vector<DiagnosticsRecord>& recs, Vec2 wbar, double per_step_tol) {
    Json j;
    j["records"] = recs.size();
    j["wbar"] = {wbar.x, wbar.y};
    if (recs.empty()) return j;
    const auto& a = recs.front();
    const auto& b = recs.back();
    j["t_final"] = b.t;
    const double x1 = a.X1.norm();
    j["X1_relative_drift"] = json_number(x1 > 0.0 ? (b.X1 - a.X1).norm() / x1 : (b.X1 - a.X1).norm());
    j["X2_relative_drift"] = json_number(std::abs(b.X2 - a.X2) / std::max(std::abs(a.X2), 1e-300));
    double max_increase = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i < recs.size(); ++i) max_increase = std::max(max_increase, recs[i].E_bar - recs[i - 1].E_bar);
    j["E_bar_max_increase"] = json_number(max_increase);
    j["E_bar_monotone"] = recs.size() < 2 || max_increase <= per_step_tol;
    double res = std::numeric_limits<double>::quiet_NaN();
    for (const auto& r : recs)
        if (!std::isnan(r.residual)) res = std::isnan(res) ? r.residual : std::max(res, r.residual);
    j["entropy_law_residual_max"] = json_number(res);
    double min_f = a.min_f, min_conc = a.concentration;
    for (const auto& r : recs) {
        min_f = std::min(min_f, r.min_f);
        min_conc = std::min(min_conc, r.concentration);
    }
    j["min_f"] = json_number(min_f);
    j["min_concentration"] = json_number(min_conc);
    Json rates = Json::object();
    for (const auto& e : fitted_rates(recs)) {
        if (e.ok)
            rates[e.norm] = {{"rate", json_number(e.fit.rate)},
                             {"r2", json_number(e.fit.r2)},
                             {"samples", e.fit.samples},
                             {"t0", e.t0},
                             {"t1", e.t1}};
        else
            rates[e.norm] = {{"rate", nullptr}, {"reason", e.reason}};
    }
    j["fitted_rates"] = rates;
    return j;
}

// ------------------------------------------------------------ run driver

namespace detail {

inline std::atomic<bool>& interrupt_flag() {
    static std::atomic<bool> flag{false};
    return flag;
}

extern "C" inline void on_interrupt(int) { interrupt_flag().store(true); }

inline std::string utc_now() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

}  // namespace detail

struct RunOptions {
    bool handle_sigint = false;  // install a SIGINT handler that stops the run cleanly
};

struct RunResult {
    std::vector<DiagnosticsRecord> records;
    SimState state;
    std::string status;  // ok | failed | interrupted
    std::string error;
    Json summary;
};

/// Integrate from `st` to cfg.time.T_final writing into `out`: records.csv, summary.json,
/// macro_final.csv, plot/, snapshot_final.bin (and periodic snapshots) and manifest.json.
/// The manifest is written last, atomically, also when the run fails or is interrupted.
inline RunResult run_from(const SimConfig& cfg, SimState st, const std::filesystem::path& out,
                          const RunOptions& opt = {}) {
    namespace fs = std::filesystem;
    validate_config(cfg);
    fs::create_directories(out);
    const auto wall0 = std::chrono::steady_clock::now();
    const std::string started = detail::utc_now();
    RunResult res;
    Json files = Json::array();
    const auto add_file = [&](const fs::path& p) {
        files.push_back({{"path", fs::relative(p, out).generic_string()}, {"bytes", fs::file_size(p)}});
    };
    void (*previous)(int) = SIG_DFL;
    if (opt.handle_sigint) {
        detail::interrupt_flag().store(false);
        previous = std::signal(SIGINT, detail::on_interrupt);
    }
    Vec2 wbar;
    try {
        const AveragingModel model(cfg.model, st.f.xgrid);
        const MacroFields m0 = moments(st.f);
        wbar = limit_velocity(total_momentum(m0), fluid_mean(st.u), cfg.params, st.f.xgrid.area());
        res.records.push_back(compute_record(st, model, cfg.params, cfg.diagnostics, wbar));
        const double T = cfg.time.T_final;
        long since_record = 0;
        res.status = "ok";
        while (st.t < T - 1e-12 * std::max(1.0, T)) {
            if (detail::interrupt_flag().load()) {
                res.status = "interrupted";
                break;
            }
            const double dt = std::min(choose_dt(st, cfg.time), T - st.t);
            fpns_step(st, model, cfg.params, dt, cfg.time.k_picard);
            ++since_record;
            const bool last = st.t >= T - 1e-12 * std::max(1.0, T);
            if (since_record >= cfg.output.record_every || last) {
                res.records.push_back(compute_record(st, model, cfg.params, cfg.diagnostics, wbar));
                since_record = 0;
            }
            if (cfg.output.snapshot_every > 0 && st.step % cfg.output.snapshot_every == 0) {
                const fs::path p = out / ("snapshot_" + std::to_string(st.step) + ".bin");
                write_snapshot(p, st, cfg);
                add_file(p);
            }
        }
    } catch (const std::exception& e) {
        res.status = "failed";
        res.error = e.what();
    }
    if (opt.handle_sigint) std::signal(SIGINT, previous);

    // partial outputs are flushed in every case
    entropy_law_residual(res.records);
    std::ostringstream csv;
    write_records_csv(csv, res.records);
    write_file_atomic(out / "records.csv", csv.str());
    add_file(out / "records.csv");
    const double tol = res.records.empty() ? 0.0 : 1e-8 * std::abs(res.records.front().E_bar);
    res.summary = run_summary(res.records, wbar, tol);
    write_file_atomic(out / "summary.json", res.summary.dump(2) + "\n");
    add_file(out / "summary.json");
    if (res.status != "failed") {
        std::ostringstream macro;
        write_macro_csv(macro, moments(st.f));
        write_file_atomic(out / "macro_final.csv", macro.str());
        add_file(out / "macro_final.csv");
        write_snapshot(out / "snapshot_final.bin", st, cfg);
        add_file(out / "snapshot_final.bin");
        for (const auto& p : emit_plot_data(res.records, out / "plot")) add_file(p);
    }

    Json manifest;
    manifest["status"] = res.status;
    if (!res.error.empty()) manifest["error"] = res.error;
    manifest["code_version"] = kCodeVersion;
    manifest["formats"] = {{"snapshot", kSnapshotVersion}, {"csv", kCsvVersion}};
    manifest["config"] = config_to_json(cfg);
    manifest["grid"] = {{"Nx", cfg.grid.Nx}, {"Nv", cfg.grid.Nv}};
    manifest["started"] = started;
    manifest["finished"] = detail::utc_now();
    manifest["wall_clock_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - wall0).count();
    manifest["steps"] = st.step;
    manifest["t"] = st.t;
    manifest["files"] = files;
    write_file_atomic(out / "manifest.json", manifest.dump(2) + "\n");
    res.state = std::move(st);
    return res;
}

inline RunResult run(const SimConfig& cfg, const std::filesystem::path& out, const RunOptions& opt = {}) {
    validate_config(cfg);
    const TorusGrid xg = cfg.grid.torus();
    const VelocityGrid vg = cfg.grid.velocity();
    return run_from(cfg, initial_data(cfg.initial, xg, vg, cfg.params), out, opt);
}

/// Continue a run from a snapshot to its configured T_final.
inline RunResult resume(const std::filesystem::path& snapshot, const std::filesystem::path& out,
                        const RunOptions& opt = {}) {
    Snapshot s = read_snapshot(snapshot);
    return run_from(s.config, std::move(s.state), out, opt);
}

}  // namespace fpns
