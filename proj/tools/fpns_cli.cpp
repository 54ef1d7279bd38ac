// fpns_cli: run, inspect and resume FPNS simulations.
#include <filesystem>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "fpns/averaging.hpp"
#include "fpns/io.hpp"

namespace fs = std::filesystem;
using fpns::Json;

namespace {

int fail(const std::string& kind, const std::string& message, const std::string& key = {}, int code = 1) {
    Json j{{"error", kind}, {"message", message}};
    if (!key.empty()) j["key"] = key;
    std::cerr << j.dump() << '\n';
    return code;
}

Json model_report(const fpns::SimConfig& cfg) {
    const auto xg = cfg.grid.torus();
    const auto vg = cfg.grid.velocity();
    const fpns::AveragingModel model(cfg.model, xg);
    const auto st = fpns::initial_data(cfg.initial, xg, vg, cfg.params);
    const auto macro = fpns::moments(st.f);
    const auto& rho = macro.rho;
    Json j;
    j["variant"] = fpns::variant_name(cfg.model.variant);
    j["conservative_by_construction"] = model.conservative();
    j["global_thickness"] = fpns::global_thickness(rho, model.radius());
    j["stochasticity_residual"] = fpns::check_stochasticity(model, rho);
    j["conservativity_residual"] = fpns::check_conservative(model, rho);
    const auto contr = fpns::check_contractive(model, rho, 2.0);
    j["contractivity_ratio"] = contr.worst_ratio;
    if (cfg.grid.Nx <= fpns::kDenseLimit) {
        const auto ball = fpns::check_ball_positive(model, rho);
        j["ball_positivity"] = {{"min_eigenvalue", ball.min_eigenvalue}, {"passed", ball.passed}};
        try {
            j["spectral_gap"] = fpns::spectral_gap(model, rho);
        } catch (const fpns::DegenerateModelError& e) {
            j["spectral_gap"] = nullptr;
            j["spectral_gap_error"] = e.what();
        }
    } else {
        j["ball_positivity"] = nullptr;
        j["spectral_gap"] = nullptr;
        j["note"] = "dense checks need Nx <= " + std::to_string(fpns::kDenseLimit);
    }
    return j;
}

Json gap_report(const fpns::SimConfig& cfg, bool sweep) {
    const auto xg = cfg.grid.torus();
    const fpns::AveragingModel model(cfg.model, xg);
    if (cfg.grid.Nx > fpns::kDenseLimit)
        throw fpns::ParameterError("spectral gap needs Nx <= " + std::to_string(fpns::kDenseLimit));
    Json rows = Json::array();
    if (sweep) {
        for (const auto& rho : fpns::thickness_family(xg)) {
            Json r{{"global_thickness", fpns::global_thickness(rho, model.radius())}};
            try {
                r["gap"] = fpns::spectral_gap(model, rho);
            } catch (const fpns::DegenerateModelError& e) {
                r["gap"] = nullptr;
                r["error"] = e.what();
            }
            rows.push_back(r);
        }
    } else {
        const auto st = fpns::initial_data(cfg.initial, xg, cfg.grid.velocity(), cfg.params);
        const auto rho = fpns::moments(st.f).rho;
        rows.push_back({{"global_thickness", fpns::global_thickness(rho, model.radius())},
                        {"gap", fpns::spectral_gap(model, rho)}});
    }
    return Json{{"variant", fpns::variant_name(cfg.model.variant)}, {"rows", rows}};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Kinetic Fokker-Planck / Navier-Stokes flocking solver"};
    app.require_subcommand(1);

    std::string config_path, out_dir, snapshot_path;
    bool sweep = false;

    auto* run = app.add_subcommand("run", "integrate a configuration and write outputs");
    run->add_option("--config", config_path, "config JSON")->required();
    run->add_option("--out", out_dir, "output directory")->required();

    auto* check = app.add_subcommand("check-model", "averaging-model property checks on the initial density");
    check->add_option("--config", config_path, "config JSON")->required();

    auto* gap = app.add_subcommand("gap", "spectral gap of the averaging model");
    gap->add_option("--config", config_path, "config JSON")->required();
    gap->add_flag("--thickness-sweep", sweep, "evaluate along a thickness-decreasing density family");

    auto* presets = app.add_subcommand("presets", "list initial-data presets");

    auto* res = app.add_subcommand("resume", "continue a run from a snapshot");
    res->add_option("--snapshot", snapshot_path, "snapshot file")->required();
    res->add_option("--out", out_dir, "output directory (default: the snapshot's directory)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return fail("usage", e.what(), {}, 2);
    }

    try {
        if (*presets) {
            for (const auto& name : fpns::preset_names()) std::cout << name << '\n';
            return 0;
        }
        if (*run || *res) {
            fpns::RunOptions opt;
            opt.handle_sigint = true;
            fpns::RunResult r;
            if (*run) {
                r = fpns::run(fpns::parse_config(config_path), out_dir, opt);
            } else {
                if (out_dir.empty()) out_dir = fs::absolute(snapshot_path).parent_path().string();
                r = fpns::resume(snapshot_path, out_dir, opt);
            }
            Json j{{"status", r.status}, {"out", out_dir}, {"records", r.records.size()}, {"t", r.state.t}};
            std::cout << j.dump() << '\n';
            if (r.status == "failed") return fail("run_failed", r.error);
            return r.status == "ok" ? 0 : 130;
        }
        if (*check) {
            std::cout << model_report(fpns::parse_config(config_path)).dump(2) << '\n';
            return 0;
        }
        if (*gap) {
            std::cout << gap_report(fpns::parse_config(config_path), sweep).dump(2) << '\n';
            return 0;
        }
    } catch (const fpns::ConfigError& e) {
        return fail(e.kind(), e.what(), e.key());
    } catch (const fpns::Error& e) {
        return fail(e.kind(), e.what());
    } catch (const std::exception& e) {
        return fail("internal", e.what());
    }
    return 0;
}
