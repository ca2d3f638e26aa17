// Command-line surface for the dual-line sampling engine: single runs,
// the three ablation sweeps, and the oracle self-check suite.

#include "dualline/checks.hpp"
#include "dualline/config.hpp"
#include "dualline/manifest.hpp"
#include "dualline/metrics.hpp"
#include "dualline/pipeline.hpp"
#include "dualline/png_io.hpp"
#include "dualline/sweep.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace dualline;

namespace {

PipelineConfig load_config(const std::string& path) {
    if (path.empty()) return PipelineConfig{};
    return parse_config_file(path);
}

std::string ensure_out_dir(const std::string& out) {
    fs::create_directories(out);
    return out;
}

std::string trace_csv(const RunResult& result) {
    std::string out = "step,t_base,alpha_bar,idap_active,idaf_active,identity_fraction\n";
    char buf[160];
    for (const auto& rec : result.trace) {
        std::snprintf(buf, sizeof(buf), "%d,%d,%.12g,%d,%d,%.12g\n", rec.step, rec.t_base,
                      rec.alpha_bar, rec.idap_active ? 1 : 0, rec.idaf_active ? 1 : 0,
                      rec.identity_fraction);
        out += buf;
    }
    return out;
}

int cmd_sample(const std::string& config_path, const std::string& out_dir) {
    const PipelineConfig cfg = load_config(config_path);
    const std::string dir = ensure_out_dir(out_dir);

    const ToyWorld world = build_world(cfg);
    const RunResult result = run_dual_line(world, cfg);
    const double id_score = identity_score(result.sample, world, cfg.target_identity);
    const double sem_score = semantic_score(result.sample, world, cfg.target_scene);

    std::vector<Tensor> samples{result.sample};
    std::vector<IndexTensor> masks;
    if (result.has_last_mask) masks.push_back(result.last_mask);
    const RenderResult rendered = render_outputs(samples, masks, dir + "/run");

    std::map<std::string, double> vmax;
    vmax["run_sample0.png"] = rendered.vmax_values.at(0);

    MetricsRow row;
    row.run_id = "sample-s" + std::to_string(cfg.seeds.noise);
    row.cell = "sample";
    row.seed = cfg.seeds.noise;
    row.identity_score = id_score;
    row.semantic_score = sem_score;
    row.identity_fraction = result.mean_identity_fraction();

    write_text_file(dir + "/trace.csv", trace_csv(result));
    write_text_file(dir + "/metrics.csv", metrics_csv({row}));
    write_text_file(dir + "/manifest.json",
                    run_manifest_json(cfg, result, id_score, sem_score, vmax));
    write_text_file(dir + "/config_resolved.cfg", emit_config(cfg));

    std::cout << "sample: identity_score=" << id_score << " semantic_score=" << sem_score
              << " decoded="
              << (result.decoded_identity ? std::to_string(*result.decoded_identity)
                                          : std::string("none"))
              << "\n";
    return 0;
}

int cmd_ablate_lambda(const std::string& config_path, const std::string& out_dir,
                      std::uint64_t seeds) {
    const PipelineConfig cfg = load_config(config_path);
    const std::string dir = ensure_out_dir(out_dir);

    const auto rows = ablate_lambda(cfg, default_lambda_ratios(), seed_list(seeds));
    const TrendReport report = lambda_trend_report(rows, "1:1", "1:7");

    write_text_file(dir + "/lambda.csv", metrics_csv(rows));
    write_text_file(dir + "/lambda_report.txt", trend_report_text(report));
    write_text_file(dir + "/manifest.json",
                    sweep_manifest_json("ablate-lambda", cfg,
                                        {"1:1", "1:3", "1:5", "1:7"}, seeds,
                                        {"lambda.csv", "lambda_report.txt"}));
    std::cout << trend_report_text(report);
    return 0;
}

int cmd_ablate_m(const std::string& config_path, const std::string& out_dir,
                 std::uint64_t seeds) {
    const PipelineConfig cfg = load_config(config_path);
    const std::string dir = ensure_out_dir(out_dir);

    const auto rows = ablate_timestep(cfg, default_m_values(), seed_list(seeds));
    write_text_file(dir + "/m.csv", metrics_csv(rows));
    write_text_file(dir + "/manifest.json",
                    sweep_manifest_json("ablate-m", cfg, {"M=10", "M=20", "M=30", "M=40"},
                                        seeds, {"m.csv"}));

    for (int m : default_m_values()) {
        std::vector<double> scores;
        for (const auto& row : rows) {
            if (row.cell == "M=" + std::to_string(m)) scores.push_back(row.identity_score);
        }
        std::cout << "M=" << m << ": mean identity_score=" << mean_of(scores)
                  << " (stderr " << stderr_of(scores) << ")\n";
    }
    return 0;
}

int cmd_ablate_modules(const std::string& config_path, const std::string& out_dir,
                       std::uint64_t seeds) {
    const PipelineConfig cfg = load_config(config_path);
    const std::string dir = ensure_out_dir(out_dir);

    const auto rows = ablate_modules(cfg, seed_list(seeds));
    write_text_file(dir + "/modules.csv", metrics_csv(rows));
    write_text_file(dir + "/manifest.json",
                    sweep_manifest_json("ablate-modules", cfg,
                                        {"full", "no-idaf", "no-idap", "neither"}, seeds,
                                        {"modules.csv"}));

    for (const char* arm : {"full", "no-idaf", "no-idap", "neither"}) {
        std::vector<double> ids, sems;
        for (const auto& row : rows) {
            if (row.cell == arm) {
                ids.push_back(row.identity_score);
                sems.push_back(row.semantic_score);
            }
        }
        std::cout << arm << ": identity=" << mean_of(ids) << " semantic=" << mean_of(sems)
                  << "\n";
    }
    return 0;
}

int cmd_oracle_check() {
    std::vector<CheckResult> results;
    for (auto& r : run_kernel_oracle_suite(1000, 2024)) results.push_back(std::move(r));
    for (auto& r : run_fusion_equivalence_suite(1000, 2025)) results.push_back(std::move(r));
    for (auto& r : run_score_consistency_suite(100, 2026)) results.push_back(std::move(r));

    bool ok = true;
    for (const auto& r : results) {
        std::cout << (r.pass ? "[PASS] " : "[FAIL] ") << r.name << ": " << r.detail << "\n";
        ok = ok && r.pass;
    }
    return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Dual-line diffusion sampling engine with identity-adaptive "
                 "noise fusion and token aggregation"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir = "out";
    std::uint64_t seeds = 20;

    auto add_common = [&](CLI::App* cmd, bool with_seeds) {
        cmd->add_option("--config", config_path, "Config file (key = value lines)");
        cmd->add_option("--out", out_dir, "Output directory");
        if (with_seeds) cmd->add_option("--seeds", seeds, "Number of sweep seeds");
    };

    CLI::App* sample = app.add_subcommand("sample", "Run one dual-line sampling pass");
    add_common(sample, false);
    CLI::App* lambda = app.add_subcommand("ablate-lambda", "Sweep the lambda ratio");
    add_common(lambda, true);
    CLI::App* ablate_m = app.add_subcommand("ablate-m", "Sweep the activation timestep");
    add_common(ablate_m, true);
    CLI::App* modules = app.add_subcommand("ablate-modules", "Module on/off ablation");
    modules->add_option("--config", config_path, "Config file (key = value lines)");
    modules->add_option("--out", out_dir, "Output directory");
    std::uint64_t module_seeds = 100;
    modules->add_option("--seeds", module_seeds, "Number of sweep seeds");
    CLI::App* oracle = app.add_subcommand("oracle-check", "Run the oracle suites");

    CLI11_PARSE(app, argc, argv);

    try {
        if (sample->parsed()) return cmd_sample(config_path, out_dir);
        if (lambda->parsed()) return cmd_ablate_lambda(config_path, out_dir, seeds);
        if (ablate_m->parsed()) return cmd_ablate_m(config_path, out_dir, seeds);
        if (modules->parsed()) return cmd_ablate_modules(config_path, out_dir, module_seeds);
        if (oracle->parsed()) return cmd_oracle_check();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
