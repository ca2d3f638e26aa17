#include "dualline/sweep.hpp"

#include "dualline/png_io.hpp"
#include "dualline/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace dualline {

namespace {

constexpr std::uint64_t kSweepWorldStream = 11;
constexpr std::uint64_t kSweepNoiseStream = 13;

std::string format_metric(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

std::string ratio_cell(double identity_lambda) {
    std::ostringstream os;
    os << "1:" << identity_lambda;
    return os.str();
}

MetricsRow make_row(const std::string& sweep, const std::string& cell,
                    std::uint64_t seed, const RunMetrics& m) {
    MetricsRow row;
    row.run_id = sweep + "-" + cell + "-s" + std::to_string(seed);
    row.cell = cell;
    row.seed = seed;
    row.identity_score = m.identity;
    row.semantic_score = m.semantic;
    row.identity_fraction = m.fraction;
    return row;
}

}  // namespace

PipelineConfig config_for_seed(PipelineConfig base, std::uint64_t seed) {
    base.seeds.world = derive_seed(seed, kSweepWorldStream);
    base.seeds.noise = derive_seed(seed, kSweepNoiseStream);
    return base;
}

RunMetrics run_and_score(const PipelineConfig& cfg) {
    const ToyWorld world = build_world(cfg);
    const RunResult result = run_dual_line(world, cfg);
    RunMetrics m;
    m.identity = identity_score(result.sample, world, cfg.target_identity);
    m.semantic = semantic_score(result.sample, world, cfg.target_scene);
    m.fraction = result.mean_identity_fraction();
    return m;
}

std::vector<MetricsRow> ablate_lambda(const PipelineConfig& base,
                                      const std::vector<double>& identity_ratios,
                                      const std::vector<std::uint64_t>& seeds) {
    for (double r : identity_ratios) {
        if (!(r > 0.0)) throw std::invalid_argument("ablate_lambda: ratios must be positive");
    }
    std::vector<MetricsRow> rows;
    for (double ratio : identity_ratios) {
        for (std::uint64_t seed : seeds) {
            PipelineConfig cfg = config_for_seed(base, seed);
            cfg.fusion.lambda_semantic = 1.0;
            cfg.fusion.lambda_identity = ratio;
            rows.push_back(make_row("lambda", ratio_cell(ratio), seed, run_and_score(cfg)));
        }
    }
    return rows;
}

std::vector<MetricsRow> ablate_timestep(const PipelineConfig& base,
                                        const std::vector<int>& m_values,
                                        const std::vector<std::uint64_t>& seeds) {
    std::vector<MetricsRow> rows;
    for (int m : m_values) {
        if (m < 0 || m > base.steps) {
            throw std::invalid_argument("ablate_timestep: M out of range");
        }
        for (std::uint64_t seed : seeds) {
            PipelineConfig cfg = config_for_seed(base, seed);
            cfg.m1 = m;
            cfg.m2 = std::min(m + 5, base.steps);  // preserve the gate offset
            rows.push_back(
                make_row("timestep", "M=" + std::to_string(m), seed, run_and_score(cfg)));
        }
    }
    return rows;
}

std::vector<MetricsRow> ablate_modules(const PipelineConfig& base,
                                       const std::vector<std::uint64_t>& seeds) {
    struct Arm {
        const char* name;
        bool idaf;
        bool idap;
    };
    const Arm arms[] = {
        {"full", true, true},
        {"no-idaf", false, true},
        {"no-idap", true, false},
        {"neither", false, false},
    };
    std::vector<MetricsRow> rows;
    for (const Arm& arm : arms) {
        for (std::uint64_t seed : seeds) {
            PipelineConfig cfg = config_for_seed(base, seed);
            if (!arm.idaf) cfg.m1 = cfg.steps;
            if (!arm.idap) cfg.m2 = cfg.steps;
            rows.push_back(make_row("modules", arm.name, seed, run_and_score(cfg)));
        }
    }
    return rows;
}

std::vector<double> default_lambda_ratios() { return {1.0, 3.0, 5.0, 7.0}; }

std::vector<int> default_m_values() { return {10, 20, 30, 40}; }

std::vector<std::uint64_t> seed_list(std::uint64_t count) {
    std::vector<std::uint64_t> seeds(count);
    for (std::uint64_t i = 0; i < count; ++i) seeds[i] = i;
    return seeds;
}

std::string metrics_csv(const std::vector<MetricsRow>& rows) {
    std::ostringstream out;
    out << "run_id,cell,seed,identity_score,semantic_score,identity_fraction\n";
    for (const MetricsRow& row : rows) {
        out << row.run_id << ',' << row.cell << ',' << row.seed << ','
            << format_metric(row.identity_score) << ',' << format_metric(row.semantic_score)
            << ',' << format_metric(row.identity_fraction) << '\n';
    }
    return out.str();
}

double mean_of(const std::vector<double>& xs) {
    double acc = 0.0;
    for (double x : xs) acc += x;
    return xs.empty() ? 0.0 : acc / static_cast<double>(xs.size());
}

double stderr_of(const std::vector<double>& xs) {
    if (xs.size() < 2) return 0.0;
    const double m = mean_of(xs);
    double sq = 0.0;
    for (double x : xs) sq += (x - m) * (x - m);
    const double var = sq / static_cast<double>(xs.size() - 1);
    return std::sqrt(var / static_cast<double>(xs.size()));
}

TrendReport lambda_trend_report(const std::vector<MetricsRow>& rows,
                                const std::string& low_cell, const std::string& high_cell) {
    std::vector<double> low, high, diff;
    for (const MetricsRow& row : rows) {
        if (row.cell == low_cell) low.push_back(row.identity_fraction);
        if (row.cell == high_cell) high.push_back(row.identity_fraction);
    }
    if (low.size() != high.size() || low.empty()) {
        throw std::invalid_argument("trend report: cells " + low_cell + " and " + high_cell +
                                    " must be present with matching seed counts");
    }
    diff.resize(low.size());
    for (std::size_t i = 0; i < low.size(); ++i) diff[i] = high[i] - low[i];

    TrendReport report;
    report.low_cell = low_cell;
    report.high_cell = high_cell;
    report.mean_low = mean_of(low);
    report.mean_high = mean_of(high);
    report.diff_mean = mean_of(diff);
    report.diff_stderr = stderr_of(diff);
    report.ci_lo = report.diff_mean - 1.96 * report.diff_stderr;
    report.ci_hi = report.diff_mean + 1.96 * report.diff_stderr;
    return report;
}

std::string trend_report_text(const TrendReport& r) {
    std::ostringstream out;
    out << "identity_fraction trend " << r.low_cell << " -> " << r.high_cell << "\n";
    out << "mean(" << r.low_cell << ") = " << format_metric(r.mean_low) << "\n";
    out << "mean(" << r.high_cell << ") = " << format_metric(r.mean_high) << "\n";
    out << "paired diff = " << format_metric(r.diff_mean) << " +- "
        << format_metric(r.diff_stderr) << " (stderr)\n";
    out << "95% CI = [" << format_metric(r.ci_lo) << ", " << format_metric(r.ci_hi) << "]\n";
    out << "ci_excludes_zero = " << (r.excludes_zero() ? "yes" : "no") << "\n";
    return out.str();
}

RenderResult render_outputs(const std::vector<Tensor>& samples,
                            const std::vector<IndexTensor>& masks,
                            const std::string& path_prefix) {
    RenderResult result;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const Tensor& s = samples[i];
        if (s.rank() != 3 || s.dim(0) != 3) {
            throw std::invalid_argument("render: sample " + std::to_string(i) +
                                        " must be (3,H,W), got " + shape_str(s.shape()));
        }
        const std::size_t h = s.dim(1);
        const std::size_t w = s.dim(2);
        double vmax = 0.0;
        for (std::size_t j = 0; j < s.numel(); ++j) vmax = std::max(vmax, std::fabs(s[j]));

        std::vector<std::uint8_t> rgb(h * w * 3);
        for (std::size_t r = 0; r < h; ++r) {
            for (std::size_t col = 0; col < w; ++col) {
                for (std::size_t c = 0; c < 3; ++c) {
                    rgb[(r * w + col) * 3 + c] = affine_byte(s[(c * h + r) * w + col], vmax);
                }
            }
        }
        const std::string path = path_prefix + "_sample" + std::to_string(i) + ".png";
        write_png_rgb8(path, w, h, rgb);
        result.files.push_back(path);
        result.vmax_values.push_back(vmax);
    }

    for (std::size_t i = 0; i < masks.size(); ++i) {
        const IndexTensor& m = masks[i];
        if (m.shape.size() != 4) {
            throw std::invalid_argument("render: mask " + std::to_string(i) +
                                        " must be (B,C,H,W)");
        }
        const std::size_t h = m.shape[2];
        const std::size_t w = m.shape[3];
        // The mask is constant across channels; channel 0 carries it.
        std::vector<std::uint8_t> gray(h * w);
        for (std::size_t p = 0; p < h * w; ++p) {
            gray[p] = m.data[p] == 0 ? 0 : 255;
        }
        const std::string path = path_prefix + "_mask" + std::to_string(i) + ".png";
        write_png_gray8(path, w, h, gray);
        result.files.push_back(path);
    }
    return result;
}

}  // namespace dualline
