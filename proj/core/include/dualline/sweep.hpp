#pragma once

#include "dualline/metrics.hpp"
#include "dualline/pipeline.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace dualline {

// Derives fully independent per-run seeds from one sweep seed. The query
// bank stays fixed: it plays the role of frozen parameters.
PipelineConfig config_for_seed(PipelineConfig base, std::uint64_t seed);

struct RunMetrics {
    double identity = 0.0;
    double semantic = 0.0;
    double fraction = 0.0;
};

// One full pipeline run followed by scoring against the run's own world.
RunMetrics run_and_score(const PipelineConfig& cfg);

// Sweeps. Rows come back sorted by (cell, seed); identity_fraction is the
// mean over fusion-active steps.
std::vector<MetricsRow> ablate_lambda(const PipelineConfig& base,
                                      const std::vector<double>& identity_ratios,
                                      const std::vector<std::uint64_t>& seeds);
std::vector<MetricsRow> ablate_timestep(const PipelineConfig& base,
                                        const std::vector<int>& m_values,
                                        const std::vector<std::uint64_t>& seeds);
std::vector<MetricsRow> ablate_modules(const PipelineConfig& base,
                                       const std::vector<std::uint64_t>& seeds);

std::vector<double> default_lambda_ratios();  // 1, 3, 5, 7 (identity side of 1:x)
std::vector<int> default_m_values();          // 10, 20, 30, 40
std::vector<std::uint64_t> seed_list(std::uint64_t count);

// Fixed column order: run_id, cell, seed, identity_score, semantic_score,
// identity_fraction.
std::string metrics_csv(const std::vector<MetricsRow>& rows);

struct TrendReport {
    std::string low_cell, high_cell;
    double mean_low = 0.0;
    double mean_high = 0.0;
    double diff_mean = 0.0;
    double diff_stderr = 0.0;
    double ci_lo = 0.0;  // 95% CI of (high - low)
    double ci_hi = 0.0;
    bool excludes_zero() const { return ci_lo > 0.0; }
};

// Paired comparison of mean identity_fraction between the extreme lambda
// ratio cells of an ablate_lambda result.
TrendReport lambda_trend_report(const std::vector<MetricsRow>& rows,
                                const std::string& low_cell, const std::string& high_cell);
std::string trend_report_text(const TrendReport& report);

struct RenderResult {
    std::vector<std::string> files;
    std::vector<double> vmax_values;  // one per sample PNG
};

// PNG per sample (path_prefix + "_sample<i>.png"), gray 0/255 PNG per
// decision mask (path_prefix + "_mask<i>.png"). Samples must be (B,3,H,W).
RenderResult render_outputs(const std::vector<Tensor>& samples,
                            const std::vector<IndexTensor>& masks,
                            const std::string& path_prefix);

// Mean / sample standard error helpers shared by reports and tests.
double mean_of(const std::vector<double>& xs);
double stderr_of(const std::vector<double>& xs);

}  // namespace dualline
