#include "dualline/idaf.hpp"

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace dualline {

namespace {

void check_noise_pair(const Tensor& eps_semantic, const Tensor& eps_identity) {
    if (!eps_semantic.same_shape(eps_identity)) {
        throw std::invalid_argument("idaf: semantic shape " +
                                    shape_str(eps_semantic.shape()) +
                                    " vs identity shape " +
                                    shape_str(eps_identity.shape()));
    }
    if (eps_semantic.rank() != 4) {
        throw std::invalid_argument("idaf: expected (B,C,H,W) noises, got " +
                                    shape_str(eps_semantic.shape()));
    }
}

std::size_t resolve_c_mid(const FusionConfig& cfg, std::size_t b, std::size_t c) {
    const std::size_t cm = cfg.c_mid == 0 ? c : cfg.c_mid;
    if (cm == 0 || (2 * b * c) % cm != 0) {
        throw std::invalid_argument("idaf: c_mid " + std::to_string(cm) +
                                    " does not divide the per-pixel element count " +
                                    std::to_string(2 * b * c));
    }
    return cm;
}

void check_lambdas(const FusionConfig& cfg) {
    if (!(cfg.lambda_semantic > 0.0) || !(cfg.lambda_identity > 0.0)) {
        throw std::invalid_argument("idaf: lambda scalers must be positive");
    }
}

}  // namespace

Tensor build_stack(const Tensor& eps_semantic, const Tensor& eps_identity) {
    check_noise_pair(eps_semantic, eps_identity);
    const std::array<Tensor, 2> parts{eps_semantic, eps_identity};
    return stack_new_axis(std::span<const Tensor>(parts.data(), parts.size()), 0);
}

Tensor saliency(const Tensor& stack, const FusionConfig& cfg) {
    if (stack.rank() != 5 || stack.dim(0) != 2) {
        throw std::invalid_argument("saliency: expected (2,B,C,H,W) stack, got " +
                                    shape_str(stack.shape()));
    }
    const std::size_t b = stack.dim(1);
    const std::size_t c = stack.dim(2);
    const std::size_t h = stack.dim(3);
    const std::size_t w = stack.dim(4);
    const std::size_t cm = resolve_c_mid(cfg, b, c);

    const Tensor magnitudes = abs_elem(stack);
    const Tensor grouped = reshape(magnitudes,
                                   {-1, static_cast<std::int64_t>(cm),
                                    static_cast<std::int64_t>(h),
                                    static_cast<std::int64_t>(w)});
    // The smoothing acts on each (H,W) slice independently, so the grouped
    // channel axis can be folded into the map axis.
    const Tensor smoothed = spatial_smooth(
        reshape(grouped, {-1, static_cast<std::int64_t>(h), static_cast<std::int64_t>(w)}),
        cfg.pool_factor);
    const Tensor restored = reshape(smoothed,
                                    {2, static_cast<std::int64_t>(b),
                                     static_cast<std::int64_t>(c),
                                     static_cast<std::int64_t>(h),
                                     static_cast<std::int64_t>(w)});
    return mean_over_axis(restored, 2);
}

Tensor branch_weights(const Tensor& sal, const FusionConfig& cfg) {
    if (sal.rank() != 4 || sal.dim(0) != 2) {
        throw std::invalid_argument("branch_weights: expected (2,B,H,W) saliency, got " +
                                    shape_str(sal.shape()));
    }
    check_lambdas(cfg);
    const std::size_t b = sal.dim(1);
    const std::size_t h = sal.dim(2);
    const std::size_t w = sal.dim(3);
    const std::size_t per_branch = b * h * w;

    Tensor out(sal.shape());
    for (std::size_t branch = 0; branch < 2; ++branch) {
        const double lambda =
            branch == kSemanticBranch ? cfg.lambda_semantic : cfg.lambda_identity;
        Tensor rows(Shape{b, h * w},
                    std::vector<double>(sal.data() + branch * per_branch,
                                        sal.data() + (branch + 1) * per_branch));
        const Tensor soft = scaled_softmax_rows(rows, lambda);
        double* dst = out.data() + branch * per_branch;
        for (std::size_t i = 0; i < per_branch; ++i) dst[i] = soft[i];
    }
    return out;
}

FusionReport fuse(const Tensor& eps_semantic, const Tensor& eps_identity,
                  const FusionConfig& cfg) {
    const Tensor stack = build_stack(eps_semantic, eps_identity);
    const Tensor sal = saliency(stack, cfg);
    const Tensor weights = branch_weights(sal, cfg);

    const std::size_t b = stack.dim(1);
    const std::size_t c = stack.dim(2);
    const std::size_t h = stack.dim(3);
    const std::size_t w = stack.dim(4);

    // Broadcast the per-pixel weights across the channel axis.
    Tensor weights_full(Shape{2, b, c, h, w});
    for (std::size_t branch = 0; branch < 2; ++branch) {
        for (std::size_t bi = 0; bi < b; ++bi) {
            const double* src = weights.data() + (branch * b + bi) * h * w;
            for (std::size_t ci = 0; ci < c; ++ci) {
                double* dst = weights_full.data() + (((branch * b + bi) * c) + ci) * h * w;
                for (std::size_t p = 0; p < h * w; ++p) dst[p] = src[p];
            }
        }
    }

    FusionReport report;
    report.decision_mask = argmax_axis(weights_full, 0);
    report.fused = gather_axis(stack, report.decision_mask);

    std::size_t identity_count = 0;
    for (std::size_t v : report.decision_mask.data) identity_count += v;
    report.identity_fraction = static_cast<double>(identity_count) /
                               static_cast<double>(report.decision_mask.numel());
    return report;
}

FusionReport fuse_reference(const Tensor& eps_semantic, const Tensor& eps_identity,
                            const FusionConfig& cfg) {
    check_noise_pair(eps_semantic, eps_identity);
    check_lambdas(cfg);
    const std::size_t b = eps_semantic.dim(0);
    const std::size_t c = eps_semantic.dim(1);
    const std::size_t h = eps_semantic.dim(2);
    const std::size_t w = eps_semantic.dim(3);
    resolve_c_mid(cfg, b, c);
    const std::size_t pf = cfg.pool_factor;
    if (pf == 0 || h % pf != 0 || w % pf != 0) {
        throw std::invalid_argument("idaf: pool_factor " + std::to_string(pf) +
                                    " does not divide spatial dims");
    }

    const std::size_t plane = h * w;
    const double* branches[2] = {eps_semantic.data(), eps_identity.data()};

    // Smoothed per-channel magnitudes, then channel means: saliency[i][b][p].
    std::vector<double> sal(2 * b * plane, 0.0);
    std::vector<double> smooth_plane(plane, 0.0);
    for (std::size_t branch = 0; branch < 2; ++branch) {
        for (std::size_t bi = 0; bi < b; ++bi) {
            for (std::size_t ci = 0; ci < c; ++ci) {
                const double* src = branches[branch] + (bi * c + ci) * plane;
                for (std::size_t bh = 0; bh < h; bh += pf) {
                    for (std::size_t bw = 0; bw < w; bw += pf) {
                        double acc = 0.0;
                        for (std::size_t dy = 0; dy < pf; ++dy) {
                            for (std::size_t dx = 0; dx < pf; ++dx) {
                                acc += std::fabs(src[(bh + dy) * w + (bw + dx)]);
                            }
                        }
                        const double mean = acc / static_cast<double>(pf * pf);
                        for (std::size_t dy = 0; dy < pf; ++dy) {
                            for (std::size_t dx = 0; dx < pf; ++dx) {
                                smooth_plane[(bh + dy) * w + (bw + dx)] = mean;
                            }
                        }
                    }
                }
                double* acc = sal.data() + (branch * b + bi) * plane;
                for (std::size_t p = 0; p < plane; ++p) acc[p] += smooth_plane[p];
            }
            double* acc = sal.data() + (branch * b + bi) * plane;
            for (std::size_t p = 0; p < plane; ++p) acc[p] /= static_cast<double>(c);
        }
    }

    // Per-branch scaled softmax over each batch item's pixels.
    std::vector<double> weights(2 * b * plane, 0.0);
    const double lambdas[2] = {cfg.lambda_semantic, cfg.lambda_identity};
    for (std::size_t branch = 0; branch < 2; ++branch) {
        for (std::size_t bi = 0; bi < b; ++bi) {
            const double* s = sal.data() + (branch * b + bi) * plane;
            double* dst = weights.data() + (branch * b + bi) * plane;
            double row_max = s[0];
            for (std::size_t p = 1; p < plane; ++p) row_max = std::max(row_max, s[p]);
            const double m = lambdas[branch] * row_max;
            double sum = 0.0;
            for (std::size_t p = 0; p < plane; ++p) {
                dst[p] = std::exp(lambdas[branch] * s[p] - m);
                sum += dst[p];
            }
            for (std::size_t p = 0; p < plane; ++p) dst[p] /= sum;
        }
    }

    FusionReport report;
    report.fused = Tensor(eps_semantic.shape());
    report.decision_mask.shape = eps_semantic.shape();
    report.decision_mask.data.assign(eps_semantic.numel(), 0);

    std::size_t identity_count = 0;
    for (std::size_t bi = 0; bi < b; ++bi) {
        const double* w_sem = weights.data() + (kSemanticBranch * b + bi) * plane;
        const double* w_id = weights.data() + (kIdentityBranch * b + bi) * plane;
        for (std::size_t ci = 0; ci < c; ++ci) {
            const std::size_t off = (bi * c + ci) * plane;
            for (std::size_t p = 0; p < plane; ++p) {
                const bool pick_identity = w_id[p] > w_sem[p];
                report.decision_mask.data[off + p] = pick_identity ? 1 : 0;
                report.fused[off + p] =
                    pick_identity ? eps_identity[off + p] : eps_semantic[off + p];
                identity_count += pick_identity ? 1 : 0;
            }
        }
    }
    report.identity_fraction = static_cast<double>(identity_count) /
                               static_cast<double>(report.decision_mask.numel());
    return report;
}

}  // namespace dualline
