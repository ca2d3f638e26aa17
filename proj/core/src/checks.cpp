#include "dualline/checks.hpp"

#include "dualline/idaf.hpp"
#include "dualline/mixture.hpp"
#include "dualline/reference.hpp"
#include "dualline/rng.hpp"
#include "dualline/schedule.hpp"
#include "dualline/tensor.hpp"

#include <array>
#include <cmath>
#include <cstring>
#include <sstream>

namespace dualline {

namespace {

Shape random_shape(DeterministicRng& rng, std::size_t min_rank, std::size_t max_rank,
                   std::size_t max_dim) {
    const std::size_t rank =
        min_rank + rng.next_u64() % (max_rank - min_rank + 1);
    Shape shape(rank);
    for (auto& d : shape) d = 1 + rng.next_u64() % max_dim;
    return shape;
}

Tensor random_tensor(DeterministicRng& rng, Shape shape) {
    Tensor t(std::move(shape));
    for (auto& v : t.values()) v = rng.normal();
    return t;
}

bool bitwise_equal(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) return false;
    return std::memcmp(a.data(), b.data(), a.numel() * sizeof(double)) == 0;
}

bool rel_close(const Tensor& a, const Tensor& b, double tol) {
    if (a.shape() != b.shape()) return false;
    for (std::size_t i = 0; i < a.numel(); ++i) {
        const double scale = std::max({std::fabs(a[i]), std::fabs(b[i]), 1.0});
        if (std::fabs(a[i] - b[i]) > tol * scale) return false;
    }
    return true;
}

CheckResult summarize(const std::string& name, int failures, int trials) {
    CheckResult result;
    result.name = name;
    result.pass = failures == 0;
    std::ostringstream os;
    os << (trials - failures) << "/" << trials << " instances matched";
    result.detail = os.str();
    return result;
}

}  // namespace

std::vector<CheckResult> run_kernel_oracle_suite(int trials_per_op, std::uint64_t seed) {
    std::vector<CheckResult> results;
    DeterministicRng rng(seed);

    {  // stack_new_axis
        int failures = 0;
        for (int t = 0; t < trials_per_op; ++t) {
            const Shape shape = random_shape(rng, 1, 4, 8);
            const std::size_t parts_n = 1 + rng.next_u64() % 3;
            std::vector<Tensor> parts;
            for (std::size_t j = 0; j < parts_n; ++j) parts.push_back(random_tensor(rng, shape));
            const std::size_t axis = rng.next_u64() % (shape.size() + 1);
            const std::span<const Tensor> view(parts.data(), parts.size());
            if (!bitwise_equal(stack_new_axis(view, axis),
                               reference::stack_new_axis(view, axis))) {
                ++failures;
            }
        }
        results.push_back(summarize("stack_new_axis", failures, trials_per_op));
    }

    {  // abs_elem
        int failures = 0;
        for (int t = 0; t < trials_per_op; ++t) {
            const Tensor x = random_tensor(rng, random_shape(rng, 1, 5, 8));
            if (!bitwise_equal(abs_elem(x), reference::abs_elem(x))) ++failures;
        }
        results.push_back(summarize("abs_elem", failures, trials_per_op));
    }

    {  // reshape (round trip through a flattened shape)
        int failures = 0;
        for (int t = 0; t < trials_per_op; ++t) {
            const Tensor x = random_tensor(rng, random_shape(rng, 2, 5, 8));
            const std::vector<std::int64_t> flat{-1,
                                                 static_cast<std::int64_t>(x.shape().back())};
            const Tensor once = reshape(x, flat);
            const Shape target(x.shape().begin(), x.shape().end());
            const Tensor back = reshape(once, std::vector<std::int64_t>(target.begin(),
                                                                        target.end()));
            if (!bitwise_equal(back, reference::reshape_rowmajor(x, x.shape()))) ++failures;
        }
        results.push_back(summarize("reshape", failures, trials_per_op));
    }

    {  // permute
        int failures = 0;
        for (int t = 0; t < trials_per_op; ++t) {
            const Tensor x = random_tensor(rng, random_shape(rng, 1, 5, 8));
            std::vector<std::size_t> order(x.rank());
            for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
            for (std::size_t i = order.size(); i > 1; --i) {
                std::swap(order[i - 1], order[rng.next_u64() % i]);
            }
            if (!bitwise_equal(permute(x, order), reference::permute(x, order))) ++failures;
        }
        results.push_back(summarize("permute", failures, trials_per_op));
    }

    {  // mean_over_axis
        int failures = 0;
        for (int t = 0; t < trials_per_op; ++t) {
            const Tensor x = random_tensor(rng, random_shape(rng, 1, 5, 8));
            const std::size_t axis = rng.next_u64() % x.rank();
            if (!rel_close(mean_over_axis(x, axis), reference::mean_over_axis(x, axis),
                           1e-12)) {
                ++failures;
            }
        }
        results.push_back(summarize("mean_over_axis", failures, trials_per_op));
    }

    {  // scaled_softmax_rows
        int failures = 0;
        const std::array<double, 4> lambdas{0.5, 1.0, 3.0, 7.0};
        for (int t = 0; t < trials_per_op; ++t) {
            Shape shape{1 + rng.next_u64() % 8, 1 + rng.next_u64() % 8};
            const Tensor x = random_tensor(rng, shape);
            const double lambda = lambdas[rng.next_u64() % lambdas.size()];
            if (!rel_close(scaled_softmax_rows(x, lambda),
                           reference::scaled_softmax_rows(x, lambda), 1e-12)) {
                ++failures;
            }
        }
        results.push_back(summarize("scaled_softmax_rows", failures, trials_per_op));
    }

    {  // argmax_axis
        int failures = 0;
        for (int t = 0; t < trials_per_op; ++t) {
            const Tensor x = random_tensor(rng, random_shape(rng, 1, 5, 8));
            const std::size_t axis = rng.next_u64() % x.rank();
            const IndexTensor got = argmax_axis(x, axis);
            const IndexTensor want = reference::argmax_axis(x, axis);
            if (got.shape != want.shape || got.data != want.data) ++failures;
        }
        results.push_back(summarize("argmax_axis", failures, trials_per_op));
    }

    {  // gather_axis
        int failures = 0;
        for (int t = 0; t < trials_per_op; ++t) {
            Shape shape = random_shape(rng, 2, 5, 8);
            const Tensor x = random_tensor(rng, shape);
            IndexTensor idx;
            idx.shape = Shape(shape.begin() + 1, shape.end());
            idx.data.resize(shape_numel(idx.shape));
            for (auto& v : idx.data) v = rng.next_u64() % shape[0];
            if (!bitwise_equal(gather_axis(x, idx), reference::gather_axis(x, idx))) {
                ++failures;
            }
        }
        results.push_back(summarize("gather_axis", failures, trials_per_op));
    }

    {  // spatial_smooth
        int failures = 0;
        const std::array<std::size_t, 3> factors{1, 2, 4};
        for (int t = 0; t < trials_per_op; ++t) {
            const std::size_t pf = factors[rng.next_u64() % factors.size()];
            const std::size_t maps = 1 + rng.next_u64() % 4;
            const std::size_t h = pf * (1 + rng.next_u64() % 4);
            const std::size_t w = pf * (1 + rng.next_u64() % 4);
            const Tensor x = random_tensor(rng, Shape{maps, h, w});
            if (!rel_close(spatial_smooth(x, pf), reference::spatial_smooth(x, pf), 1e-12)) {
                ++failures;
            }
        }
        results.push_back(summarize("spatial_smooth", failures, trials_per_op));
    }

    {  // matmul_batched
        int failures = 0;
        for (int t = 0; t < trials_per_op; ++t) {
            const std::size_t b = 1 + rng.next_u64() % 3;
            const std::size_t m = 1 + rng.next_u64() % 6;
            const std::size_t k = 1 + rng.next_u64() % 6;
            const std::size_t p = 1 + rng.next_u64() % 6;
            const Tensor a = random_tensor(rng, Shape{b, m, k});
            const bool broadcast = (rng.next_u64() & 1) != 0;
            const Tensor rhs = broadcast ? random_tensor(rng, Shape{k, p})
                                         : random_tensor(rng, Shape{b, k, p});
            if (!rel_close(matmul_batched(a, rhs), reference::matmul_batched(a, rhs),
                           1e-12)) {
                ++failures;
            }
        }
        results.push_back(summarize("matmul_batched", failures, trials_per_op));
    }

    return results;
}

std::vector<CheckResult> run_fusion_equivalence_suite(int trials, std::uint64_t seed) {
    DeterministicRng rng(seed);
    const std::array<double, 4> lambdas{1.0, 3.0, 5.0, 7.0};
    const std::array<std::size_t, 3> factors{1, 2, 4};

    int mask_failures = 0;
    int value_failures = 0;
    for (int t = 0; t < trials; ++t) {
        const std::size_t b = 1 + rng.next_u64() % 2;
        const Shape shape{b, 3, 16, 16};
        const Tensor eps_sem = random_tensor(rng, shape);
        const Tensor eps_id = random_tensor(rng, shape);
        FusionConfig cfg;
        cfg.lambda_semantic = lambdas[rng.next_u64() % lambdas.size()];
        cfg.lambda_identity = lambdas[rng.next_u64() % lambdas.size()];
        cfg.pool_factor = factors[rng.next_u64() % factors.size()];

        const FusionReport got = fuse(eps_sem, eps_id, cfg);
        const FusionReport want = fuse_reference(eps_sem, eps_id, cfg);
        if (got.decision_mask.shape != want.decision_mask.shape ||
            got.decision_mask.data != want.decision_mask.data ||
            got.identity_fraction != want.identity_fraction) {
            ++mask_failures;
        }
        if (!bitwise_equal(got.fused, want.fused)) ++value_failures;
    }

    std::vector<CheckResult> results;
    results.push_back(summarize("fusion decision masks", mask_failures, trials));
    results.push_back(summarize("fusion values bitwise", value_failures, trials));
    return results;
}

std::vector<CheckResult> run_score_consistency_suite(int points, std::uint64_t seed) {
    DeterministicRng rng(seed);
    const NoiseSchedule schedule = NoiseSchedule::make();
    const Shape shape{1, 4, 4};

    int failures = 0;
    double worst = 0.0;
    for (int p = 0; p < points; ++p) {
        const std::size_t comps = 1 + rng.next_u64() % 4;
        GaussianMixture gm;
        gm.variance = 0.01 + 0.2 * rng.uniform01();
        double wsum = 0.0;
        std::vector<double> raw(comps);
        for (auto& w : raw) {
            w = 0.1 + rng.uniform01();
            wsum += w;
        }
        for (double w : raw) gm.weights.push_back(w / wsum);
        // Renormalize exactly so validate() accepts the simplex.
        double correction = 0.0;
        for (double w : gm.weights) correction += w;
        gm.weights.back() += 1.0 - correction;
        for (std::size_t k = 0; k < comps; ++k) {
            Tensor mu(shape);
            for (auto& v : mu.values()) v = 2.0 * rng.normal();
            gm.means.push_back(std::move(mu));
        }

        const int t_base = 50 + static_cast<int>(rng.next_u64() % 900);
        Tensor x(shape);
        for (auto& v : x.values()) v = rng.normal();

        const Tensor direct = eps_predict(x, t_base, gm, schedule);
        const Tensor fd = reference::fd_score_eps(x, t_base, gm, schedule, 1e-4);

        double num = 0.0, den = 0.0;
        for (std::size_t i = 0; i < direct.numel(); ++i) {
            num += (direct[i] - fd[i]) * (direct[i] - fd[i]);
            den += fd[i] * fd[i];
        }
        const double rel = std::sqrt(num) / std::max(std::sqrt(den), 1e-12);
        worst = std::max(worst, rel);
        if (rel > 1e-4) ++failures;
    }

    CheckResult result;
    result.name = "eps_predict vs finite-difference score";
    result.pass = failures == 0;
    std::ostringstream os;
    os << (points - failures) << "/" << points << " points within 1e-4 (worst rel err "
       << worst << ")";
    result.detail = os.str();
    return {result};
}

bool all_passed(const std::vector<CheckResult>& results) {
    for (const auto& r : results) {
        if (!r.pass) return false;
    }
    return true;
}

}  // namespace dualline
