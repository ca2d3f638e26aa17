#include "dualline/reference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace dualline::reference {

namespace {

std::size_t flat_index(const std::vector<std::size_t>& idx, const Shape& shape) {
    std::size_t flat = 0;
    for (std::size_t d = 0; d < shape.size(); ++d) flat = flat * shape[d] + idx[d];
    return flat;
}

}  // namespace

bool next_index(std::vector<std::size_t>& idx, const Shape& shape) {
    for (std::size_t d = shape.size(); d-- > 0;) {
        if (++idx[d] < shape[d]) return true;
        idx[d] = 0;
    }
    return false;
}

Tensor stack_new_axis(std::span<const Tensor> parts, std::size_t axis_position) {
    if (parts.empty()) throw std::invalid_argument("reference stack: no parts");
    const Shape& base = parts[0].shape();
    Shape out_shape = base;
    out_shape.insert(out_shape.begin() + static_cast<std::ptrdiff_t>(axis_position),
                     parts.size());
    Tensor out(out_shape);
    if (out.numel() == 0) return out;

    std::vector<std::size_t> idx(out_shape.size(), 0);
    do {
        const std::size_t part = idx[axis_position];
        std::vector<std::size_t> src_idx;
        for (std::size_t d = 0; d < idx.size(); ++d) {
            if (d != axis_position) src_idx.push_back(idx[d]);
        }
        out[flat_index(idx, out_shape)] = parts[part][flat_index(src_idx, base)];
    } while (next_index(idx, out_shape));
    return out;
}

Tensor abs_elem(const Tensor& x) {
    Tensor out(x.shape());
    for (std::size_t i = 0; i < x.numel(); ++i) out[i] = x[i] < 0 ? -x[i] : x[i];
    return out;
}

Tensor reshape_rowmajor(const Tensor& x, const Shape& new_shape) {
    if (shape_numel(new_shape) != x.numel()) {
        throw std::invalid_argument("reference reshape: element count mismatch");
    }
    return Tensor(new_shape, x.values());
}

Tensor permute(const Tensor& x, const std::vector<std::size_t>& order) {
    const std::size_t r = x.rank();
    Shape out_shape(r);
    for (std::size_t j = 0; j < r; ++j) out_shape[j] = x.shape()[order[j]];
    Tensor out(out_shape);
    if (out.numel() == 0) return out;

    std::vector<std::size_t> idx(r, 0);
    do {
        std::vector<std::size_t> dst_idx(r);
        for (std::size_t j = 0; j < r; ++j) dst_idx[j] = idx[order[j]];
        out[flat_index(dst_idx, out_shape)] = x[flat_index(idx, x.shape())];
    } while (next_index(idx, x.shape()));
    return out;
}

Tensor mean_over_axis(const Tensor& x, std::size_t axis) {
    const std::size_t n = x.shape()[axis];
    Shape out_shape = x.shape();
    out_shape.erase(out_shape.begin() + static_cast<std::ptrdiff_t>(axis));
    Tensor out(out_shape);

    std::vector<std::size_t> idx(out_shape.size(), 0);
    if (out.numel() == 0) return out;
    do {
        std::vector<std::size_t> src_idx = idx;
        src_idx.insert(src_idx.begin() + static_cast<std::ptrdiff_t>(axis), 0);
        double acc = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            src_idx[axis] = k;
            acc += x[flat_index(src_idx, x.shape())];
        }
        out[flat_index(idx, out_shape)] = acc / static_cast<double>(n);
    } while (next_index(idx, out_shape));
    return out;
}

Tensor scaled_softmax_rows(const Tensor& x, double lambda) {
    const std::size_t rows = x.shape()[0];
    const std::size_t cols = x.shape()[1];
    Tensor out(x.shape());
    for (std::size_t r = 0; r < rows; ++r) {
        long double row_max = -std::numeric_limits<long double>::infinity();
        for (std::size_t l = 0; l < cols; ++l) {
            row_max = std::max(row_max, static_cast<long double>(x[r * cols + l]));
        }
        const long double m = static_cast<long double>(lambda) * row_max;
        long double sum = 0.0L;
        std::vector<long double> e(cols);
        for (std::size_t l = 0; l < cols; ++l) {
            e[l] = expl(static_cast<long double>(lambda) *
                            static_cast<long double>(x[r * cols + l]) -
                        m);
            sum += e[l];
        }
        for (std::size_t l = 0; l < cols; ++l) {
            out[r * cols + l] = static_cast<double>(e[l] / sum);
        }
    }
    return out;
}

IndexTensor argmax_axis(const Tensor& x, std::size_t axis) {
    const std::size_t n = x.shape()[axis];
    Shape out_shape = x.shape();
    out_shape.erase(out_shape.begin() + static_cast<std::ptrdiff_t>(axis));

    IndexTensor out;
    out.shape = out_shape;
    out.data.assign(shape_numel(out_shape), 0);
    if (out.numel() == 0) return out;

    std::vector<std::size_t> idx(out_shape.size(), 0);
    std::size_t flat = 0;
    do {
        std::vector<std::size_t> src_idx = idx;
        src_idx.insert(src_idx.begin() + static_cast<std::ptrdiff_t>(axis), 0);
        std::size_t best = 0;
        double best_v = x[flat_index(src_idx, x.shape())];
        for (std::size_t k = 1; k < n; ++k) {
            src_idx[axis] = k;
            const double v = x[flat_index(src_idx, x.shape())];
            if (v > best_v) {
                best_v = v;
                best = k;
            }
        }
        out.data[flat_index(idx, out_shape)] = best;
        ++flat;
    } while (next_index(idx, out_shape));
    return out;
}

Tensor gather_axis(const Tensor& candidates, const IndexTensor& indices) {
    Shape rest(candidates.shape().begin() + 1, candidates.shape().end());
    Tensor out(rest);
    if (out.numel() == 0) return out;
    std::vector<std::size_t> idx(rest.size(), 0);
    do {
        const std::size_t pos = flat_index(idx, rest);
        std::vector<std::size_t> src_idx;
        src_idx.push_back(indices.data[pos]);
        for (std::size_t v : idx) src_idx.push_back(v);
        out[pos] = candidates[flat_index(src_idx, candidates.shape())];
    } while (next_index(idx, rest));
    return out;
}

Tensor spatial_smooth(const Tensor& x, std::size_t pool_factor) {
    const std::size_t maps = x.shape()[0];
    const std::size_t h = x.shape()[1];
    const std::size_t w = x.shape()[2];
    Tensor out(x.shape());
    for (std::size_t r = 0; r < maps; ++r) {
        for (std::size_t i = 0; i < h; ++i) {
            for (std::size_t j = 0; j < w; ++j) {
                const std::size_t bh = (i / pool_factor) * pool_factor;
                const std::size_t bw = (j / pool_factor) * pool_factor;
                double acc = 0.0;
                for (std::size_t dy = 0; dy < pool_factor; ++dy) {
                    for (std::size_t dx = 0; dx < pool_factor; ++dx) {
                        acc += x[(r * h + bh + dy) * w + bw + dx];
                    }
                }
                out[(r * h + i) * w + j] =
                    acc / static_cast<double>(pool_factor * pool_factor);
            }
        }
    }
    return out;
}

Tensor matmul_batched(const Tensor& a, const Tensor& b) {
    const std::size_t batch = a.shape()[0];
    const std::size_t m = a.shape()[1];
    const std::size_t k = a.shape()[2];
    const bool broadcast = b.rank() == 2;
    const std::size_t p = broadcast ? b.shape()[1] : b.shape()[2];

    Tensor out(Shape{batch, m, p});
    for (std::size_t bi = 0; bi < batch; ++bi) {
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j < p; ++j) {
                double acc = 0.0;
                for (std::size_t t = 0; t < k; ++t) {
                    const double lhs = a[(bi * m + i) * k + t];
                    const double rhs = broadcast ? b[t * p + j] : b[(bi * k + t) * p + j];
                    acc += lhs * rhs;
                }
                out[(bi * m + i) * p + j] = acc;
            }
        }
    }
    return out;
}

double log_marginal(const Tensor& x_t, int t_base, const GaussianMixture& gm,
                    const NoiseSchedule& schedule) {
    const double ab = schedule.alpha_bar_at(t_base);
    const double a = std::sqrt(ab);
    const double v = (1.0 - ab) + ab * gm.variance;
    const std::size_t n = x_t.numel();

    double max_term = -std::numeric_limits<double>::infinity();
    std::vector<double> terms;
    terms.reserve(gm.means.size());
    for (std::size_t k = 0; k < gm.means.size(); ++k) {
        if (gm.weights[k] == 0.0) continue;
        double sq = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double d = x_t[i] - a * gm.means[k][i];
            sq += d * d;
        }
        const double term = std::log(gm.weights[k]) - sq / (2.0 * v);
        terms.push_back(term);
        max_term = std::max(max_term, term);
    }
    double sum = 0.0;
    for (double term : terms) sum += std::exp(term - max_term);
    const double log_norm =
        -0.5 * static_cast<double>(n) * std::log(2.0 * 3.14159265358979323846 * v);
    return max_term + std::log(sum) + log_norm;
}

Tensor fd_score_eps(const Tensor& x_t, int t_base, const GaussianMixture& gm,
                    const NoiseSchedule& schedule, double h) {
    const double ab = schedule.alpha_bar_at(t_base);
    const double scale = -std::sqrt(1.0 - ab);
    Tensor out(x_t.shape());
    Tensor probe = x_t;
    for (std::size_t i = 0; i < x_t.numel(); ++i) {
        const double orig = probe[i];
        probe[i] = orig + h;
        const double up = log_marginal(probe, t_base, gm, schedule);
        probe[i] = orig - h;
        const double down = log_marginal(probe, t_base, gm, schedule);
        probe[i] = orig;
        out[i] = scale * (up - down) / (2.0 * h);
    }
    return out;
}

Tensor posterior_mean_by_quadrature(const Tensor& x_t, int t_base,
                                    const GaussianMixture& gm,
                                    const NoiseSchedule& schedule,
                                    std::size_t points_per_dim) {
    if (!(gm.variance > 0.0)) {
        throw std::invalid_argument("quadrature: needs a positive mixture variance");
    }
    const double ab = schedule.alpha_bar_at(t_base);
    const double a = std::sqrt(ab);
    const double b2 = 1.0 - ab;
    const double sigma = std::sqrt(gm.variance);
    const std::size_t n = x_t.numel();

    // Per-coordinate integration windows: intersect the likelihood support
    // around x_t/a with the prior support around the component means.
    std::vector<double> lo(n), hi(n), step(n);
    const double like_half = 10.0 * std::sqrt(b2) / a;
    for (std::size_t i = 0; i < n; ++i) {
        double mu_min = std::numeric_limits<double>::infinity();
        double mu_max = -std::numeric_limits<double>::infinity();
        for (const Tensor& mu : gm.means) {
            mu_min = std::min(mu_min, mu[i]);
            mu_max = std::max(mu_max, mu[i]);
        }
        const double prior_lo = mu_min - 10.0 * sigma;
        const double prior_hi = mu_max + 10.0 * sigma;
        const double like_lo = x_t[i] / a - like_half;
        const double like_hi = x_t[i] / a + like_half;
        lo[i] = std::max(prior_lo, like_lo);
        hi[i] = std::min(prior_hi, like_hi);
        if (!(lo[i] < hi[i])) {  // disjoint at 10 sigma; fall back to the union
            lo[i] = std::min(prior_lo, like_lo);
            hi[i] = std::max(prior_hi, like_hi);
        }
        step[i] = (hi[i] - lo[i]) / static_cast<double>(points_per_dim);
    }

    // Streaming log-sum-exp over the grid: running max plus rescaled sums.
    double max_log = -std::numeric_limits<double>::infinity();
    double z = 0.0;
    std::vector<double> num(n, 0.0);
    std::vector<double> x0(n, 0.0);

    Shape grid_shape(n, points_per_dim);
    std::vector<std::size_t> idx(n, 0);
    do {
        for (std::size_t i = 0; i < n; ++i) {
            x0[i] = lo[i] + (static_cast<double>(idx[i]) + 0.5) * step[i];
        }
        double like_sq = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double d = x_t[i] - a * x0[i];
            like_sq += d * d;
        }
        double prior_max = -std::numeric_limits<double>::infinity();
        std::vector<double> prior_terms;
        prior_terms.reserve(gm.means.size());
        for (std::size_t k = 0; k < gm.means.size(); ++k) {
            if (gm.weights[k] == 0.0) continue;
            double sq = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double d = x0[i] - gm.means[k][i];
                sq += d * d;
            }
            const double term =
                std::log(gm.weights[k]) - sq / (2.0 * gm.variance);
            prior_terms.push_back(term);
            prior_max = std::max(prior_max, term);
        }
        double prior_sum = 0.0;
        for (double term : prior_terms) prior_sum += std::exp(term - prior_max);
        const double logw = -like_sq / (2.0 * b2) + prior_max + std::log(prior_sum);

        if (logw > max_log) {
            const double rescale = std::exp(max_log - logw);
            z *= rescale;
            for (std::size_t i = 0; i < n; ++i) num[i] *= rescale;
            max_log = logw;
        }
        const double w = std::exp(logw - max_log);
        z += w;
        for (std::size_t i = 0; i < n; ++i) num[i] += w * x0[i];
    } while (next_index(idx, grid_shape));

    Tensor out(x_t.shape());
    for (std::size_t i = 0; i < n; ++i) out[i] = num[i] / z;
    return out;
}

}  // namespace dualline::reference
