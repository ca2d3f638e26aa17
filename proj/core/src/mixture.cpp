#include "dualline/mixture.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace dualline {

void GaussianMixture::validate() const {
    if (means.empty()) throw std::invalid_argument("mixture: needs at least one component");
    if (weights.size() != means.size()) {
        throw std::invalid_argument("mixture: " + std::to_string(weights.size()) +
                                    " weights for " + std::to_string(means.size()) +
                                    " components");
    }
    double sum = 0.0;
    for (double w : weights) {
        if (w < 0.0) throw std::invalid_argument("mixture: negative weight");
        sum += w;
    }
    if (std::fabs(sum - 1.0) > 1e-12) {
        throw std::invalid_argument("mixture: weights sum to " + std::to_string(sum));
    }
    if (variance < 0.0) throw std::invalid_argument("mixture: negative variance");
    for (std::size_t k = 1; k < means.size(); ++k) {
        if (means[k].shape() != means[0].shape()) {
            throw std::invalid_argument("mixture: component " + std::to_string(k) +
                                        " shape mismatch");
        }
    }
}

const Shape& GaussianMixture::mean_shape() const {
    if (means.empty()) throw std::invalid_argument("mixture: no components");
    return means[0].shape();
}

Tensor forward_noise(const Tensor& x0, int t_base, const Tensor& eps,
                     const NoiseSchedule& schedule) {
    if (!x0.same_shape(eps)) {
        throw std::invalid_argument("forward_noise: x0 shape " + shape_str(x0.shape()) +
                                    " vs eps shape " + shape_str(eps.shape()));
    }
    const double ab = schedule.alpha_bar_at(t_base);
    const double a = std::sqrt(ab);
    const double b = std::sqrt(1.0 - ab);
    Tensor out(x0.shape());
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] = a * x0[i] + b * eps[i];
    return out;
}

Tensor posterior_x0(const Tensor& x_t, int t_base, const GaussianMixture& gm,
                    const NoiseSchedule& schedule) {
    gm.validate();
    if (x_t.shape() != gm.mean_shape()) {
        throw std::invalid_argument("posterior_x0: x_t shape " + shape_str(x_t.shape()) +
                                    " vs component shape " + shape_str(gm.mean_shape()));
    }
    const double ab = schedule.alpha_bar_at(t_base);
    const double a = std::sqrt(ab);
    const double v = (1.0 - ab) + ab * gm.variance;
    const std::size_t n = x_t.numel();
    const std::size_t comps = gm.means.size();

    // Log responsibilities, stabilized by the running max.
    std::vector<double> logr(comps, -std::numeric_limits<double>::infinity());
    double max_logr = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < comps; ++k) {
        if (gm.weights[k] == 0.0) continue;
        double sq = 0.0;
        const double* mu = gm.means[k].data();
        for (std::size_t i = 0; i < n; ++i) {
            const double d = x_t[i] - a * mu[i];
            sq += d * d;
        }
        logr[k] = std::log(gm.weights[k]) - sq / (2.0 * v);
        max_logr = std::max(max_logr, logr[k]);
    }

    double z = 0.0;
    std::vector<double> resp(comps, 0.0);
    for (std::size_t k = 0; k < comps; ++k) {
        if (gm.weights[k] == 0.0) continue;
        resp[k] = std::exp(logr[k] - max_logr);
        z += resp[k];
    }

    const double shrink = gm.variance * a / v;
    Tensor out(x_t.shape());
    for (std::size_t k = 0; k < comps; ++k) {
        if (resp[k] == 0.0) continue;
        const double r = resp[k] / z;
        const double* mu = gm.means[k].data();
        for (std::size_t i = 0; i < n; ++i) {
            out[i] += r * (mu[i] + shrink * (x_t[i] - a * mu[i]));
        }
    }
    return out;
}

Tensor eps_predict(const Tensor& x_t, int t_base, const GaussianMixture& gm,
                   const NoiseSchedule& schedule) {
    const double ab = schedule.alpha_bar_at(t_base);
    if (ab >= 1.0) {
        throw std::invalid_argument("eps_predict: alpha_bar must be < 1");
    }
    const Tensor x0 = posterior_x0(x_t, t_base, gm, schedule);
    const double a = std::sqrt(ab);
    const double b = std::sqrt(1.0 - ab);
    Tensor out(x_t.shape());
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] = (x_t[i] - a * x0[i]) / b;
    return out;
}

}  // namespace dualline
