#include "dualline/diffusion.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace dualline {

namespace {

Tensor ddim_update(const Tensor& x_t, const Tensor& eps_hat, double ab_from,
                   double ab_to) {
    if (!x_t.same_shape(eps_hat)) {
        throw std::invalid_argument("ddim: x_t shape " + shape_str(x_t.shape()) +
                                    " vs eps shape " + shape_str(eps_hat.shape()));
    }
    if (!(ab_from < ab_to)) {
        throw std::invalid_argument("ddim: step must reduce noise (alpha_bar " +
                                    std::to_string(ab_from) + " -> " +
                                    std::to_string(ab_to) + ")");
    }
    const double a_from = std::sqrt(ab_from);
    const double b_from = std::sqrt(1.0 - ab_from);
    const double a_to = std::sqrt(ab_to);
    const double b_to = std::sqrt(1.0 - ab_to);
    Tensor out(x_t.shape());
    for (std::size_t i = 0; i < out.numel(); ++i) {
        const double x0 = (x_t[i] - b_from * eps_hat[i]) / a_from;
        out[i] = a_to * x0 + b_to * eps_hat[i];
    }
    return out;
}

}  // namespace

Tensor cfg_combine(const Tensor& eps_cond, const Tensor& eps_uncond, double w) {
    if (!eps_cond.same_shape(eps_uncond)) {
        throw std::invalid_argument("cfg_combine: shape " + shape_str(eps_cond.shape()) +
                                    " vs " + shape_str(eps_uncond.shape()));
    }
    if (w < 0.0) throw std::invalid_argument("cfg_combine: guidance scale must be >= 0");
    if (w == 1.0) return eps_cond;  // exact, not merely up to rounding
    if (w == 0.0) return eps_uncond;
    Tensor out(eps_cond.shape());
    for (std::size_t i = 0; i < out.numel(); ++i) {
        out[i] = eps_uncond[i] + w * (eps_cond[i] - eps_uncond[i]);
    }
    return out;
}

Tensor ddim_step(const Tensor& x_t, const Tensor& eps_hat, int t_from, int t_to,
                 const NoiseSchedule& schedule) {
    return ddim_update(x_t, eps_hat, schedule.alpha_bar_at(t_from),
                       schedule.alpha_bar_at(t_to));
}

Tensor ddim_step_final(const Tensor& x_t, const Tensor& eps_hat, int t_from,
                       const NoiseSchedule& schedule) {
    return ddim_update(x_t, eps_hat, schedule.alpha_bar_at(t_from), 1.0);
}

}  // namespace dualline
