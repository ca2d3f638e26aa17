#pragma once

#include "dualline/schedule.hpp"
#include "dualline/tensor.hpp"

#include <vector>

namespace dualline {

// Weighted isotropic Gaussian mixture over (C,H,W) images. Serves as the
// data law behind the exact epsilon predictor; variance may be zero for
// point-mass components.
struct GaussianMixture {
    std::vector<double> weights;
    std::vector<Tensor> means;
    double variance = 0.0;  // shared isotropic sigma0^2

    void validate() const;
    const Shape& mean_shape() const;
};

// sqrt(alpha_bar)*x0 + sqrt(1-alpha_bar)*eps at base index t_base.
Tensor forward_noise(const Tensor& x0, int t_base, const Tensor& eps,
                     const NoiseSchedule& schedule);

// Exact posterior mean E[x0 | x_t] under the mixture prior and the VP
// forward kernel. With a_t = sqrt(alpha_bar) and
// v_t = (1 - alpha_bar) + alpha_bar*sigma0^2:
//   r_k proportional to w_k * exp(-|x_t - a_t mu_k|^2 / (2 v_t)),
//   mhat_k = mu_k + (sigma0^2 a_t / v_t) (x_t - a_t mu_k).
Tensor posterior_x0(const Tensor& x_t, int t_base, const GaussianMixture& gm,
                    const NoiseSchedule& schedule);

// (x_t - sqrt(alpha_bar)*posterior_x0) / sqrt(1-alpha_bar); equals
// -sqrt(1-alpha_bar) * grad log p_t(x_t) for the induced marginal.
Tensor eps_predict(const Tensor& x_t, int t_base, const GaussianMixture& gm,
                   const NoiseSchedule& schedule);

}  // namespace dualline
