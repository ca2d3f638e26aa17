#pragma once

#include "dualline/schedule.hpp"
#include "dualline/tensor.hpp"

namespace dualline {

// eps_uncond + w*(eps_cond - eps_uncond).
Tensor cfg_combine(const Tensor& eps_cond, const Tensor& eps_uncond, double w);

// Deterministic DDIM update (eta = 0) from base index t_from to t_to;
// t_from must be noisier (alpha_bar_from < alpha_bar_to).
Tensor ddim_step(const Tensor& x_t, const Tensor& eps_hat, int t_from, int t_to,
                 const NoiseSchedule& schedule);

// Final update with the alpha_bar -> 1 convention: returns the x0 estimate
// (x_t - sqrt(1-alpha_bar_from)*eps_hat) / sqrt(alpha_bar_from).
Tensor ddim_step_final(const Tensor& x_t, const Tensor& eps_hat, int t_from,
                       const NoiseSchedule& schedule);

}  // namespace dualline
