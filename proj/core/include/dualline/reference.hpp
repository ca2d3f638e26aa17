#pragma once

#include "dualline/mixture.hpp"
#include "dualline/schedule.hpp"
#include "dualline/tensor.hpp"

#include <span>
#include <vector>

// Independent reference semantics for every kernel plus the analytic
// density oracles. Everything here is written as explicit index loops and
// never calls the production kernels; the test suites and the oracle-check
// command compare the two paths.
namespace dualline::reference {

// Multi-index odometer; returns false once the index wraps past the end.
bool next_index(std::vector<std::size_t>& idx, const Shape& shape);

Tensor stack_new_axis(std::span<const Tensor> parts, std::size_t axis_position);
Tensor abs_elem(const Tensor& x);
Tensor reshape_rowmajor(const Tensor& x, const Shape& new_shape);
Tensor permute(const Tensor& x, const std::vector<std::size_t>& order);
Tensor mean_over_axis(const Tensor& x, std::size_t axis);
Tensor scaled_softmax_rows(const Tensor& x, double lambda);  // long double arithmetic
IndexTensor argmax_axis(const Tensor& x, std::size_t axis);
Tensor gather_axis(const Tensor& candidates, const IndexTensor& indices);
Tensor spatial_smooth(const Tensor& x, std::size_t pool_factor);
Tensor matmul_batched(const Tensor& a, const Tensor& b);

// log p_t(x_t) of the noised marginal: log sum_k w_k N(x_t; a_t mu_k, v_t I),
// up to the constant that cancels in gradients.
double log_marginal(const Tensor& x_t, int t_base, const GaussianMixture& gm,
                    const NoiseSchedule& schedule);

// -sqrt(1-alpha_bar) * grad log p_t by central differences with step h.
Tensor fd_score_eps(const Tensor& x_t, int t_base, const GaussianMixture& gm,
                    const NoiseSchedule& schedule, double h);

// E[x0 | x_t] by midpoint-grid quadrature over the full x0 space (no use of
// the closed-form posterior). points_per_dim grid points per coordinate.
Tensor posterior_mean_by_quadrature(const Tensor& x_t, int t_base,
                                    const GaussianMixture& gm,
                                    const NoiseSchedule& schedule,
                                    std::size_t points_per_dim);

}  // namespace dualline::reference
