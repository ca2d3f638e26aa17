#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace dualline {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

// Dense row-major tensor of doubles. Shapes are immutable after
// construction; kernels return fresh tensors.
class Tensor {
  public:
    Tensor() = default;
    explicit Tensor(Shape shape);
    Tensor(Shape shape, std::vector<double> data);

    static Tensor full(Shape shape, double value);

    const Shape& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t numel() const { return data_.size(); }
    std::size_t dim(std::size_t axis) const;

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::vector<double>& values() { return data_; }
    const std::vector<double>& values() const { return data_; }

    double& operator[](std::size_t flat) { return data_[flat]; }
    double operator[](std::size_t flat) const { return data_[flat]; }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  private:
    Shape shape_;
    std::vector<double> data_;
};

// Integer companion tensor produced by argmax_axis and consumed by
// gather_axis.
struct IndexTensor {
    Shape shape;
    std::vector<std::size_t> data;

    std::size_t numel() const { return data.size(); }
};

// Kernels. All are pure functions; contract violations throw
// std::invalid_argument with the offending detail in the message.

// Stacks equal-shaped tensors along a fresh axis at axis_position.
Tensor stack_new_axis(std::span<const Tensor> parts, std::size_t axis_position);

Tensor abs_elem(const Tensor& x);

// Row-major reinterpretation. new_shape may contain a single -1 entry whose
// size is inferred from the element count.
Tensor reshape(const Tensor& x, const std::vector<std::int64_t>& new_shape);
Tensor reshape(const Tensor& x, std::initializer_list<std::int64_t> new_shape);

// out.shape[j] = x.shape[order[j]]; out[J] = x[I] with I[order[j]] = J[j].
Tensor permute(const Tensor& x, const std::vector<std::size_t>& order);

// Removes `axis`, replacing it with the arithmetic mean along it.
Tensor mean_over_axis(const Tensor& x, std::size_t axis);

// x must be (R, L). out[r,l] = exp(lambda*x[r,l] - m_r) / row sum, with
// m_r = lambda * max_l x[r,l]. lambda must be positive.
Tensor scaled_softmax_rows(const Tensor& x, double lambda);

// Removes `axis`, keeping the position of the maximum. Ties resolve to the
// lowest index.
IndexTensor argmax_axis(const Tensor& x, std::size_t axis);

// candidates has a leading choice axis of size P; indices matches the
// remaining shape. out[idx] = candidates[indices[idx], idx].
Tensor gather_axis(const Tensor& candidates, const IndexTensor& indices);

// x must be (R, H, W); pool_factor must divide H and W. Non-overlapping
// average pooling followed by nearest-neighbor upsampling back to (H, W).
Tensor spatial_smooth(const Tensor& x, std::size_t pool_factor);

// a is (B, M, K); b is (B, K, P) or (K, P) broadcast over the batch.
Tensor matmul_batched(const Tensor& a, const Tensor& b);

}  // namespace dualline
