#include "dualline/tensor.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>
#include <utility>

namespace dualline {

namespace {

[[noreturn]] void fail(const std::string& msg) {
    throw std::invalid_argument(msg);
}

Shape row_major_strides(const Shape& shape) {
    Shape strides(shape.size(), 1);
    for (std::size_t d = shape.size(); d-- > 1;) {
        strides[d - 1] = strides[d] * shape[d];
    }
    return strides;
}

}  // namespace

std::size_t shape_numel(const Shape& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '(';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ',';
        os << shape[i];
    }
    os << ')';
    return os.str();
}

Tensor::Tensor(Shape shape)
    : shape_(std::move(shape)), data_(shape_numel(shape_), 0.0) {}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != shape_numel(shape_)) {
        fail("tensor: data length " + std::to_string(data_.size()) +
             " does not match shape " + shape_str(shape_));
    }
}

Tensor Tensor::full(Shape shape, double value) {
    Tensor t(std::move(shape));
    for (auto& v : t.data_) v = value;
    return t;
}

std::size_t Tensor::dim(std::size_t axis) const {
    if (axis >= shape_.size()) {
        fail("tensor: axis " + std::to_string(axis) + " out of range for shape " +
             shape_str(shape_));
    }
    return shape_[axis];
}

Tensor stack_new_axis(std::span<const Tensor> parts, std::size_t axis_position) {
    if (parts.empty()) fail("stack_new_axis: need at least one part");
    const Shape& base = parts[0].shape();
    for (std::size_t j = 1; j < parts.size(); ++j) {
        if (parts[j].shape() != base) {
            fail("stack_new_axis: part " + std::to_string(j) + " has shape " +
                 shape_str(parts[j].shape()) + ", expected " + shape_str(base));
        }
    }
    if (axis_position > base.size()) {
        fail("stack_new_axis: axis_position " + std::to_string(axis_position) +
             " exceeds rank " + std::to_string(base.size()));
    }

    Shape out_shape = base;
    out_shape.insert(out_shape.begin() + static_cast<std::ptrdiff_t>(axis_position),
                     parts.size());
    Tensor out(out_shape);

    std::size_t outer = 1, inner = 1;
    for (std::size_t d = 0; d < axis_position; ++d) outer *= base[d];
    for (std::size_t d = axis_position; d < base.size(); ++d) inner *= base[d];

    double* dst = out.data();
    for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t j = 0; j < parts.size(); ++j) {
            const double* src = parts[j].data() + o * inner;
            for (std::size_t i = 0; i < inner; ++i) *dst++ = src[i];
        }
    }
    return out;
}

Tensor abs_elem(const Tensor& x) {
    Tensor out(x.shape());
    for (std::size_t i = 0; i < x.numel(); ++i) out[i] = std::fabs(x[i]);
    return out;
}

Tensor reshape(const Tensor& x, const std::vector<std::int64_t>& new_shape) {
    Shape resolved(new_shape.size());
    std::size_t known = 1;
    std::ptrdiff_t infer = -1;
    for (std::size_t d = 0; d < new_shape.size(); ++d) {
        if (new_shape[d] == -1) {
            if (infer >= 0) fail("reshape: more than one inferred dimension");
            infer = static_cast<std::ptrdiff_t>(d);
        } else if (new_shape[d] <= 0) {
            fail("reshape: dimension " + std::to_string(d) + " must be positive or -1");
        } else {
            resolved[d] = static_cast<std::size_t>(new_shape[d]);
            known *= resolved[d];
        }
    }
    if (infer >= 0) {
        if (known == 0 || x.numel() % known != 0) {
            fail("reshape: cannot infer dimension for " + std::to_string(x.numel()) +
                 " elements");
        }
        resolved[static_cast<std::size_t>(infer)] = x.numel() / known;
    } else if (known != x.numel()) {
        fail("reshape: target element count " + std::to_string(known) +
             " does not match " + std::to_string(x.numel()));
    }
    return Tensor(std::move(resolved), x.values());
}

Tensor reshape(const Tensor& x, std::initializer_list<std::int64_t> new_shape) {
    return reshape(x, std::vector<std::int64_t>(new_shape));
}

Tensor permute(const Tensor& x, const std::vector<std::size_t>& order) {
    const std::size_t r = x.rank();
    if (order.size() != r) {
        fail("permute: order length " + std::to_string(order.size()) +
             " does not match rank " + std::to_string(r));
    }
    std::vector<bool> seen(r, false);
    for (std::size_t v : order) {
        if (v >= r || seen[v]) fail("permute: order is not a permutation of 0.." +
                                    std::to_string(r ? r - 1 : 0));
        seen[v] = true;
    }

    Shape out_shape(r);
    for (std::size_t j = 0; j < r; ++j) out_shape[j] = x.shape()[order[j]];
    Tensor out(out_shape);
    if (x.numel() == 0) return out;

    const Shape in_strides = row_major_strides(x.shape());
    const Shape out_strides = row_major_strides(out_shape);

    // Walk the output in row-major order; map each output index J to the
    // input offset via I[order[j]] = J[j].
    std::vector<std::size_t> idx(r, 0);
    for (std::size_t flat = 0; flat < out.numel(); ++flat) {
        std::size_t src = 0;
        for (std::size_t j = 0; j < r; ++j) src += idx[j] * in_strides[order[j]];
        out[flat] = x[src];
        for (std::size_t d = r; d-- > 0;) {
            if (++idx[d] < out_shape[d]) break;
            idx[d] = 0;
        }
    }
    (void)out_strides;
    return out;
}

Tensor mean_over_axis(const Tensor& x, std::size_t axis) {
    if (axis >= x.rank()) {
        fail("mean_over_axis: axis " + std::to_string(axis) +
             " out of range for shape " + shape_str(x.shape()));
    }
    const std::size_t n = x.shape()[axis];
    if (n == 0) fail("mean_over_axis: axis has size 0");

    Shape out_shape = x.shape();
    out_shape.erase(out_shape.begin() + static_cast<std::ptrdiff_t>(axis));
    Tensor out(out_shape);

    std::size_t outer = 1, inner = 1;
    for (std::size_t d = 0; d < axis; ++d) outer *= x.shape()[d];
    for (std::size_t d = axis + 1; d < x.rank(); ++d) inner *= x.shape()[d];

    for (std::size_t o = 0; o < outer; ++o) {
        const double* base = x.data() + o * n * inner;
        double* dst = out.data() + o * inner;
        for (std::size_t i = 0; i < inner; ++i) {
            double acc = 0.0;
            for (std::size_t k = 0; k < n; ++k) acc += base[k * inner + i];
            dst[i] = acc / static_cast<double>(n);
        }
    }
    return out;
}

Tensor scaled_softmax_rows(const Tensor& x, double lambda) {
    if (x.rank() != 2) {
        fail("scaled_softmax_rows: expected rank-2 input, got " + shape_str(x.shape()));
    }
    if (!(lambda > 0.0)) {
        fail("scaled_softmax_rows: lambda must be positive, got " + std::to_string(lambda));
    }
    const std::size_t rows = x.shape()[0];
    const std::size_t cols = x.shape()[1];
    if (cols == 0) fail("scaled_softmax_rows: empty rows");

    Tensor out(x.shape());
    for (std::size_t r = 0; r < rows; ++r) {
        const double* in = x.data() + r * cols;
        double* dst = out.data() + r * cols;
        double row_max = in[0];
        for (std::size_t l = 1; l < cols; ++l) row_max = std::max(row_max, in[l]);
        const double m = lambda * row_max;
        double sum = 0.0;
        for (std::size_t l = 0; l < cols; ++l) {
            dst[l] = std::exp(lambda * in[l] - m);
            sum += dst[l];
        }
        for (std::size_t l = 0; l < cols; ++l) dst[l] /= sum;
    }
    return out;
}

IndexTensor argmax_axis(const Tensor& x, std::size_t axis) {
    if (axis >= x.rank()) {
        fail("argmax_axis: axis " + std::to_string(axis) + " out of range for shape " +
             shape_str(x.shape()));
    }
    const std::size_t n = x.shape()[axis];
    if (n == 0) fail("argmax_axis: axis has size 0");

    Shape out_shape = x.shape();
    out_shape.erase(out_shape.begin() + static_cast<std::ptrdiff_t>(axis));

    IndexTensor out;
    out.shape = out_shape;
    out.data.assign(shape_numel(out_shape), 0);

    std::size_t outer = 1, inner = 1;
    for (std::size_t d = 0; d < axis; ++d) outer *= x.shape()[d];
    for (std::size_t d = axis + 1; d < x.rank(); ++d) inner *= x.shape()[d];

    for (std::size_t o = 0; o < outer; ++o) {
        const double* base = x.data() + o * n * inner;
        std::size_t* dst = out.data.data() + o * inner;
        for (std::size_t i = 0; i < inner; ++i) {
            std::size_t best = 0;
            double best_v = base[i];
            for (std::size_t k = 1; k < n; ++k) {
                const double v = base[k * inner + i];
                if (v > best_v) {
                    best_v = v;
                    best = k;
                }
            }
            dst[i] = best;
        }
    }
    return out;
}

Tensor gather_axis(const Tensor& candidates, const IndexTensor& indices) {
    if (candidates.rank() == 0) fail("gather_axis: candidates must have a choice axis");
    const std::size_t p = candidates.shape()[0];
    Shape rest(candidates.shape().begin() + 1, candidates.shape().end());
    if (indices.shape != rest) {
        fail("gather_axis: indices shape " + shape_str(indices.shape) +
             " does not match candidate item shape " + shape_str(rest));
    }
    const std::size_t inner = shape_numel(rest);
    Tensor out(rest);
    for (std::size_t i = 0; i < inner; ++i) {
        const std::size_t j = indices.data[i];
        if (j >= p) {
            fail("gather_axis: index " + std::to_string(j) + " at position " +
                 std::to_string(i) + " out of range for " + std::to_string(p) +
                 " candidates");
        }
        out[i] = candidates[j * inner + i];
    }
    return out;
}

Tensor spatial_smooth(const Tensor& x, std::size_t pool_factor) {
    if (x.rank() != 3) {
        fail("spatial_smooth: expected rank-3 (R,H,W) input, got " + shape_str(x.shape()));
    }
    if (pool_factor == 0) fail("spatial_smooth: pool_factor must be positive");
    const std::size_t maps = x.shape()[0];
    const std::size_t h = x.shape()[1];
    const std::size_t w = x.shape()[2];
    if (h % pool_factor != 0 || w % pool_factor != 0) {
        fail("spatial_smooth: pool_factor " + std::to_string(pool_factor) +
             " does not divide spatial dims " + shape_str(x.shape()));
    }

    Tensor out(x.shape());
    const double denom = static_cast<double>(pool_factor * pool_factor);
    for (std::size_t r = 0; r < maps; ++r) {
        const double* src = x.data() + r * h * w;
        double* dst = out.data() + r * h * w;
        for (std::size_t bh = 0; bh < h; bh += pool_factor) {
            for (std::size_t bw = 0; bw < w; bw += pool_factor) {
                double acc = 0.0;
                for (std::size_t dy = 0; dy < pool_factor; ++dy) {
                    for (std::size_t dx = 0; dx < pool_factor; ++dx) {
                        acc += src[(bh + dy) * w + (bw + dx)];
                    }
                }
                const double mean = acc / denom;
                for (std::size_t dy = 0; dy < pool_factor; ++dy) {
                    for (std::size_t dx = 0; dx < pool_factor; ++dx) {
                        dst[(bh + dy) * w + (bw + dx)] = mean;
                    }
                }
            }
        }
    }
    return out;
}

Tensor matmul_batched(const Tensor& a, const Tensor& b) {
    if (a.rank() != 3) {
        fail("matmul_batched: left operand must be (B,M,K), got " + shape_str(a.shape()));
    }
    const std::size_t batch = a.shape()[0];
    const std::size_t m = a.shape()[1];
    const std::size_t k = a.shape()[2];

    std::size_t p = 0;
    bool broadcast = false;
    if (b.rank() == 3) {
        if (b.shape()[0] != batch || b.shape()[1] != k) {
            fail("matmul_batched: right operand " + shape_str(b.shape()) +
                 " incompatible with left " + shape_str(a.shape()));
        }
        p = b.shape()[2];
    } else if (b.rank() == 2) {
        if (b.shape()[0] != k) {
            fail("matmul_batched: right operand " + shape_str(b.shape()) +
                 " incompatible with left " + shape_str(a.shape()));
        }
        p = b.shape()[1];
        broadcast = true;
    } else {
        fail("matmul_batched: right operand must be rank 2 or 3, got " +
             shape_str(b.shape()));
    }

    Tensor out(Shape{batch, m, p});
    for (std::size_t bi = 0; bi < batch; ++bi) {
        const double* pa = a.data() + bi * m * k;
        const double* pb = b.data() + (broadcast ? 0 : bi * k * p);
        double* pc = out.data() + bi * m * p;
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j < p; ++j) {
                double acc = 0.0;
                for (std::size_t t = 0; t < k; ++t) acc += pa[i * k + t] * pb[t * p + j];
                pc[i * p + j] = acc;
            }
        }
    }
    return out;
}

}  // namespace dualline
