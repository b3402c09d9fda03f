#pragma once

#include <cstdint>
#include <initializer_list>
#include <span>
#include <vector>

namespace cwa {

// Dense row-major float32 array. The single numeric substrate shared by
// the model, the file format and the attribution code.
class Tensor {
public:
    Tensor() = default;

    // Zero-filled tensor of the given shape.
    explicit Tensor(std::vector<std::int64_t> shape);

    Tensor(std::vector<std::int64_t> shape, std::vector<float> data);

    static Tensor zeros(std::vector<std::int64_t> shape) { return Tensor(std::move(shape)); }
    static Tensor full(std::vector<std::int64_t> shape, float value);
    static Tensor vec(std::initializer_list<float> values);
    static Tensor matrix(std::initializer_list<std::initializer_list<float>> rows);

    const std::vector<std::int64_t>& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::int64_t dim(std::size_t axis) const;
    std::int64_t numel() const { return static_cast<std::int64_t>(data_.size()); }

    float operator[](std::int64_t i) const { return data_[static_cast<std::size_t>(i)]; }
    float& operator[](std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }

    // 2-D access, row-major.
    float at(std::int64_t r, std::int64_t c) const;
    float& at(std::int64_t r, std::int64_t c);

    std::span<const float> row(std::int64_t r) const;
    std::span<float> row(std::int64_t r);

    const std::vector<float>& data() const { return data_; }
    std::vector<float>& data() { return data_; }

    bool all_finite() const;
    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

private:
    std::vector<std::int64_t> shape_;
    std::vector<float> data_;
};

// a[m,k] * b[k,n]. Accumulation over k is fixed left to right so repeated
// runs are bit-identical. Throws DimensionError on shape mismatch.
Tensor matmul(const Tensor& a, const Tensor& b);

// Max-subtracted softmax over a 1-D tensor. Throws DimensionError on an
// empty input.
Tensor softmax(const Tensor& v);

// In-place softmax over a raw slice. Shared by the tensor overload and
// the attention inner loop.
void softmax_inplace(std::span<float> v);

// out[j] = gamma[j] * v[j] / sqrt(mean(v^2) + eps).
Tensor rmsnorm(const Tensor& v, const Tensor& gamma, float eps);

// The denominator rmsnorm divides by: sqrt(mean(v^2) + eps).
float rms_denom(const Tensor& v, float eps);
float rms_denom(std::span<const float> v, float eps);

// out[j] = gamma[j] * v[j] / denom. Linear in v for fixed denom, which is
// what makes per-component logit contributions additive. Throws
// DomainError when denom <= 0.
Tensor rmsnorm_frozen(const Tensor& v, const Tensor& gamma, float denom);

// x * sigmoid(x), elementwise.
Tensor silu(const Tensor& v);

// Gated feed-forward: w_down(silu(x*w_gate) ⊙ (x*w_up)) + b_down.
// x may be [d] or [s,d]; b_down is broadcast over rows.
Tensor gated_ff(const Tensor& x, const Tensor& w_gate, const Tensor& w_up,
                const Tensor& w_down, const Tensor& b_down);

Tensor add(const Tensor& a, const Tensor& b);

} // namespace cwa
