#include "cwa/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cwa/errors.hpp"

namespace cwa {

namespace {

std::int64_t shape_product(const std::vector<std::int64_t>& shape) {
    std::int64_t n = 1;
    for (std::int64_t d : shape) {
        if (d < 0) {
            throw DimensionError("negative dimension in tensor shape");
        }
        n *= d;
    }
    return n;
}

std::string shape_string(const std::vector<std::int64_t>& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

void require_vector_pair(const Tensor& v, const Tensor& gamma, const char* what) {
    if (v.rank() != 1 || gamma.rank() != 1 || v.dim(0) != gamma.dim(0) || v.dim(0) < 1) {
        throw DimensionError(std::string(what) + ": expected matching 1-D tensors, got " +
                             shape_string(v.shape()) + " and " + shape_string(gamma.shape()));
    }
}

} // namespace

Tensor::Tensor(std::vector<std::int64_t> shape)
    : shape_(std::move(shape)), data_(static_cast<std::size_t>(shape_product(shape_)), 0.0f) {}

Tensor::Tensor(std::vector<std::int64_t> shape, std::vector<float> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    if (shape_product(shape_) != static_cast<std::int64_t>(data_.size())) {
        throw DimensionError("tensor data length does not match shape " + shape_string(shape_));
    }
}

Tensor Tensor::full(std::vector<std::int64_t> shape, float value) {
    Tensor t(std::move(shape));
    std::fill(t.data_.begin(), t.data_.end(), value);
    return t;
}

Tensor Tensor::vec(std::initializer_list<float> values) {
    return Tensor({static_cast<std::int64_t>(values.size())}, std::vector<float>(values));
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<float>> rows) {
    const std::int64_t m = static_cast<std::int64_t>(rows.size());
    const std::int64_t n = m > 0 ? static_cast<std::int64_t>(rows.begin()->size()) : 0;
    std::vector<float> data;
    data.reserve(static_cast<std::size_t>(m * n));
    for (const auto& row : rows) {
        if (static_cast<std::int64_t>(row.size()) != n) {
            throw DimensionError("ragged rows in matrix literal");
        }
        data.insert(data.end(), row.begin(), row.end());
    }
    return Tensor({m, n}, std::move(data));
}

std::int64_t Tensor::dim(std::size_t axis) const {
    if (axis >= shape_.size()) {
        throw DimensionError("axis out of range for shape " + shape_string(shape_));
    }
    return shape_[axis];
}

float Tensor::at(std::int64_t r, std::int64_t c) const {
    return data_[static_cast<std::size_t>(r * shape_[1] + c)];
}

float& Tensor::at(std::int64_t r, std::int64_t c) {
    return data_[static_cast<std::size_t>(r * shape_[1] + c)];
}

std::span<const float> Tensor::row(std::int64_t r) const {
    const std::int64_t n = shape_[1];
    return {data_.data() + r * n, static_cast<std::size_t>(n)};
}

std::span<float> Tensor::row(std::int64_t r) {
    const std::int64_t n = shape_[1];
    return {data_.data() + r * n, static_cast<std::size_t>(n)};
}

bool Tensor::all_finite() const {
    return std::all_of(data_.begin(), data_.end(),
                       [](float x) { return std::isfinite(x); });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2) {
        throw DimensionError("matmul expects 2-D tensors, got " + shape_string(a.shape()) +
                             " and " + shape_string(b.shape()));
    }
    const std::int64_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    if (b.dim(0) != k) {
        throw DimensionError("matmul inner dimensions disagree: " + shape_string(a.shape()) +
                             " vs " + shape_string(b.shape()));
    }
    Tensor out({m, n});
    const float* ap = a.data().data();
    const float* bp = b.data().data();
    float* op = out.data().data();
    // i,k,j loop order: for a fixed output element the k contributions
    // still arrive in increasing k, and rows of b are streamed.
    for (std::int64_t i = 0; i < m; ++i) {
        const float* arow = ap + i * k;
        float* orow = op + i * n;
        for (std::int64_t kk = 0; kk < k; ++kk) {
            const float av = arow[kk];
            const float* brow = bp + kk * n;
            for (std::int64_t j = 0; j < n; ++j) {
                orow[j] += av * brow[j];
            }
        }
    }
    return out;
}

void softmax_inplace(std::span<float> v) {
    if (v.empty()) {
        throw DimensionError("softmax of an empty vector");
    }
    float max_val = v[0];
    for (float x : v) {
        max_val = std::max(max_val, x);
    }
    float sum = 0.0f;
    for (float& x : v) {
        x = std::exp(x - max_val);
        sum += x;
    }
    const float inv = 1.0f / sum;
    for (float& x : v) {
        x *= inv;
    }
}

Tensor softmax(const Tensor& v) {
    if (v.rank() != 1) {
        throw DimensionError("softmax expects a 1-D tensor, got " + shape_string(v.shape()));
    }
    Tensor out = v;
    softmax_inplace(std::span<float>(out.data().data(), out.data().size()));
    return out;
}

float rms_denom(std::span<const float> v, float eps) {
    // Mean of squares accumulated in double; the residual-stream vectors
    // this sees are small but the denominator feeds every attribution.
    double sum_sq = 0.0;
    for (float x : v) {
        sum_sq += static_cast<double>(x) * static_cast<double>(x);
    }
    return std::sqrt(static_cast<float>(sum_sq / static_cast<double>(v.size())) + eps);
}

float rms_denom(const Tensor& v, float eps) {
    if (v.rank() != 1 || v.dim(0) < 1) {
        throw DimensionError("rms_denom expects a nonempty 1-D tensor");
    }
    return rms_denom(std::span<const float>(v.data().data(), v.data().size()), eps);
}

Tensor rmsnorm(const Tensor& v, const Tensor& gamma, float eps) {
    require_vector_pair(v, gamma, "rmsnorm");
    return rmsnorm_frozen(v, gamma, rms_denom(v, eps));
}

Tensor rmsnorm_frozen(const Tensor& v, const Tensor& gamma, float denom) {
    require_vector_pair(v, gamma, "rmsnorm_frozen");
    if (!(denom > 0.0f)) {
        throw DomainError("rmsnorm_frozen requires a positive denominator");
    }
    Tensor out({v.dim(0)});
    const float inv = 1.0f / denom;
    for (std::int64_t j = 0; j < v.dim(0); ++j) {
        out[j] = gamma[j] * v[j] * inv;
    }
    return out;
}

Tensor silu(const Tensor& v) {
    Tensor out = v;
    for (float& x : out.data()) {
        x = x / (1.0f + std::exp(-x));
    }
    return out;
}

Tensor gated_ff(const Tensor& x, const Tensor& w_gate, const Tensor& w_up,
                const Tensor& w_down, const Tensor& b_down) {
    const bool vector_input = x.rank() == 1;
    Tensor lifted;
    if (vector_input) {
        lifted = Tensor({1, x.dim(0)}, x.data());
    }
    const Tensor& xm = vector_input ? lifted : x;
    if (xm.rank() != 2) {
        throw DimensionError("gated_ff expects a 1-D or 2-D input");
    }
    if (b_down.rank() != 1 || b_down.dim(0) != w_down.dim(1)) {
        throw DimensionError("gated_ff bias does not match the down projection");
    }
    Tensor gate = matmul(xm, w_gate);
    const Tensor up = matmul(xm, w_up);
    // gate <- silu(gate) ⊙ up
    for (std::size_t i = 0; i < gate.data().size(); ++i) {
        const float g = gate.data()[i];
        gate.data()[i] = g / (1.0f + std::exp(-g)) * up.data()[i];
    }
    Tensor out = matmul(gate, w_down);
    for (std::int64_t r = 0; r < out.dim(0); ++r) {
        auto row = out.row(r);
        for (std::int64_t j = 0; j < out.dim(1); ++j) {
            row[static_cast<std::size_t>(j)] += b_down[j];
        }
    }
    if (vector_input) {
        return Tensor({out.dim(1)}, std::move(out.data()));
    }
    return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) {
        throw DimensionError("add expects identical shapes, got " + shape_string(a.shape()) +
                             " and " + shape_string(b.shape()));
    }
    Tensor out = a;
    for (std::size_t i = 0; i < out.data().size(); ++i) {
        out.data()[i] += b.data()[i];
    }
    return out;
}

} // namespace cwa
