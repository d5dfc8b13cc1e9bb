#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "mmlm/bytes.hpp"
#include "mmlm/errors.hpp"
#include "mmlm/rng.hpp"

namespace mmlm {

inline std::string shape_string(const std::vector<size_t>& shape) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
    os << "]";
    return os.str();
}

// Dense row-major tensor with an optional gradient buffer of the same shape.
// Handle semantics: copies share storage, which is what the tape needs so
// that gradients written during backward are visible to whoever holds the
// parameter. Cloning is always explicit.
template <class T>
class Tensor {
  public:
    Tensor() = default;

    static Tensor zeros(std::vector<size_t> shape, bool requires_grad = false) {
        Tensor t;
        t.impl_ = std::make_shared<Impl>();
        t.impl_->shape = std::move(shape);
        t.impl_->data.assign(count(t.impl_->shape), T(0));
        t.set_requires_grad(requires_grad);
        return t;
    }

    static Tensor full(std::vector<size_t> shape, T value, bool requires_grad = false) {
        Tensor t = zeros(std::move(shape), requires_grad);
        for (auto& x : t.impl_->data) x = value;
        return t;
    }

    static Tensor from(std::vector<size_t> shape, std::vector<T> values, bool requires_grad = false) {
        if (count(shape) != values.size())
            throw ShapeError("tensor init: " + shape_string(shape) + " does not hold " +
                             std::to_string(values.size()) + " values");
        Tensor t;
        t.impl_ = std::make_shared<Impl>();
        t.impl_->shape = std::move(shape);
        t.impl_->data = std::move(values);
        t.set_requires_grad(requires_grad);
        return t;
    }

    static Tensor randn(std::vector<size_t> shape, Rng& rng, T stddev, bool requires_grad = false) {
        Tensor t = zeros(std::move(shape), requires_grad);
        for (auto& x : t.impl_->data) x = static_cast<T>(rng.next_normal()) * stddev;
        return t;
    }

    bool defined() const { return impl_ != nullptr; }

    const std::vector<size_t>& shape() const { return impl_->shape; }
    size_t rank() const { return impl_->shape.size(); }
    size_t size() const { return impl_->data.size(); }
    size_t dim(size_t i) const { return impl_->shape.at(i); }

    // 2-d conveniences; most of the model works on [rows x cols] slabs.
    size_t rows() const {
        require_rank(2);
        return impl_->shape[0];
    }
    size_t cols() const {
        require_rank(2);
        return impl_->shape[1];
    }

    T* data() { return impl_->data.data(); }
    const T* data() const { return impl_->data.data(); }
    std::vector<T>& vec() { return impl_->data; }
    const std::vector<T>& vec() const { return impl_->data; }

    T& at(size_t i) { return impl_->data[i]; }
    T at(size_t i) const { return impl_->data[i]; }

    bool requires_grad() const { return impl_ && impl_->requires_grad; }

    void set_requires_grad(bool rg) {
        impl_->requires_grad = rg;
        if (rg && impl_->grad.size() != impl_->data.size())
            impl_->grad.assign(impl_->data.size(), T(0));
        if (!rg) impl_->grad.clear();
    }

    bool has_grad() const { return impl_ && !impl_->grad.empty(); }
    T* grad() { return impl_->grad.data(); }
    const T* grad() const { return impl_->grad.data(); }
    std::vector<T>& grad_vec() { return impl_->grad; }
    const std::vector<T>& grad_vec() const { return impl_->grad; }

    void zero_grad() {
        for (auto& g : impl_->grad) g = T(0);
    }

    Tensor clone() const {
        Tensor t;
        t.impl_ = std::make_shared<Impl>(*impl_);
        return t;
    }

    bool same_storage(const Tensor& other) const { return impl_ == other.impl_; }

    void require_rank(size_t r) const {
        if (rank() != r)
            throw ShapeError("expected rank " + std::to_string(r) + " tensor, got " + shape_string(impl_->shape));
    }

    // True when every element is finite.
    bool all_finite() const {
        for (const auto& x : impl_->data)
            if (!std::isfinite(static_cast<double>(x))) return false;
        return true;
    }

  private:
    struct Impl {
        std::vector<size_t> shape;
        std::vector<T> data;
        std::vector<T> grad; // empty unless requires_grad
        bool requires_grad = false;
    };

    static size_t count(const std::vector<size_t>& shape) {
        size_t n = 1;
        for (size_t d : shape) n *= d;
        return n;
    }

    std::shared_ptr<Impl> impl_;
};

// On-disk tensor format: u64 rank, u64 per dimension, then the payload as
// little-endian f32 words in row-major order. Round trips bit-exactly for
// f32 tensors.
template <class T>
inline void write_tensor_f32(std::ostream& out, const Tensor<T>& t) {
    std::string buf;
    bytes::put_u64(buf, t.rank());
    for (size_t i = 0; i < t.rank(); ++i) bytes::put_u64(buf, t.dim(i));
    for (size_t i = 0; i < t.size(); ++i) bytes::put_f32(buf, static_cast<float>(t.at(i)));
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw DataError("tensor write failed");
}

template <class T>
inline Tensor<T> read_tensor_f32(std::istream& in) {
    bytes::Reader r(in, "tensor");
    uint64_t rank = r.u64();
    if (rank > 8) throw DataError("tensor rank " + std::to_string(rank) + " is not plausible");
    std::vector<size_t> shape(rank);
    size_t n = 1;
    for (auto& d : shape) {
        d = static_cast<size_t>(r.u64());
        n *= d;
    }
    std::vector<T> data(n);
    for (auto& x : data) x = static_cast<T>(r.f32());
    return Tensor<T>::from(std::move(shape), std::move(data));
}

} // namespace mmlm
