#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "mmlm/errors.hpp"
#include "mmlm/tensor.hpp"

namespace mmlm {

template <class T>
struct NamedTensor {
    std::string name;
    Tensor<T> value;
};

template <class T>
using ParamList = std::vector<NamedTensor<T>>;

template <class T>
struct AdamWConfig {
    T beta1 = T(0.9);
    T beta2 = T(0.98);
    T eps = T(1e-6);
    T weight_decay = T(0.01);
};

// AdamW with bias correction and decoupled weight decay. The decay term is
// lr * wd * theta applied next to the moment update, never mixed into the
// gradient, so moments stay decay-free. Parameters that do not require
// gradients (frozen) are excluded entirely: no moments, no decay.
template <class T>
class AdamW {
  public:
    AdamW(ParamList<T> params, AdamWConfig<T> cfg = {}) : cfg_(cfg) {
        for (auto& p : params) {
            if (!p.value.requires_grad()) continue;
            Slot s;
            s.name = p.name;
            s.param = p.value;
            s.m = Tensor<T>::zeros(p.value.shape());
            s.v = Tensor<T>::zeros(p.value.shape());
            slots_.push_back(std::move(s));
        }
    }

    int64_t step_count() const { return t_; }
    const AdamWConfig<T>& config() const { return cfg_; }

    void zero_grad() {
        for (auto& s : slots_) s.param.zero_grad();
    }

    // One update with the given learning rate. Throws before touching any
    // parameter if a gradient is not finite.
    void step(T lr) {
        for (const auto& s : slots_) {
            const T* g = s.param.grad();
            for (size_t i = 0; i < s.param.size(); ++i)
                if (!std::isfinite(static_cast<double>(g[i])))
                    throw NumericError("non-finite gradient in parameter " + s.name);
        }
        ++t_;
        const T bc1 = T(1) - std::pow(cfg_.beta1, static_cast<T>(t_));
        const T bc2 = T(1) - std::pow(cfg_.beta2, static_cast<T>(t_));
        for (auto& s : slots_) {
            T* p = s.param.data();
            const T* g = s.param.grad();
            T* m = s.m.data();
            T* v = s.v.data();
            for (size_t i = 0; i < s.param.size(); ++i) {
                m[i] = cfg_.beta1 * m[i] + (T(1) - cfg_.beta1) * g[i];
                v[i] = cfg_.beta2 * v[i] + (T(1) - cfg_.beta2) * g[i] * g[i];
                const T mhat = m[i] / bc1;
                const T vhat = v[i] / bc2;
                const T upd = mhat / (std::sqrt(vhat) + cfg_.eps) + cfg_.weight_decay * p[i];
                p[i] = p[i] - lr * upd;
            }
        }
    }

    // Optimizer state for checkpointing: first and second moments per slot,
    // in registration order.
    struct SlotView {
        const std::string& name;
        Tensor<T>& m;
        Tensor<T>& v;
    };
    template <class Fn>
    void visit_state(Fn&& fn) {
        for (auto& s : slots_) fn(SlotView{s.name, s.m, s.v});
    }

    void set_step_count(int64_t t) {
        if (t < 0) throw DataError("optimizer step count must be nonnegative");
        t_ = t;
    }

    size_t slot_count() const { return slots_.size(); }

  private:
    struct Slot {
        std::string name;
        Tensor<T> param;
        Tensor<T> m, v;
    };

    AdamWConfig<T> cfg_;
    std::vector<Slot> slots_;
    int64_t t_ = 0;
};

} // namespace mmlm
