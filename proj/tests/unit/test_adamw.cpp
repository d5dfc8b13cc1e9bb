#include <doctest.h>

#include <cmath>
#include <vector>

#include "mmlm/adamw.hpp"
#include "mmlm/rng.hpp"

using namespace mmlm;

TEST_CASE("adamw matches a scalar long-double oracle") {
    // independent recurrence written directly from the update equations
    const long double beta1 = 0.9L, beta2 = 0.98L, eps = 1e-6L, wd = 0.01L, lr = 3e-3L;
    long double p_ref = 0.7L, m_ref = 0.0L, v_ref = 0.0L;

    Tensor<double> p = Tensor<double>::from({1}, {0.7}, true);
    AdamWConfig<double> cfg;
    cfg.beta1 = 0.9;
    cfg.beta2 = 0.98;
    cfg.eps = 1e-6;
    cfg.weight_decay = 0.01;
    AdamW<double> opt({{"p", p}}, cfg);

    Rng rng(123);
    for (int t = 1; t <= 50; ++t) {
        const double g = rng.next_normal();
        p.grad()[0] = g;
        opt.step(3e-3);

        m_ref = beta1 * m_ref + (1.0L - beta1) * g;
        v_ref = beta2 * v_ref + (1.0L - beta2) * g * g;
        const long double mhat = m_ref / (1.0L - std::pow(beta1, static_cast<long double>(t)));
        const long double vhat = v_ref / (1.0L - std::pow(beta2, static_cast<long double>(t)));
        p_ref = p_ref - lr * (mhat / (std::sqrt(vhat) + eps) + wd * p_ref);

        CHECK(p.at(0) == doctest::Approx(static_cast<double>(p_ref)).epsilon(1e-12));
        p.zero_grad();
    }
    CHECK(opt.step_count() == 50);
}

TEST_CASE("weight decay is decoupled: zero gradient still decays") {
    Tensor<double> p = Tensor<double>::from({1}, {1.0}, true);
    AdamW<double> opt({{"p", p}}, {});
    const double lr = 0.1;
    double expect = 1.0;
    for (int t = 0; t < 5; ++t) {
        opt.step(lr);
        expect *= (1.0 - lr * 0.01);
        CHECK(p.at(0) == doctest::Approx(expect).epsilon(1e-14));
    }
}

TEST_CASE("first step moves by roughly lr in the gradient direction") {
    Tensor<double> p = Tensor<double>::from({1}, {0.0}, true);
    AdamWConfig<double> cfg;
    cfg.weight_decay = 0.0;
    AdamW<double> opt({{"p", p}}, cfg);
    p.grad()[0] = 2.5; // bias-corrected first step is g / (|g| + eps)
    opt.step(1e-2);
    CHECK(p.at(0) == doctest::Approx(-1e-2).epsilon(1e-5));
}

TEST_CASE("frozen parameters are not registered or updated") {
    Tensor<double> train = Tensor<double>::from({1}, {1.0}, true);
    Tensor<double> frozen = Tensor<double>::from({1}, {1.0}, false);
    AdamW<double> opt({{"train", train}, {"frozen", frozen}}, {});
    CHECK(opt.slot_count() == 1);
    train.grad()[0] = 1.0;
    opt.step(0.1);
    CHECK(frozen.at(0) == 1.0);
    CHECK(train.at(0) != 1.0);
}

TEST_CASE("non-finite gradients abort with the parameter name") {
    Tensor<double> a = Tensor<double>::from({2}, {1.0, 2.0}, true);
    Tensor<double> b = Tensor<double>::from({1}, {3.0}, true);
    AdamW<double> opt({{"alpha", a}, {"beta", b}}, {});
    b.grad()[0] = std::nan("");
    const double a0 = a.at(0);
    try {
        opt.step(0.1);
        FAIL("expected NumericError");
    } catch (const NumericError& e) {
        CHECK(std::string(e.what()).find("beta") != std::string::npos);
    }
    // nothing was touched: the check runs before any update
    CHECK(a.at(0) == a0);
    CHECK(opt.step_count() == 0);
}
