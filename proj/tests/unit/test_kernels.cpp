#include <doctest.h>

#include <cmath>
#include <cstring>
#include <vector>

#include "mmlm/kernels.hpp"
#include "mmlm/rng.hpp"

using namespace mmlm;

namespace {

// Independent reference: naive triple loop in extended precision.
std::vector<long double> ref_matmul(const std::vector<double>& a, const std::vector<double>& b, size_t m,
                                    size_t k, size_t n) {
    std::vector<long double> c(m * n, 0.0L);
    for (size_t i = 0; i < m; ++i)
        for (size_t j = 0; j < n; ++j) {
            long double acc = 0.0L;
            for (size_t p = 0; p < k; ++p) acc += static_cast<long double>(a[i * k + p]) * b[p * n + j];
            c[i * n + j] = acc;
        }
    return c;
}

std::vector<double> random_vec(size_t n, uint64_t seed) {
    Rng rng(seed);
    std::vector<double> v(n);
    for (auto& x : v) x = rng.next_normal();
    return v;
}

} // namespace

TEST_CASE("matmul matches extended-precision reference") {
    const size_t m = 7, k = 13, n = 5;
    auto a = random_vec(m * k, 1);
    auto b = random_vec(k * n, 2);
    std::vector<double> c(m * n);
    kernels::matmul(a.data(), b.data(), c.data(), m, k, n);
    auto ref = ref_matmul(a, b, m, k, n);
    for (size_t i = 0; i < c.size(); ++i)
        CHECK(std::fabs(c[i] - static_cast<double>(ref[i])) < 1e-12);
}

TEST_CASE("matmul_acc accumulates on top of existing values") {
    const size_t m = 3, k = 4, n = 2;
    auto a = random_vec(m * k, 3);
    auto b = random_vec(k * n, 4);
    std::vector<double> c(m * n, 1.5);
    kernels::matmul_acc(a.data(), b.data(), c.data(), m, k, n);
    auto ref = ref_matmul(a, b, m, k, n);
    for (size_t i = 0; i < c.size(); ++i)
        CHECK(std::fabs(c[i] - (1.5 + static_cast<double>(ref[i]))) < 1e-12);
}

TEST_CASE("matmul_nt multiplies by the transpose") {
    const size_t m = 6, k = 9, n = 4;
    auto a = random_vec(m * k, 5);
    auto bt = random_vec(n * k, 6); // stored [n x k]
    std::vector<double> c(m * n);
    kernels::matmul_nt(a.data(), bt.data(), c.data(), m, k, n);
    // reference: b[k x n] with b[p][j] = bt[j][p]
    std::vector<double> b(k * n);
    for (size_t p = 0; p < k; ++p)
        for (size_t j = 0; j < n; ++j) b[p * n + j] = bt[j * k + p];
    auto ref = ref_matmul(a, b, m, k, n);
    for (size_t i = 0; i < c.size(); ++i)
        CHECK(std::fabs(c[i] - static_cast<double>(ref[i])) < 1e-12);
}

TEST_CASE("matmul_tn_acc accumulates a-transpose times b") {
    const size_t m = 4, k = 7, n = 3;
    auto a = random_vec(k * m, 7); // stored [k x m]
    auto b = random_vec(k * n, 8);
    std::vector<double> c(m * n, 0.0);
    kernels::matmul_tn_acc(a.data(), b.data(), c.data(), m, k, n);
    std::vector<double> at(m * k);
    for (size_t p = 0; p < k; ++p)
        for (size_t i = 0; i < m; ++i) at[i * k + p] = a[p * m + i];
    auto ref = ref_matmul(at, b, m, k, n);
    for (size_t i = 0; i < c.size(); ++i)
        CHECK(std::fabs(c[i] - static_cast<double>(ref[i])) < 1e-12);
}

TEST_CASE("softmax rows match an extended-precision oracle") {
    const size_t rows = 3, width = 11;
    auto x = random_vec(rows * width, 9);
    std::vector<double> out(rows * width);
    kernels::softmax_rows(x.data(), out.data(), rows, width);
    for (size_t i = 0; i < rows; ++i) {
        long double sum = 0.0L;
        for (size_t j = 0; j < width; ++j) sum += std::exp(static_cast<long double>(x[i * width + j]));
        double row_total = 0.0;
        for (size_t j = 0; j < width; ++j) {
            const long double ref = std::exp(static_cast<long double>(x[i * width + j])) / sum;
            CHECK(std::fabs(out[i * width + j] - static_cast<double>(ref)) < 1e-13);
            row_total += out[i * width + j];
        }
        CHECK(std::fabs(row_total - 1.0) < 1e-12);
    }
}

TEST_CASE("softmax is stable under large offsets") {
    std::vector<double> x = {1000.0, 1001.0, 999.0};
    std::vector<double> out(3);
    kernels::softmax_rows(x.data(), out.data(), 1, 3);
    std::vector<double> y = {0.0, 1.0, -1.0};
    std::vector<double> out2(3);
    kernels::softmax_rows(y.data(), out2.data(), 1, 3);
    for (size_t i = 0; i < 3; ++i) CHECK(out[i] == doctest::Approx(out2[i]).epsilon(1e-12));
}

TEST_CASE("softmax over an empty axis is an error") {
    std::vector<double> x;
    CHECK_THROWS_AS(kernels::softmax_rows(x.data(), x.data(), 1, 0), ShapeError);
}

TEST_CASE("log softmax agrees with softmax") {
    const size_t width = 17;
    auto x = random_vec(width, 10);
    std::vector<double> sm(width), lsm(width);
    kernels::softmax_rows(x.data(), sm.data(), 1, width);
    kernels::log_softmax_row(x.data(), lsm.data(), width);
    for (size_t j = 0; j < width; ++j) CHECK(std::exp(lsm[j]) == doctest::Approx(sm[j]).epsilon(1e-12));
}

TEST_CASE("masked softmax ignores excluded entries completely") {
    const size_t rows = 2, width = 5;
    auto x = random_vec(rows * width, 11);
    std::vector<uint8_t> allowed = {1, 1, 0, 1, 0, 0, 1, 1, 1, 1};
    std::vector<double> out(rows * width);
    kernels::masked_softmax_rows(x.data(), allowed.data(), out.data(), rows, width);

    // poke excluded entries with wild values; allowed outputs must be
    // bitwise identical
    auto x2 = x;
    x2[2] = 1e30;
    x2[4] = -1e30;
    x2[5] = std::nan("");
    std::vector<double> out2(rows * width);
    kernels::masked_softmax_rows(x2.data(), allowed.data(), out2.data(), rows, width);
    for (size_t i = 0; i < rows * width; ++i) {
        if (allowed[i]) {
            CHECK(std::memcmp(&out[i], &out2[i], sizeof(double)) == 0);
        } else {
            CHECK(out[i] == 0.0);
            CHECK(out2[i] == 0.0);
        }
    }

    // each row sums to one over allowed entries
    for (size_t i = 0; i < rows; ++i) {
        double s = 0.0;
        for (size_t j = 0; j < width; ++j) s += out[i * width + j];
        CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("masked softmax with an empty row is an error") {
    std::vector<double> x = {1.0, 2.0};
    std::vector<uint8_t> allowed = {0, 0};
    std::vector<double> out(2);
    CHECK_THROWS_AS(kernels::masked_softmax_rows(x.data(), allowed.data(), out.data(), 1, 2), ShapeError);
}

TEST_CASE("masked weighted sum never reads excluded values") {
    const size_t rows = 2, width = 3, dim = 4;
    auto p = random_vec(rows * width, 12);
    auto v = random_vec(width * dim, 13);
    std::vector<uint8_t> allowed = {1, 0, 1, 1, 1, 0};
    std::vector<double> out(rows * dim);
    kernels::masked_weighted_sum(p.data(), allowed.data(), v.data(), out.data(), rows, width, dim);

    auto p2 = p;
    p2[1] = std::nan("");
    p2[5] = 1e308;
    std::vector<double> out2(rows * dim);
    kernels::masked_weighted_sum(p2.data(), allowed.data(), v.data(), out2.data(), rows, width, dim);
    CHECK(std::memcmp(out.data(), out2.data(), out.size() * sizeof(double)) == 0);

    // oracle for the first row: entries 0 and 2
    for (size_t d = 0; d < dim; ++d) {
        const double ref = p[0] * v[0 * dim + d] + p[2] * v[2 * dim + d];
        CHECK(out[d] == doctest::Approx(ref).epsilon(1e-12));
    }
}

TEST_CASE("layer norm matches a direct computation") {
    const size_t rows = 4, width = 8;
    auto x = random_vec(rows * width, 14);
    auto g = random_vec(width, 15);
    auto b = random_vec(width, 16);
    const double eps = 1e-5;
    std::vector<double> out(rows * width), mean(rows), inv(rows);
    kernels::layer_norm_rows(x.data(), g.data(), b.data(), eps, out.data(), mean.data(), inv.data(), rows,
                             width);
    for (size_t i = 0; i < rows; ++i) {
        long double mu = 0.0L;
        for (size_t j = 0; j < width; ++j) mu += x[i * width + j];
        mu /= width;
        long double var = 0.0L;
        for (size_t j = 0; j < width; ++j) {
            const long double d = x[i * width + j] - mu;
            var += d * d;
        }
        var /= width; // population variance
        const long double is = 1.0L / std::sqrt(var + static_cast<long double>(eps));
        CHECK(mean[i] == doctest::Approx(static_cast<double>(mu)).epsilon(1e-12));
        CHECK(inv[i] == doctest::Approx(static_cast<double>(is)).epsilon(1e-12));
        for (size_t j = 0; j < width; ++j) {
            const long double ref = (x[i * width + j] - mu) * is * g[j] + b[j];
            CHECK(out[i * width + j] == doctest::Approx(static_cast<double>(ref)).epsilon(1e-10));
        }
    }
}

TEST_CASE("gelu matches the Gaussian CDF form and known points") {
    // x * Phi(x): at 0 the value is 0, large positive x is near x, large
    // negative x is near 0
    CHECK(kernels::gelu(0.0) == 0.0);
    CHECK(kernels::gelu(10.0) == doctest::Approx(10.0).epsilon(1e-9));
    CHECK(std::fabs(kernels::gelu(-10.0)) < 1e-8);
    for (double x : {-2.0, -0.7, 0.3, 1.9}) {
        const double phi = 0.5 * (1.0 + std::erf(x / std::sqrt(2.0)));
        CHECK(kernels::gelu(x) == doctest::Approx(x * phi).epsilon(1e-12));
    }
}

TEST_CASE("gelu gradient matches finite differences") {
    for (double x : {-3.0, -1.0, -0.2, 0.0, 0.4, 1.3, 2.5}) {
        const double h = 1e-6;
        const double fd = (kernels::gelu(x + h) - kernels::gelu(x - h)) / (2 * h);
        CHECK(kernels::gelu_grad(x) == doctest::Approx(fd).epsilon(1e-6));
    }
}
