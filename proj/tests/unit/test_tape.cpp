#include <doctest.h>

#include <cmath>
#include <cstring>
#include <memory>
#include <vector>

#include "mmlm/gradcheck.hpp"
#include "mmlm/tape.hpp"

using namespace mmlm;

namespace {

Tensor<double> randt(std::vector<size_t> shape, uint64_t seed, bool rg = true) {
    Rng rng(seed);
    return Tensor<double>::randn(std::move(shape), rng, 1.0, rg);
}

// Runs grad_check over params for a scalar produced by build(tape).
template <class Fn>
double max_rel_error(ParamList<double>& params, Fn&& build) {
    auto loss = [&](bool with_grad) {
        Tape<double> tape;
        tape.set_recording(with_grad);
        Tensor<double> out = build(tape);
        const double v = out.at(0);
        if (with_grad) tape.backward(out);
        return v;
    };
    GradCheckOptions opt;
    opt.eps = 1e-5;
    opt.denom_floor = 1e-8;
    auto report = grad_check(loss, params, opt);
    return report.max_rel;
}

ByteMask make_mask(std::vector<uint8_t> bytes) {
    return std::make_shared<const std::vector<uint8_t>>(std::move(bytes));
}

} // namespace

TEST_CASE("matmul gradients") {
    ParamList<double> params{{"a", randt({3, 4}, 1)}, {"b", randt({4, 5}, 2)}, {"w", randt({3, 5}, 3)}};
    auto build = [&](Tape<double>& t) {
        return t.sum_all(t.mul(t.matmul(params[0].value, params[1].value), params[2].value));
    };
    CHECK(max_rel_error(params, build) < 1e-7);
}

TEST_CASE("matmul_nt gradients") {
    ParamList<double> params{{"a", randt({3, 4}, 4)}, {"b", randt({5, 4}, 5)}, {"w", randt({3, 5}, 6)}};
    auto build = [&](Tape<double>& t) {
        return t.sum_all(t.mul(t.matmul_nt(params[0].value, params[1].value), params[2].value));
    };
    CHECK(max_rel_error(params, build) < 1e-7);
}

TEST_CASE("add, bias, scale, mul gradients") {
    ParamList<double> params{{"x", randt({2, 3}, 7)}, {"y", randt({2, 3}, 8)}, {"b", randt({3}, 9)}};
    auto build = [&](Tape<double>& t) {
        auto s = t.add(params[0].value, params[1].value);
        s = t.add_bias_rows(s, params[2].value);
        s = t.scale(s, 1.7);
        return t.sum_all(t.mul(s, s));
    };
    CHECK(max_rel_error(params, build) < 1e-6);
}

TEST_CASE("layer norm gradients") {
    ParamList<double> params{{"x", randt({3, 8}, 10)}, {"g", randt({8}, 11)}, {"b", randt({8}, 12)},
                             {"w", randt({3, 8}, 13)}};
    auto build = [&](Tape<double>& t) {
        auto y = t.layer_norm(params[0].value, params[1].value, params[2].value, 1e-5);
        return t.sum_all(t.mul(y, params[3].value));
    };
    CHECK(max_rel_error(params, build) < 1e-6);
}

TEST_CASE("gelu gradients") {
    ParamList<double> params{{"x", randt({2, 5}, 14)}, {"w", randt({2, 5}, 15)}};
    auto build = [&](Tape<double>& t) { return t.sum_all(t.mul(t.gelu(params[0].value), params[1].value)); };
    CHECK(max_rel_error(params, build) < 1e-6);
}

TEST_CASE("slice and concat gradients") {
    ParamList<double> params{{"x", randt({3, 6}, 16)}, {"w", randt({3, 6}, 17)}};
    auto build = [&](Tape<double>& t) {
        auto left = t.slice_cols(params[0].value, 0, 2);
        auto mid = t.slice_cols(params[0].value, 2, 3);
        auto right = t.slice_cols(params[0].value, 5, 1);
        auto back = t.concat_cols({left, mid, right});
        return t.sum_all(t.mul(back, params[1].value));
    };
    CHECK(max_rel_error(params, build) < 1e-7);
}

TEST_CASE("xpos gradients and geometry") {
    const size_t d = 6, L = 4;
    std::vector<int64_t> pos{0, 1, 2, 3};
    auto table = std::make_shared<const XPosTable<double>>(make_xpos_table<double>(d, pos));
    ParamList<double> params{{"q", randt({L, d}, 18)}, {"w", randt({L, d}, 19)}};
    auto build = [&](Tape<double>& t) {
        auto q = t.xpos(params[0].value, table, true);
        return t.sum_all(t.mul(q, params[1].value));
    };
    CHECK(max_rel_error(params, build) < 1e-7);

    // rotation preserves pair norms up to the scale factor
    Tape<double> t;
    auto q = t.xpos(params[0].value, table, true);
    for (size_t r = 0; r < L; ++r)
        for (size_t i = 0; i < d / 2; ++i) {
            const double n0 = std::hypot(params[0].value.at(r * d + 2 * i), params[0].value.at(r * d + 2 * i + 1));
            const double n1 = std::hypot(q.at(r * d + 2 * i), q.at(r * d + 2 * i + 1));
            const double sc = table->qscale[r * (d / 2) + i];
            CHECK(n1 == doctest::Approx(n0 * sc).epsilon(1e-9));
        }
}

TEST_CASE("masked softmax and weighted sum gradients") {
    const size_t L = 4;
    auto allowed = make_mask({1, 0, 0, 0, 1, 1, 0, 0, 1, 1, 1, 0, 1, 1, 1, 1});
    ParamList<double> params{{"s", randt({L, L}, 20)}, {"v", randt({L, 3}, 21)}, {"w", randt({L, 3}, 22)}};
    auto build = [&](Tape<double>& t) {
        auto p = t.masked_softmax(params[0].value, allowed);
        auto c = t.masked_weighted_sum(p, params[1].value, allowed);
        return t.sum_all(t.mul(c, params[2].value));
    };
    CHECK(max_rel_error(params, build) < 1e-6);
}

TEST_CASE("compose_rows routes gradients to table and soft tokens") {
    const size_t w = 4;
    ParamList<double> params{{"table", randt({6, w}, 23)}, {"soft", randt({2, w}, 24)},
                             {"w", randt({5, w}, 25)}};
    std::vector<int32_t> ids{0, 3, -1, -1, 3}; // -1 positions come from soft rows
    std::vector<ComposeRef> refs(5);
    refs[2] = {0, 0};
    refs[3] = {0, 1};
    std::vector<int32_t> ids_fixed = ids;
    ids_fixed[2] = 5; // placeholder id; must be ignored for soft positions
    ids_fixed[3] = 5;
    auto build = [&](Tape<double>& t) {
        auto x = t.compose_rows(params[0].value, ids_fixed, refs, {params[1].value});
        return t.sum_all(t.mul(x, params[2].value));
    };
    CHECK(max_rel_error(params, build) < 1e-7);
}

TEST_CASE("repeated ids accumulate embedding gradients") {
    Tensor<double> table = randt({3, 2}, 26);
    std::vector<int32_t> ids{1, 1, 1};
    std::vector<ComposeRef> refs(3);
    Tape<double> t;
    auto x = t.compose_rows(table, ids, refs, {});
    auto s = t.sum_all(x);
    t.backward(s);
    CHECK(table.grad()[1 * 2 + 0] == doctest::Approx(3.0));
    CHECK(table.grad()[0] == 0.0);
}

TEST_CASE("tied cross entropy agrees with explicit logits path") {
    const size_t L = 5, w = 4, vocab = 7;
    Tensor<double> hidden = randt({L, w}, 27);
    Tensor<double> table = randt({vocab, w}, 28);
    std::vector<int32_t> targets{1, 4, 0, 6, 2};
    std::vector<uint8_t> mask{0, 1, 1, 0, 1};

    Tape<double> t1;
    auto ce = t1.tied_cross_entropy_sum(hidden, table, targets, mask);
    CHECK(ce.count == 3);

    Tape<double> t2;
    auto logits = t2.matmul_nt(hidden, table);
    auto mean = t2.masked_cross_entropy(logits, targets, mask);
    CHECK(ce.sum.at(0) == doctest::Approx(mean.at(0) * 3.0).epsilon(1e-12));
}

TEST_CASE("tied cross entropy gradients") {
    const size_t L = 4, w = 3, vocab = 6;
    ParamList<double> params{{"hidden", randt({L, w}, 29)}, {"table", randt({vocab, w}, 30)}};
    std::vector<int32_t> targets{2, 0, 5, 1};
    std::vector<uint8_t> mask{0, 1, 1, 1};
    auto build = [&](Tape<double>& t) {
        auto ce = t.tied_cross_entropy_sum(params[0].value, params[1].value, targets, mask);
        return ce.sum;
    };
    CHECK(max_rel_error(params, build) < 1e-6);
}

TEST_CASE("masked-out targets are never read") {
    const size_t L = 4, w = 3, vocab = 6;
    Tensor<double> hidden = randt({L, w}, 31);
    Tensor<double> table = randt({vocab, w}, 32);
    std::vector<uint8_t> mask{0, 1, 0, 1};
    std::vector<int32_t> a{2, 0, 5, 1};
    std::vector<int32_t> b{0, 0, 3, 1};    // differs only at mask-false spots
    std::vector<int32_t> c{-9, 0, 999, 1}; // invalid ids where mask is false

    Tape<double> t;
    const double la = t.tied_cross_entropy_sum(hidden, table, a, mask).sum.at(0);
    const double lb = t.tied_cross_entropy_sum(hidden, table, b, mask).sum.at(0);
    const double lc = t.tied_cross_entropy_sum(hidden, table, c, mask).sum.at(0);
    CHECK(std::memcmp(&la, &lb, sizeof(double)) == 0);
    CHECK(std::memcmp(&la, &lc, sizeof(double)) == 0);

    // but invalid ids at mask-true spots are an error
    std::vector<int32_t> bad{0, 999, 0, 1};
    CHECK_THROWS_AS((void)t.tied_cross_entropy_sum(hidden, table, bad, mask), DataError);
}

TEST_CASE("masked cross entropy with no targets is an error") {
    Tensor<double> logits = randt({2, 4}, 33);
    std::vector<int32_t> targets{0, 1};
    std::vector<uint8_t> mask{0, 0};
    Tape<double> t;
    CHECK_THROWS_AS((void)t.masked_cross_entropy(logits, targets, mask), DataError);
}

TEST_CASE("dropout is identity at p=0 and masks at p>0") {
    Tensor<double> x = randt({4, 4}, 34);
    Rng rng(99);
    Tape<double> t;
    auto y0 = t.dropout(x, 0.0, rng);
    CHECK(y0.same_storage(x));

    auto y = t.dropout(x, 0.5, rng);
    size_t zeros = 0;
    for (size_t i = 0; i < y.size(); ++i) {
        if (y.at(i) == 0.0) {
            ++zeros;
        } else {
            CHECK(y.at(i) == doctest::Approx(x.at(i) * 2.0));
        }
    }
    CHECK(zeros > 0);
    CHECK(zeros < y.size());

    CHECK_THROWS_AS((void)t.dropout(x, 1.0, rng), DataError);
}

TEST_CASE("gradients accumulate across separate tapes") {
    Tensor<double> x = Tensor<double>::from({2}, {1.0, 2.0}, true);
    for (int pass = 0; pass < 2; ++pass) {
        Tape<double> t;
        auto s = t.sum_all(t.mul(x, x));
        t.backward(s);
    }
    // d(x^2)/dx = 2x accumulated twice
    CHECK(x.grad()[0] == doctest::Approx(4.0));
    CHECK(x.grad()[1] == doctest::Approx(8.0));
}

TEST_CASE("recording off means no gradients") {
    Tensor<double> x = randt({2, 2}, 35);
    Tape<double> t;
    t.set_recording(false);
    auto y = t.sum_all(x);
    CHECK(!y.requires_grad());
    CHECK(t.node_count() == 0);
}

TEST_CASE("backward requires a scalar root with a graph") {
    Tensor<double> x = randt({2, 2}, 36);
    Tape<double> t;
    auto y = t.mul(x, x);
    CHECK_THROWS_AS(t.backward(y), ShapeError); // not scalar
    Tensor<double> loose = Tensor<double>::zeros({1});
    CHECK_THROWS_AS(t.backward(loose), DataError); // no graph
}
