#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "checkutil.hpp"
#include "oracles.hpp"
#include "xing/ops.hpp"

using namespace xing;
using checkutil::gradcheck;
using checkutil::project;
using checkutil::proj_weights;
using oracle::random_tensor;

TEST_CASE("matmul identity and fixed product") {
    Tensor64 a({2, 2}, {1, 2, 3, 4});
    Tensor64 eye({2, 2}, {1, 0, 0, 1});
    Var64 out = matmul(Var64::constant(a), Var64::constant(eye));
    CHECK(out.value().at({0, 0}) == 1.0);
    CHECK(out.value().at({0, 1}) == 2.0);
    CHECK(out.value().at({1, 0}) == 3.0);
    CHECK(out.value().at({1, 1}) == 4.0);
}

TEST_CASE("matmul matches triple-loop reference") {
    xing::Rng rng(101);
    Tensor64 a = random_tensor<double>({5, 7}, rng);
    Tensor64 b = random_tensor<double>({7, 3}, rng);
    Var64 out = matmul(Var64::constant(a), Var64::constant(b));
    Tensor64 want = oracle::matmul(a, b);
    CHECK(oracle::max_abs_diff(out.value(), want) <= 1e-6);
}

TEST_CASE("matmul rejects mismatched inner dims") {
    Var64 a = Var64::constant(Tensor64::zeros({2, 3}));
    Var64 b = Var64::constant(Tensor64::zeros({4, 2}));
    CHECK_THROWS_AS(matmul(a, b), std::invalid_argument);
}

TEST_CASE("matmul gradient") {
    xing::Rng rng(102);
    Tensor64 a = random_tensor<double>({3, 4}, rng);
    Tensor64 b = random_tensor<double>({4, 2}, rng);
    Tensor64 w = proj_weights({3, 2}, rng);
    gradcheck([&](std::vector<Var64>& ls) { return project(matmul(ls[0], ls[1]), w); }, {a, b},
              1e-7);
}

TEST_CASE("conv2d identity kernel") {
    xing::Rng rng(103);
    Tensor64 x = random_tensor<double>({3, 4, 4}, rng);
    // 1x1 kernel = channel identity
    Tensor64 w = Tensor64::zeros({3, 3, 1, 1});
    for (int c = 0; c < 3; ++c) w.at({c, c, 0, 0}) = 1.0;
    Tensor64 b = Tensor64::zeros({3});
    Var64 out = conv2d(Var64::constant(x), Var64::constant(w), Var64::constant(b), 1, 0);
    CHECK(oracle::max_abs_diff(out.value(), x) == 0.0);
}

TEST_CASE("conv2d constant field with all-ones kernel") {
    int cin = 2;
    double cval = 0.75;
    Tensor64 x = Tensor64::full({cin, 5, 5}, cval);
    Tensor64 w = Tensor64::full({1, cin, 3, 3}, 1.0);
    Var64 out = conv2d(Var64::constant(x), Var64::constant(w), 1, 0);
    // every valid placement covers 9*Cin constant cells
    for (double v : out.value().data) CHECK(v == doctest::Approx(9.0 * cval * cin).epsilon(1e-12));
}

TEST_CASE("conv2d matches nested-loop reference") {
    xing::Rng rng(104);
    for (auto [stride, pad] : {std::pair{1, 0}, {1, 1}, {2, 1}}) {
        Tensor64 x = random_tensor<double>({2, 4, 4}, rng);
        Tensor64 w = random_tensor<double>({3, 2, 3, 3}, rng);
        Tensor64 b = random_tensor<double>({3}, rng);
        Var64 out = conv2d(Var64::constant(x), Var64::constant(w), Var64::constant(b), stride, pad);
        Tensor64 want = oracle::conv2d(x, w, std::vector<double>(b.data.begin(), b.data.end()),
                                       stride, pad);
        CHECK(oracle::max_abs_diff(out.value(), want) <= 1e-6);
    }
}

TEST_CASE("conv2d rejects channel mismatch naming both shapes") {
    Var64 x = Var64::constant(Tensor64::zeros({2, 4, 4}));
    Var64 w = Var64::constant(Tensor64::zeros({3, 5, 3, 3}));
    try {
        conv2d(x, w, 1, 1);
        FAIL("expected rejection");
    } catch (const std::invalid_argument& e) {
        std::string msg = e.what();
        CHECK(msg.find("5") != std::string::npos);
        CHECK(msg.find("(2,4,4)") != std::string::npos);
    }
}

TEST_CASE("conv2d gradient input weight bias") {
    xing::Rng rng(105);
    Tensor64 x = random_tensor<double>({2, 4, 4}, rng);
    Tensor64 w = random_tensor<double>({3, 2, 3, 3}, rng);
    Tensor64 b = random_tensor<double>({3}, rng);
    Tensor64 pw = proj_weights({3, 2, 2}, rng);
    gradcheck(
        [&](std::vector<Var64>& ls) { return project(conv2d(ls[0], ls[1], ls[2], 2, 1), pw); },
        {x, w, b}, 1e-6);
}

TEST_CASE("conv_transpose2d matches scatter reference and inverts stride arithmetic") {
    xing::Rng rng(106);
    Tensor64 x = random_tensor<double>({3, 3, 2}, rng);
    Tensor64 w = random_tensor<double>({3, 2, 4, 4}, rng);
    Tensor64 b = random_tensor<double>({2}, rng);
    Var64 out = conv_transpose2d(Var64::constant(x), Var64::constant(w), Var64::constant(b), 2, 1);
    CHECK(out.value().shape == std::vector<int>{2, 6, 4});
    Tensor64 want = oracle::conv_transpose2d(x, w, std::vector<double>(b.data.begin(), b.data.end()),
                                             2, 1);
    CHECK(oracle::max_abs_diff(out.value(), want) <= 1e-6);
}

TEST_CASE("conv_transpose2d gradient") {
    xing::Rng rng(107);
    Tensor64 x = random_tensor<double>({2, 3, 3}, rng);
    Tensor64 w = random_tensor<double>({2, 3, 4, 4}, rng);
    Tensor64 b = random_tensor<double>({3}, rng);
    Tensor64 pw = proj_weights({3, 6, 6}, rng);
    gradcheck(
        [&](std::vector<Var64>& ls) {
            return project(conv_transpose2d(ls[0], ls[1], ls[2], 2, 1), pw);
        },
        {x, w, b}, 1e-6);
}

TEST_CASE("softmax_rows trivial rows") {
    Tensor64 z = Tensor64::zeros({1, 4});
    Var64 out = softmax_rows(Var64::constant(z));
    for (double v : out.value().data) CHECK(v == doctest::Approx(0.25).epsilon(1e-12));

    Tensor64 big({1, 3}, {1000.0, 0.0, 0.0});
    Var64 out2 = softmax_rows(Var64::constant(big));
    CHECK(out2.value().all_finite());
    CHECK(out2.value().at({0, 0}) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(out2.value().at({0, 1}) == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("softmax_rows matches exp-sum reference") {
    xing::Rng rng(108);
    Tensor64 x = random_tensor<double>({4, 4}, rng, -3.0, 3.0);
    Var64 out = softmax_rows(Var64::constant(x));
    CHECK(oracle::max_abs_diff(out.value(), oracle::softmax_rows(x)) <= 1e-12);
}

TEST_CASE("softmax_rows rows sum to one over random matrices") {
    xing::Rng rng(109);
    for (int trial = 0; trial < 50; ++trial) {
        int r = 1 + int(rng.below(5)), c = 1 + int(rng.below(6));
        Tensor64 x = random_tensor<double>({r, c}, rng, -30.0, 30.0);
        Var64 out = softmax_rows(Var64::constant(x));
        for (int i = 0; i < r; ++i) {
            double s = 0;
            for (int j = 0; j < c; ++j) {
                double v = out.value().at({i, j});
                CHECK(v > 0.0);
                CHECK(v < 1.0 + 1e-12);
                s += v;
            }
            CHECK(std::abs(s - 1.0) <= 1e-5);
        }
    }
}

TEST_CASE("softmax_rows shift invariance") {
    xing::Rng rng(110);
    Tensor64 x = random_tensor<double>({3, 5}, rng);
    Tensor64 shifted = x;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 5; ++j) shifted.at({i, j}) += 7.5;
    Var64 a = softmax_rows(Var64::constant(x));
    Var64 b = softmax_rows(Var64::constant(shifted));
    CHECK(oracle::max_abs_diff(a.value(), b.value()) <= 1e-10);
}

TEST_CASE("softmax_rows rejects non-finite input") {
    Tensor64 x = Tensor64::zeros({2, 2});
    x.data[1] = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(softmax_rows(Var64::constant(x)), std::invalid_argument);
}

TEST_CASE("softmax_rows gradient") {
    xing::Rng rng(111);
    Tensor64 x = random_tensor<double>({3, 4}, rng, -2.0, 2.0);
    Tensor64 pw = proj_weights({3, 4}, rng);
    gradcheck([&](std::vector<Var64>& ls) { return project(softmax_rows(ls[0]), pw); }, {x}, 1e-7);
}

TEST_CASE("elementwise basics") {
    xing::Rng rng(112);
    Tensor64 x = random_tensor<double>({3, 3}, rng);
    Var64 keep = add(Var64::constant(x), Var64::constant(Tensor64::zeros({3, 3})));
    CHECK(oracle::max_abs_diff(keep.value(), x) == 0.0);

    Var64 t0 = tanh_op(Var64::constant(Tensor64::zeros({1})));
    CHECK(t0.value().data[0] == 0.0);
    Var64 rneg = relu(Var64::constant(Tensor64({1}, {-1.0})));
    CHECK(rneg.value().data[0] == 0.0);
    Var64 lneg = leaky_relu(Var64::constant(Tensor64({1}, {-1.0})), 0.2);
    CHECK(lneg.value().data[0] == doctest::Approx(-0.2));

    CHECK_THROWS_AS(add(Var64::constant(Tensor64::zeros({2, 2})),
                        Var64::constant(Tensor64::zeros({2, 3}))),
                    std::invalid_argument);
    CHECK_THROWS_AS(mul(Var64::constant(Tensor64::zeros({2})),
                        Var64::constant(Tensor64::zeros({3}))),
                    std::invalid_argument);
}

TEST_CASE("mul gradient equals the other operand") {
    xing::Rng rng(113);
    Tensor64 x = random_tensor<double>({3, 3}, rng);
    Tensor64 y = random_tensor<double>({3, 3}, rng);
    Var64 vx = Var64::leaf(x, true);
    Var64 loss = sum(mul(vx, Var64::constant(y)));
    loss.backward();
    CHECK(oracle::max_abs_diff(vx.grad(), y) <= 1e-12);
}

TEST_CASE("elementwise gradients") {
    xing::Rng rng(114);
    Tensor64 a = checkutil::random_offzero({2, 3}, rng);
    Tensor64 b = checkutil::random_offzero({2, 3}, rng);
    Tensor64 pw = proj_weights({2, 3}, rng);
    gradcheck([&](std::vector<Var64>& ls) { return project(add(ls[0], ls[1]), pw); }, {a, b}, 1e-7);
    gradcheck([&](std::vector<Var64>& ls) { return project(sub(ls[0], ls[1]), pw); }, {a, b}, 1e-7);
    gradcheck([&](std::vector<Var64>& ls) { return project(mul(ls[0], ls[1]), pw); }, {a, b}, 1e-7);
    gradcheck([&](std::vector<Var64>& ls) { return project(relu(ls[0]), pw); }, {a}, 1e-7);
    gradcheck([&](std::vector<Var64>& ls) { return project(leaky_relu(ls[0], 0.2), pw); }, {a},
              1e-7);
    gradcheck([&](std::vector<Var64>& ls) { return project(tanh_op(ls[0]), pw); }, {a}, 1e-7);
    gradcheck([&](std::vector<Var64>& ls) { return project(abs_op(ls[0]), pw); }, {a}, 1e-7);
    gradcheck([&](std::vector<Var64>& ls) { return project(scale(ls[0], 2.5), pw); }, {a}, 1e-7);
    gradcheck([&](std::vector<Var64>& ls) { return mean(ls[0]); }, {a}, 1e-7);

    Tensor64 s({1}, {0.7});
    gradcheck([&](std::vector<Var64>& ls) { return project(smul(ls[0], ls[1]), pw); }, {s, a}, 1e-7);
}

TEST_CASE("shape ops") {
    xing::Rng rng(115);
    Tensor64 a = random_tensor<double>({2, 4, 4}, rng);
    Tensor64 b = random_tensor<double>({3, 4, 4}, rng);
    Var64 cat = concat_channels<double>({Var64::constant(a), Var64::constant(b)});
    CHECK(cat.value().shape == std::vector<int>{5, 4, 4});
    for (int c = 0; c < 2; ++c)
        for (int y = 0; y < 4; ++y)
            for (int x = 0; x < 4; ++x) CHECK(cat.value().at({c, y, x}) == a.at({c, y, x}));

    CHECK_THROWS_AS(concat_channels<double>(
                        {Var64::constant(a), Var64::constant(Tensor64::zeros({1, 3, 4}))}),
                    std::invalid_argument);

    Tensor64 m = random_tensor<double>({2, 3}, rng);
    Var64 rt = reshape(reshape(Var64::constant(m), {3, 2}), {2, 3});
    CHECK(oracle::max_abs_diff(rt.value(), m) == 0.0);

    Tensor64 n = random_tensor<double>({4, 6}, rng);
    Var64 tt = transpose2(transpose2(Var64::constant(n)));
    CHECK(oracle::max_abs_diff(tt.value(), n) == 0.0);

    // element multiset preserved: sorted data identical
    Var64 rs = reshape(Var64::constant(n), {6, 4});
    auto sa = n.data, sb = rs.value().data;
    std::sort(sa.begin(), sa.end());
    std::sort(sb.begin(), sb.end());
    CHECK(sa == sb);

    Var64 sl = slice_channels(cat, 2, 3);
    CHECK(oracle::max_abs_diff(sl.value(), b) == 0.0);
    CHECK_THROWS_AS(slice_channels(cat, 4, 2), std::invalid_argument);
}

TEST_CASE("shape op gradients") {
    xing::Rng rng(116);
    Tensor64 a = random_tensor<double>({2, 3, 3}, rng);
    Tensor64 b = random_tensor<double>({1, 3, 3}, rng);
    Tensor64 pw3 = proj_weights({3, 3, 3}, rng);
    gradcheck(
        [&](std::vector<Var64>& ls) {
            return project(concat_channels<double>({ls[0], ls[1]}), pw3);
        },
        {a, b}, 1e-7);
    Tensor64 pw1 = proj_weights({1, 3, 3}, rng);
    gradcheck([&](std::vector<Var64>& ls) { return project(slice_channels(ls[0], 1, 1), pw1); },
              {a}, 1e-7);
    Tensor64 pwt = proj_weights({3, 2}, rng);
    Tensor64 m = random_tensor<double>({2, 3}, rng);
    gradcheck([&](std::vector<Var64>& ls) { return project(transpose2(ls[0]), pwt); }, {m}, 1e-7);
    Tensor64 pwr = proj_weights({6}, rng);
    gradcheck([&](std::vector<Var64>& ls) { return project(reshape(ls[0], {6}), pwr); }, {m}, 1e-7);
    Tensor64 pwb = proj_weights({2, 3, 3}, rng);
    gradcheck([&](std::vector<Var64>& ls) { return project(mul_bc1(ls[0], ls[1]), pwb); }, {b, a},
              1e-7);
}

TEST_CASE("instance_norm trivial cases") {
    // constant channel: x == mu everywhere, eps guard keeps it finite zero
    Tensor64 x = Tensor64::full({1, 2, 2}, 3.5);
    Var64 out = instance_norm(Var64::constant(x), Var64::constant(Tensor64::ones({1})),
                              Var64::constant(Tensor64::zeros({1})));
    for (double v : out.value().data) CHECK(v == 0.0);

    xing::Rng rng(117);
    Tensor64 y = random_tensor<double>({3, 4, 4}, rng);
    Var64 norm = instance_norm(Var64::constant(y), Var64::constant(Tensor64::ones({3})),
                               Var64::constant(Tensor64::zeros({3})));
    for (int c = 0; c < 3; ++c) {
        double mean = 0;
        for (int i = 0; i < 16; ++i) mean += norm.value().data[c * 16 + i];
        mean /= 16.0;
        CHECK(std::abs(mean) <= 1e-6);
    }
}

TEST_CASE("instance_norm matches scalar reference") {
    xing::Rng rng(118);
    Tensor64 x = random_tensor<double>({2, 3, 3}, rng);
    std::vector<double> gamma{1.3, 0.7}, beta{0.1, -0.4};
    Var64 out = instance_norm(Var64::constant(x),
                              Var64::constant(Tensor64({2}, std::vector<double>(gamma))),
                              Var64::constant(Tensor64({2}, std::vector<double>(beta))));
    Tensor64 want = oracle::instance_norm(x, gamma, beta, 1e-5);
    CHECK(oracle::max_abs_diff(out.value(), want) <= 1e-10);
}

TEST_CASE("instance_norm gradient") {
    xing::Rng rng(119);
    Tensor64 x = random_tensor<double>({2, 3, 3}, rng);
    Tensor64 gamma = random_tensor<double>({2}, rng, 0.5, 1.5);
    Tensor64 beta = random_tensor<double>({2}, rng, -0.5, 0.5);
    Tensor64 pw = proj_weights({2, 3, 3}, rng);
    gradcheck(
        [&](std::vector<Var64>& ls) { return project(instance_norm(ls[0], ls[1], ls[2]), pw); },
        {x, gamma, beta}, 1e-6);
    CHECK_THROWS_AS(instance_norm(Var64::constant(Tensor64::zeros({2, 1, 1})),
                                  Var64::constant(Tensor64::ones({2})),
                                  Var64::constant(Tensor64::zeros({2}))),
                    std::invalid_argument);
}

TEST_CASE("backward trivial gradients") {
    xing::Rng rng(120);
    Tensor64 x = random_tensor<double>({2, 3}, rng);
    Var64 vx = Var64::leaf(x, true);
    sum(vx).backward();
    for (double v : vx.grad().data) CHECK(v == 1.0);

    Var64 vy = Var64::leaf(x, true);
    sum(mul(vy, vy)).backward();
    for (std::size_t i = 0; i < x.numel(); ++i)
        CHECK(vy.grad().data[i] == doctest::Approx(2.0 * x.data[i]).epsilon(1e-12));
}

TEST_CASE("backward rejects non-scalar loss") {
    Var64 v = Var64::leaf(Tensor64::zeros({2, 2}), true);
    CHECK_THROWS_AS(add(v, v).backward(), std::invalid_argument);
}

TEST_CASE("backward accumulates until reset") {
    Tensor64 x({2}, {1.0, 2.0});
    Var64 v = Var64::leaf(x, true);
    sum(v).backward();
    sum(v).backward();
    CHECK(v.grad().data[0] == 2.0);
    CHECK(v.grad().data[1] == 2.0);
    v.zero_grad();
    sum(v).backward();
    CHECK(v.grad().data[0] == 1.0);
}

TEST_CASE("backward handles reused nodes once") {
    // y = x + x; d(sum(y))/dx = 2
    Tensor64 x({3}, {1.0, -1.0, 0.5});
    Var64 v = Var64::leaf(x, true);
    sum(add(v, v)).backward();
    for (double g : v.grad().data) CHECK(g == 2.0);

    // deeper diamond: z = (x+x) + (x*x)
    Var64 u = Var64::leaf(x, true);
    Var64 lhs = add(u, u);
    Var64 rhs = mul(u, u);
    sum(add(lhs, rhs)).backward();
    for (std::size_t i = 0; i < 3; ++i)
        CHECK(u.grad().data[i] == doctest::Approx(2.0 + 2.0 * x.data[i]).epsilon(1e-12));
}

TEST_CASE("detach blocks gradient flow") {
    Tensor64 x({2}, {3.0, 4.0});
    Var64 v = Var64::leaf(x, true);
    Var64 d = mul(v, v).detach();
    Var64 loss = sum(mul(d, v));
    loss.backward();
    // only the direct factor contributes: d(sum(x^2 * x))/dx without the
    // detached x^2 path = x^2
    for (std::size_t i = 0; i < 2; ++i)
        CHECK(v.grad().data[i] == doctest::Approx(x.data[i] * x.data[i]).epsilon(1e-12));
}

TEST_CASE("finite_diff_grad basics") {
    Tensor64 x({3}, {1.0, -2.0, 0.5});
    auto fsum = [](const Tensor64& t) {
        double s = 0;
        for (double v : t.data) s += v;
        return s;
    };
    Tensor64 g = finite_diff_grad<double>(fsum, x, 1e-5);
    for (double v : g.data) CHECK(v == doctest::Approx(1.0).epsilon(1e-9));

    Tensor64 three({1}, {3.0});
    auto fsq = [](const Tensor64& t) { return t.data[0] * t.data[0]; };
    Tensor64 g2 = finite_diff_grad<double>(fsq, three, 1e-5);
    CHECK(std::abs(g2.data[0] - 6.0) <= 1e-7);

    CHECK_THROWS_AS(finite_diff_grad<double>(fsq, three, 0.0), std::invalid_argument);
}

TEST_CASE("bce_with_logits matches direct formula and stays finite") {
    xing::Rng rng(121);
    Tensor64 logits = random_tensor<double>({4, 3}, rng, -4.0, 4.0);
    Var64 loss = bce_with_logits_mean(Var64::constant(logits), 0.0);
    CHECK(std::abs(loss.value().data[0] - oracle::bce_with_logits_mean(logits, 0.0)) <= 1e-10);
    Var64 loss1 = bce_with_logits_mean(Var64::constant(logits), 1.0);
    CHECK(std::abs(loss1.value().data[0] - oracle::bce_with_logits_mean(logits, 1.0)) <= 1e-10);

    Var64 zero = bce_with_logits_mean(Var64::constant(Tensor64::zeros({5})), 1.0);
    CHECK(zero.value().data[0] == doctest::Approx(std::log(2.0)).epsilon(1e-12));

    Tensor64 extreme({2}, {1000.0, -1000.0});
    Var64 ext = bce_with_logits_mean(Var64::constant(extreme), 1.0);
    CHECK(ext.value().all_finite());
    CHECK(ext.value().data[0] == doctest::Approx(500.0).epsilon(1e-9));

    CHECK_THROWS_AS(bce_with_logits_mean(Var64::constant(extreme), 1.5), std::invalid_argument);
}

TEST_CASE("bce_with_logits gradient") {
    xing::Rng rng(122);
    Tensor64 logits = random_tensor<double>({3, 3}, rng, -3.0, 3.0);
    gradcheck([&](std::vector<Var64>& ls) { return bce_with_logits_mean(ls[0], 1.0); }, {logits},
              1e-7);
    gradcheck([&](std::vector<Var64>& ls) { return bce_with_logits_mean(ls[0], 0.0); }, {logits},
              1e-7);
}

TEST_CASE("softmax_channels per-pixel simplex and gradient") {
    xing::Rng rng(123);
    Tensor64 x = random_tensor<double>({5, 3, 2}, rng, -2.0, 2.0);
    Var64 out = softmax_channels(Var64::constant(x));
    CHECK(out.value().shape == x.shape);
    for (int y = 0; y < 3; ++y)
        for (int xx = 0; xx < 2; ++xx) {
            double s = 0;
            for (int c = 0; c < 5; ++c) s += out.value().at({c, y, xx});
            CHECK(std::abs(s - 1.0) <= 1e-5);
        }
    // tolerance 1e-5: smallest entries sit at the finite-difference
    // roundoff scale
    Tensor64 pw = proj_weights({5, 3, 2}, rng);
    gradcheck([&](std::vector<Var64>& ls) { return project(softmax_channels(ls[0]), pw); }, {x},
              1e-5, 1e-5);
}

TEST_CASE("forward determinism") {
    xing::Rng rng(124);
    Tensor64 x = random_tensor<double>({2, 8, 8}, rng);
    Tensor64 w = random_tensor<double>({4, 2, 3, 3}, rng);
    Var64 a = conv2d(Var64::constant(x), Var64::constant(w), 2, 1);
    Var64 b = conv2d(Var64::constant(x), Var64::constant(w), 2, 1);
    CHECK(a.value().data == b.value().data);
}
