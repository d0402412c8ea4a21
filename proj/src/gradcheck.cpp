#include "xing/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "xing/autograd.hpp"
#include "xing/nets.hpp"
#include "xing/objectives.hpp"
#include "xing/ops.hpp"
#include "xing/rng.hpp"
#include "xing/synth.hpp"

namespace xing {

namespace {

double worst_rel(const Tensor64& got, const Tensor64& want, double floor_) {
    double m = 0.0;
    for (std::size_t i = 0; i < got.numel(); ++i) {
        double denom = std::max({std::abs(got.data[i]), std::abs(want.data[i]), floor_});
        m = std::max(m, std::abs(got.data[i] - want.data[i]) / denom);
    }
    return m;
}

Tensor64 randu(std::vector<int> shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Tensor64 t = Tensor64::zeros(shape);
    for (auto& v : t.data) v = rng.uniform(lo, hi);
    return t;
}

// Magnitudes bounded away from zero so kinked ops are probed off the kink.
Tensor64 rand_offzero(std::vector<int> shape, Rng& rng) {
    Tensor64 t = Tensor64::zeros(shape);
    for (auto& v : t.data) {
        double mag = rng.uniform(0.2, 1.0);
        v = rng.unit() < 0.5 ? -mag : mag;
    }
    return t;
}

// Weighted sum with fixed weights, so the upstream gradient differs per
// element instead of being uniformly 1.
Var64 project(const Var64& x, const Tensor64& w) { return sum(mul(x, Var64::constant(w))); }

struct Suite {
    Rng rng;
    std::vector<GradCheckItem> items;

    explicit Suite(std::uint64_t seed) : rng(seed) {}

    void check(const std::string& name, const std::function<Var64(std::vector<Var64>&)>& build,
               const std::vector<Tensor64>& init, double tol = 1e-5, double floor_ = 1e-6,
               double eps = 1e-6) {
        std::vector<Var64> leaves;
        leaves.reserve(init.size());
        for (const auto& t : init) leaves.push_back(Var64::leaf(t, true));
        Var64 loss = build(leaves);
        loss.backward();
        double worst = 0.0;
        for (std::size_t i = 0; i < leaves.size(); ++i) {
            std::function<double(const Tensor64&)> f = [&](const Tensor64& x) {
                std::vector<Var64> ls;
                ls.reserve(init.size());
                for (std::size_t j = 0; j < init.size(); ++j)
                    ls.push_back(Var64::leaf(j == i ? x : init[j], false));
                return build(ls).value().data[0];
            };
            Tensor64 fd = finite_diff_grad<double>(f, init[i], eps);
            worst = std::max(worst, worst_rel(leaves[i].grad(), fd, floor_));
        }
        items.push_back({name, worst, tol, worst <= tol});
    }
};

void elementwise_items(Suite& s) {
    Tensor64 a = randu({2, 3, 4}, s.rng), b = randu({2, 3, 4}, s.rng);
    Tensor64 w = randu({2, 3, 4}, s.rng);
    s.check(
        "add_sub_mul_scale",
        [&](std::vector<Var64>& v) {
            Var64 y = sub(add(v[0], v[1]), mul(v[0], v[1]));
            return project(add_const(scale(y, 0.7), 0.3), w);
        },
        {a, b});

    Tensor64 sc = randu({1}, s.rng, 0.5, 1.5);
    Tensor64 x = randu({2, 3, 3}, s.rng), wx = randu({2, 3, 3}, s.rng);
    s.check(
        "smul", [&](std::vector<Var64>& v) { return project(smul(v[0], v[1]), wx); }, {sc, x});

    Tensor64 xo = rand_offzero({2, 4, 4}, s.rng);
    Tensor64 w1 = randu({2, 4, 4}, s.rng), w2 = randu({2, 4, 4}, s.rng);
    s.check(
        "relu_leaky_relu",
        [&](std::vector<Var64>& v) {
            return add(project(relu(v[0]), w1), project(leaky_relu(v[0], 0.2), w2));
        },
        {xo});
    s.check(
        "tanh_abs",
        [&](std::vector<Var64>& v) {
            return add(project(tanh_op(v[0]), w1), project(abs_op(v[0]), w2));
        },
        {xo});

    s.check(
        "sum_mean",
        [&](std::vector<Var64>& v) {
            return add(sum(mul(v[0], Var64::constant(w1))), scale(mean(v[0]), 1.7));
        },
        {rand_offzero({2, 4, 4}, s.rng)});
}

void shape_items(Suite& s) {
    Tensor64 x = randu({2, 6}, s.rng), w = randu({4, 3}, s.rng);
    s.check(
        "reshape_transpose",
        [&](std::vector<Var64>& v) { return project(transpose2(reshape(v[0], {3, 4})), w); }, {x});

    Tensor64 a = randu({2, 3, 3}, s.rng), b = randu({1, 3, 3}, s.rng);
    Tensor64 wc = randu({2, 3, 3}, s.rng);
    s.check(
        "concat_slice",
        [&](std::vector<Var64>& v) {
            return project(slice_channels(concat_channels(std::vector<Var64>{v[0], v[1]}), 1, 2), wc);
        },
        {a, b});

    Tensor64 m = randu({1, 4, 3}, s.rng), xc = randu({3, 4, 3}, s.rng);
    Tensor64 wm = randu({3, 4, 3}, s.rng);
    s.check(
        "mul_broadcast_map",
        [&](std::vector<Var64>& v) { return project(mul_bc1(v[0], v[1]), wm); }, {m, xc});
}

void matrix_items(Suite& s) {
    Tensor64 a = randu({3, 4}, s.rng), b = randu({4, 5}, s.rng), w = randu({3, 5}, s.rng);
    s.check(
        "matmul", [&](std::vector<Var64>& v) { return project(matmul(v[0], v[1]), w); }, {a, b});

    Tensor64 x = randu({4, 6}, s.rng, -2.0, 2.0), wr = randu({4, 6}, s.rng);
    s.check(
        "softmax_rows", [&](std::vector<Var64>& v) { return project(softmax_rows(v[0]), wr); },
        {x});

    Tensor64 xc = randu({5, 3, 2}, s.rng, -2.0, 2.0), wc = randu({5, 3, 2}, s.rng);
    s.check(
        "softmax_channels",
        [&](std::vector<Var64>& v) { return project(softmax_channels(v[0]), wc); }, {xc});
}

void conv_items(Suite& s) {
    Tensor64 x = randu({3, 5, 4}, s.rng), w = randu({4, 3, 3, 3}, s.rng, -0.5, 0.5);
    Tensor64 b = randu({4}, s.rng), wp = randu({4, 5, 4}, s.rng);
    s.check(
        "conv2d_s1p1",
        [&](std::vector<Var64>& v) { return project(conv2d(v[0], v[1], v[2], 1, 1), wp); },
        {x, w, b});

    Tensor64 x2 = randu({3, 6, 6}, s.rng), wp2 = randu({4, 3, 3}, s.rng);
    s.check(
        "conv2d_s2p1",
        [&](std::vector<Var64>& v) { return project(conv2d(v[0], v[1], v[2], 2, 1), wp2); },
        {x2, w, b});

    Tensor64 xt = randu({3, 3, 3}, s.rng), wt = randu({3, 2, 4, 4}, s.rng, -0.5, 0.5);
    Tensor64 bt = randu({2}, s.rng), wpt = randu({2, 6, 6}, s.rng);
    s.check(
        "tconv_k4s2p1",
        [&](std::vector<Var64>& v) {
            return project(conv_transpose2d(v[0], v[1], v[2], 2, 1), wpt);
        },
        {xt, wt, bt});

    Tensor64 xn = randu({3, 4, 4}, s.rng), g = randu({3}, s.rng, 0.5, 1.5);
    Tensor64 be = randu({3}, s.rng), wn = randu({3, 4, 4}, s.rng);
    s.check(
        "instance_norm",
        [&](std::vector<Var64>& v) { return project(instance_norm(v[0], v[1], v[2]), wn); },
        {xn, g, be});
}

void loss_items(Suite& s) {
    Tensor64 lr = randu({1, 4, 2}, s.rng, -3.0, 3.0), lf = randu({1, 4, 2}, s.rng, -3.0, 3.0);
    s.check(
        "gan_losses",
        [&](std::vector<Var64>& v) {
            return add(gan_loss_d(v[0], v[1]), scale(gan_loss_g(v[1]), 0.5));
        },
        {lr, lf});

    Tensor64 gen = randu({3, 8, 6}, s.rng), tgt = randu({3, 8, 6}, s.rng);
    s.check(
        "l1_loss", [&](std::vector<Var64>& v) { return l1_loss(v[0], v[1]); }, {gen, tgt});

    FeatureExtractor<double> fx(1905);
    s.check(
        "perceptual_loss",
        [&](std::vector<Var64>& v) { return perceptual_loss(v[0], v[1], fx); },
        {randu({3, 8, 8}, s.rng), randu({3, 8, 8}, s.rng)});

    LossWeights lw;
    Tensor64 one = randu({1}, s.rng), two = randu({1}, s.rng), three = randu({1}, s.rng);
    s.check(
        "total_loss",
        [&](std::vector<Var64>& v) { return total_loss(v[0], v[1], v[2], lw); },
        {one, two, three});
}

// Composite objective through the whole generator and both conditional
// discriminators, probed at random parameter coordinates with central
// differences. Inputs are random tensors of the training shapes.
void end_to_end_item(Suite& s) {
    const int T = 1, N = 2, C = 8, H = 16, W = 8;
    Rng init_rng(s.rng.next_u64());
    GeneratorParams<double> g = GeneratorParams<double>::init(Variant::FULL, T, N, C, init_rng);
    DiscriminatorParams<double> d_i = DiscriminatorParams<double>::init(3, init_rng);
    DiscriminatorParams<double> d_p = DiscriminatorParams<double>::init(kNumJoints, init_rng);

    Tensor64 i_s = randu({3, H, W}, s.rng), i_t = randu({3, H, W}, s.rng);
    Tensor64 p_s = randu({kNumJoints, H, W}, s.rng, 0.0, 1.0);
    Tensor64 p_t = randu({kNumJoints, H, W}, s.rng, 0.0, 1.0);
    FeatureExtractor<double> fx(1905);
    LossWeights lw;

    auto loss_value = [&]() {
        Var64 vi = Var64::constant(i_s), vt = Var64::constant(i_t);
        Var64 vps = Var64::constant(p_s), vpt = Var64::constant(p_t);
        GenOutput<double> out = xing_generator_forward(vi, vps, vpt, g);
        Var64 adv_i = gan_loss_g(discriminator_forward(vi, out.final_image, d_i));
        Var64 adv_p = gan_loss_g(discriminator_forward(vpt, out.final_image, d_p));
        Var64 adv = combine_adversarial(adv_i, adv_p, true);
        return total_loss(adv, l1_loss(out.final_image, vt),
                          perceptual_loss(out.final_image, vt, fx), lw);
    };

    std::vector<std::pair<std::string, Var64*>> params;
    auto collect = [&](const std::string& name, Var64& v) { params.emplace_back(name, &v); };
    g.visit(collect);
    d_i.visit("d_i", collect);
    d_p.visit("d_p", collect);
    for (auto& [name, p] : params) p->zero_grad();

    Var64 loss = loss_value();
    loss.backward();

    const double eps = 1e-5, tol = 1e-4, floor_ = 1e-4;
    const int probes = 20;
    double worst = 0.0;
    for (int k = 0; k < probes; ++k) {
        std::size_t pi = s.rng.below(params.size());
        Var64& p = *params[pi].second;
        std::size_t ei = s.rng.below(p.value().numel());
        double saved = p.value().data[ei];
        double analytic = p.grad().data[ei];
        p.mutable_value().data[ei] = saved + eps;
        double up = loss_value().value().data[0];
        p.mutable_value().data[ei] = saved - eps;
        double dn = loss_value().value().data[0];
        p.mutable_value().data[ei] = saved;
        double fd = (up - dn) / (2.0 * eps);
        double denom = std::max({std::abs(analytic), std::abs(fd), floor_});
        worst = std::max(worst, std::abs(analytic - fd) / denom);
    }
    s.items.push_back({"end_to_end_objective", worst, tol, worst <= tol});
}

}  // namespace

std::vector<GradCheckItem> run_gradient_suite(std::uint64_t seed) {
    Suite s(seed);
    elementwise_items(s);
    shape_items(s);
    matrix_items(s);
    conv_items(s);
    loss_items(s);
    end_to_end_item(s);
    return std::move(s.items);
}

bool all_pass(const std::vector<GradCheckItem>& items) {
    for (const auto& it : items)
        if (!it.pass) return false;
    return !items.empty();
}

}  // namespace xing
