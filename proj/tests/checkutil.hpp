#pragma once

// Test-side gradient checking: build the same scalar loss twice, once through
// the graph (analytic backward) and once as a plain value function probed by
// central differences, then compare per leaf.

#include <doctest.h>

#include <functional>
#include <vector>

#include "oracles.hpp"
#include "xing/autograd.hpp"
#include "xing/ops.hpp"

namespace checkutil {

using xing::Tensor64;
using xing::Var64;

// build receives one Var per entry of init (same order) and returns a scalar
// Var. Every leaf is checked against finite differences of the rebuilt loss.
inline void gradcheck(const std::function<Var64(std::vector<Var64>&)>& build,
                      const std::vector<Tensor64>& init, double tol, double floor_ = 1e-6,
                      double eps = 1e-6) {
    std::vector<Var64> leaves;
    leaves.reserve(init.size());
    for (const auto& t : init) leaves.push_back(Var64::leaf(t, true));
    Var64 loss = build(leaves);
    REQUIRE(loss.value().numel() == 1);
    loss.backward();
    for (std::size_t i = 0; i < leaves.size(); ++i) {
        auto f = [&](const Tensor64& x) -> double {
            std::vector<Var64> ls;
            ls.reserve(init.size());
            for (std::size_t j = 0; j < init.size(); ++j)
                ls.push_back(Var64::leaf(j == i ? x : init[j], false));
            return build(ls).value().data[0];
        };
        Tensor64 fd = xing::finite_diff_grad<double>(f, init[i], eps);
        double err = oracle::max_rel_err(leaves[i].grad(), fd, floor_);
        INFO("leaf ", i, " max rel err ", err);
        CHECK(err <= tol);
    }
}

// Values bounded away from zero, for ops with a kink at the origin.
inline Tensor64 random_offzero(std::vector<int> shape, xing::Rng& rng, double lo = 0.2,
                               double hi = 1.0) {
    Tensor64 t = Tensor64::zeros(shape);
    for (auto& v : t.data) {
        double mag = rng.uniform(lo, hi);
        v = rng.unit() < 0.5 ? -mag : mag;
    }
    return t;
}

// Projection to a scalar with fixed weights so the upstream gradient varies
// per element. Weights must be generated outside the rebuilt loss closure,
// otherwise finite differences would probe a different function each call.
inline xing::Tensor64 proj_weights(const std::vector<int>& shape, xing::Rng& rng) {
    return oracle::random_tensor<double>(shape, rng, 0.1, 1.0);
}

inline Var64 project(const Var64& x, const Tensor64& w) {
    return xing::sum(xing::mul(x, Var64::constant(w)));
}

}  // namespace checkutil
