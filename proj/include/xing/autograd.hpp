#pragma once

#include <functional>
#include <memory>
#include <stdexcept>
#include <unordered_set>
#include <utility>
#include <vector>

#include "xing/tensor.hpp"

namespace xing {

// One record in the computation graph. `grad` is the persistent accumulator
// for requires_grad leaves (parameters, probed inputs); `gbuf` is scratch
// that lives only inside a single backward() call, so repeated backward()
// calls accumulate into `grad` without contaminating interior nodes.
template <class S>
struct Node {
    Tensor<S> value;
    Tensor<S> grad;
    Tensor<S> gbuf;
    std::vector<std::shared_ptr<Node<S>>> parents;
    std::function<void(Node<S>&)> backward_fn;
    bool requires_grad = false;
    bool leaf = true;
};

template <class S>
class Var {
public:
    using NodeT = Node<S>;
    using NodePtr = std::shared_ptr<NodeT>;

    Var() = default;
    explicit Var(NodePtr n) : n_(std::move(n)) {}

    static Var leaf(Tensor<S> v, bool requires_grad) {
        auto n = std::make_shared<NodeT>();
        n->value = std::move(v);
        n->requires_grad = requires_grad;
        n->leaf = true;
        return Var(std::move(n));
    }

    static Var constant(Tensor<S> v) { return leaf(std::move(v), false); }

    // Interior op node; requires_grad is inherited from the parents.
    static Var op(Tensor<S> v, std::vector<Var> parents,
                  std::function<void(NodeT&)> backward_fn) {
        auto n = std::make_shared<NodeT>();
        n->value = std::move(v);
        n->leaf = false;
        n->parents.reserve(parents.size());
        for (auto& p : parents) {
            if (!p.n_) throw std::invalid_argument("op built from empty Var");
            n->requires_grad = n->requires_grad || p.n_->requires_grad;
            n->parents.push_back(p.n_);
        }
        if (n->requires_grad) n->backward_fn = std::move(backward_fn);
        return Var(std::move(n));
    }

    bool valid() const { return static_cast<bool>(n_); }
    const Tensor<S>& value() const { return n_->value; }
    const std::vector<int>& shape() const { return n_->value.shape; }
    bool requires_grad() const { return n_->requires_grad; }
    NodePtr node() const { return n_; }

    // Persistent gradient of a requires_grad leaf; zeros until the first
    // backward() reaches it.
    const Tensor<S>& grad() const {
        if (!n_->requires_grad || !n_->leaf)
            throw std::logic_error("grad() is only kept on requires_grad leaves");
        if (n_->grad.numel() == 0) n_->grad = Tensor<S>::zeros(n_->value.shape);
        return n_->grad;
    }

    void zero_grad() {
        if (n_->requires_grad) n_->grad = Tensor<S>::zeros(n_->value.shape);
    }

    // In-place parameter update; the graph node is the identity of the
    // parameter, so optimizers mutate value through this.
    Tensor<S>& mutable_value() { return n_->value; }

    Var detach() const { return leaf(n_->value, false); }

    // Reverse-mode sweep from a scalar. Each reachable node is visited
    // exactly once in reverse topological order; leaf gradients accumulate
    // across calls (the trainer resets between steps).
    void backward() const {
        if (n_->value.numel() != 1)
            throw std::invalid_argument("backward() requires a scalar loss, got shape " +
                                        shape_str(n_->value.shape));
        if (!n_->requires_grad) return;

        std::vector<NodeT*> topo;
        topo_collect(topo);

        for (NodeT* n : topo) n->gbuf = Tensor<S>::zeros(n->value.shape);
        n_->gbuf.data[0] = S(1);

        for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
            NodeT* n = *it;
            if (n->backward_fn) n->backward_fn(*n);
        }
        for (NodeT* n : topo) {
            if (n->leaf && n->requires_grad) {
                if (n->grad.numel() == 0) n->grad = Tensor<S>::zeros(n->value.shape);
                for (std::size_t i = 0; i < n->grad.numel(); ++i) n->grad.data[i] += n->gbuf.data[i];
            }
            n->gbuf = Tensor<S>();
        }
    }

private:
    void topo_collect(std::vector<NodeT*>& topo) const {
        std::unordered_set<NodeT*> done;
        // Iterative post-order; frame.second is the next parent index to expand.
        std::vector<std::pair<NodeT*, std::size_t>> stack;
        stack.emplace_back(n_.get(), 0);
        while (!stack.empty()) {
            auto& [n, idx] = stack.back();
            if (idx == 0 && done.count(n)) {
                stack.pop_back();
                continue;
            }
            bool descended = false;
            while (idx < n->parents.size()) {
                NodeT* p = n->parents[idx++].get();
                if (p->requires_grad && !done.count(p)) {
                    stack.emplace_back(p, 0);
                    descended = true;
                    break;
                }
            }
            if (!descended && idx >= n->parents.size()) {
                done.insert(n);
                topo.push_back(n);
                stack.pop_back();
            }
        }
    }

    NodePtr n_;
};

using Var32 = Var<float>;
using Var64 = Var<double>;

// Central finite differences, (f(x+eps*e_i) - f(x-eps*e_i)) / (2*eps) per
// element. The independent oracle every analytic gradient is checked against.
template <class S>
Tensor<S> finite_diff_grad(const std::function<S(const Tensor<S>&)>& f,
                           const Tensor<S>& x, S eps = S(1e-4)) {
    if (!(eps > S(0))) throw std::invalid_argument("finite_diff_grad: eps must be > 0");
    Tensor<S> g = Tensor<S>::zeros(x.shape);
    Tensor<S> probe = x;
    for (std::size_t i = 0; i < x.numel(); ++i) {
        S orig = probe.data[i];
        probe.data[i] = orig + eps;
        S hi = f(probe);
        probe.data[i] = orig - eps;
        S lo = f(probe);
        probe.data[i] = orig;
        g.data[i] = (hi - lo) / (S(2) * eps);
    }
    return g;
}

}  // namespace xing
