#pragma once

#include <string>
#include <vector>

#include "xing/ops.hpp"
#include "xing/rng.hpp"

namespace xing {

// Cross-attention between the appearance stream and the shape stream. Both
// blocks embed their inputs through bias-free 1x1 convs, build an n x n
// position-correlation matrix (n = h*w), and add the attended update back to
// the previous code through a learned scalar gate that starts at exactly 0,
// so an untrained cascade is the identity.

template <class S>
struct SABlockParams {
    Var<S> conv_a, conv_b, conv_c;  // [c,c,1,1]
    Var<S> alpha;                   // {1}

    static SABlockParams init(int c, Rng& rng) {
        SABlockParams p;
        p.conv_a = Var<S>::leaf(Tensor<S>::uniform_fan_in({c, c, 1, 1}, c, rng), true);
        p.conv_b = Var<S>::leaf(Tensor<S>::uniform_fan_in({c, c, 1, 1}, c, rng), true);
        p.conv_c = Var<S>::leaf(Tensor<S>::uniform_fan_in({c, c, 1, 1}, c, rng), true);
        p.alpha = Var<S>::leaf(Tensor<S>::zeros({1}), true);
        return p;
    }

    template <class F>
    void visit(const std::string& prefix, F&& f) {
        f(prefix + ".conv_a", conv_a);
        f(prefix + ".conv_b", conv_b);
        f(prefix + ".conv_c", conv_c);
        f(prefix + ".alpha", alpha);
    }
};

template <class S>
struct ASBlockParams {
    Var<S> conv_d, conv_e, conv_h;  // [c,c,1,1]
    Var<S> beta;                    // {1}
    Var<S> merge_w;                 // [c,2c,3,3]
    Var<S> merge_b;                 // [c]

    static ASBlockParams init(int c, Rng& rng) {
        ASBlockParams p;
        p.conv_d = Var<S>::leaf(Tensor<S>::uniform_fan_in({c, c, 1, 1}, c, rng), true);
        p.conv_e = Var<S>::leaf(Tensor<S>::uniform_fan_in({c, c, 1, 1}, c, rng), true);
        p.conv_h = Var<S>::leaf(Tensor<S>::uniform_fan_in({c, c, 1, 1}, c, rng), true);
        p.beta = Var<S>::leaf(Tensor<S>::zeros({1}), true);
        p.merge_w = Var<S>::leaf(Tensor<S>::uniform_fan_in({c, 2 * c, 3, 3}, 2 * c * 9, rng), true);
        p.merge_b = Var<S>::leaf(Tensor<S>::zeros({c}), true);
        return p;
    }

    template <class F>
    void visit(const std::string& prefix, F&& f) {
        f(prefix + ".conv_d", conv_d);
        f(prefix + ".conv_e", conv_e);
        f(prefix + ".conv_h", conv_h);
        f(prefix + ".beta", beta);
        f(prefix + ".merge_w", merge_w);
        f(prefix + ".merge_b", merge_b);
    }
};

// Row-stochastic position correlation of two already-embedded codes: entry
// (j,i) is the softmaxed dot product of query position j with key position i.
template <class S>
Var<S> correlation_matrix(const Var<S>& query_code, const Var<S>& key_code) {
    require_same_shape(query_code.value(), key_code.value(), "correlation_matrix");
    if (query_code.value().rank() != 3)
        throw std::invalid_argument("correlation_matrix expects [c,h,w] codes, got shape " +
                                    shape_str(query_code.value().shape));
    int c = query_code.value().shape[0];
    int n = query_code.value().shape[1] * query_code.value().shape[2];
    Var<S> q = reshape(query_code, {c, n});
    Var<S> k = reshape(key_code, {c, n});
    Var<S> scores = matmul(transpose2(q), k);  // [n,n]
    return softmax_rows(scores);
}

// Appearance update: attend over the shape code's positions and add the
// gated result onto the previous appearance code. With alpha at its initial
// 0 this is the identity on F_I_prev.
template <class S>
Var<S> sa_block(const Var<S>& f_i_prev, const Var<S>& f_p_prev, const SABlockParams<S>& p) {
    require_same_shape(f_i_prev.value(), f_p_prev.value(), "sa_block");
    int c = f_i_prev.value().shape[0];
    int h = f_i_prev.value().shape[1];
    int w = f_i_prev.value().shape[2];
    Var<S> a_emb = conv2d(f_i_prev, p.conv_a, 1, 0);
    Var<S> b_emb = conv2d(f_p_prev, p.conv_b, 1, 0);
    Var<S> c_emb = conv2d(f_i_prev, p.conv_c, 1, 0);
    Var<S> attn = correlation_matrix(c_emb, b_emb);
    Var<S> mixed = matmul(reshape(a_emb, {c, h * w}), transpose2(attn));
    return add(smul(p.alpha, reshape(mixed, {c, h, w})), f_i_prev);
}

// Pre-merge shape update: attention between the previous shape and
// appearance codes, gated onto the previous shape code. Identity on F_P_prev
// while beta is 0.
template <class S>
Var<S> as_block_premerge(const Var<S>& f_p_prev, const Var<S>& f_i_prev,
                         const ASBlockParams<S>& p) {
    require_same_shape(f_p_prev.value(), f_i_prev.value(), "as_block");
    int c = f_p_prev.value().shape[0];
    int h = f_p_prev.value().shape[1];
    int w = f_p_prev.value().shape[2];
    Var<S> d_emb = conv2d(f_p_prev, p.conv_d, 1, 0);
    Var<S> e_emb = conv2d(f_i_prev, p.conv_e, 1, 0);
    Var<S> h_emb = conv2d(f_p_prev, p.conv_h, 1, 0);
    Var<S> attn = correlation_matrix(h_emb, e_emb);
    Var<S> mixed = matmul(reshape(d_emb, {c, h * w}), transpose2(attn));
    return add(smul(p.beta, reshape(mixed, {c, h, w})), f_p_prev);
}

// Full shape update: the pre-merge value concatenated with the fresh
// appearance code, fused back to c channels by a 3x3 conv. The gate guards
// only the attended term; the merge conv always runs.
template <class S>
Var<S> as_block(const Var<S>& f_p_prev, const Var<S>& f_i_prev, const Var<S>& f_i_new,
                const ASBlockParams<S>& p) {
    require_same_shape(f_p_prev.value(), f_i_new.value(), "as_block");
    Var<S> pre = as_block_premerge(f_p_prev, f_i_prev, p);
    return conv2d(concat_channels<S>({pre, f_i_new}), p.merge_w, p.merge_b, 1, 1);
}

}  // namespace xing
