#pragma once

#include <stdexcept>
#include <vector>

#include "xing/ops.hpp"
#include "xing/rng.hpp"

namespace xing {

struct LossWeights {
    double lambda_gan = 5.0;
    double lambda_l1 = 50.0;
    double lambda_p = 50.0;

    void validate() const {
        if (lambda_gan < 0 || lambda_l1 < 0 || lambda_p < 0)
            throw std::invalid_argument("loss weights must be >= 0");
    }
};

// Discriminator objective: push real patches toward 1 and fake patches
// toward 0, halved so its scale matches the generator term.
template <class S>
Var<S> gan_loss_d(const Var<S>& real_logits, const Var<S>& fake_logits) {
    Var<S> on_real = bce_with_logits_mean(real_logits, S(1));
    Var<S> on_fake = bce_with_logits_mean(fake_logits, S(0));
    return scale(add(on_real, on_fake), S(0.5));
}

// Non-saturating generator objective: fake patches labeled real.
template <class S>
Var<S> gan_loss_g(const Var<S>& fake_logits) {
    return bce_with_logits_mean(fake_logits, S(1));
}

// The two discriminators' terms, averaged by default; the summed form is an
// exposed config choice.
template <class S>
Var<S> combine_adversarial(const Var<S>& term_i, const Var<S>& term_p, bool average = true) {
    Var<S> s = add(term_i, term_p);
    return average ? scale(s, S(0.5)) : s;
}

template <class S>
Var<S> l1_loss(const Var<S>& generated, const Var<S>& target) {
    require_same_shape(generated.value(), target.value(), "l1_loss");
    return mean(abs_op(sub(generated, target)));
}

// Fixed random conv feature pyramid standing in for pretrained perceptual
// features. The first layer is a stride-1 1x1 conv whose first three output
// channels are the identity on RGB, so distinct images always produce
// distinct features and the loss is zero only on identical inputs; three
// stride-2 3x3 stages follow. Weights are frozen at construction.
template <class S>
struct FeatureExtractor {
    Tensor<S> w1, w2, w3, w4;

    explicit FeatureExtractor(std::uint64_t seed) {
        Rng rng(seed);
        w1 = Tensor<S>::uniform_fan_in({8, 3, 1, 1}, 3, rng);
        for (int oc = 0; oc < 3; ++oc)
            for (int ic = 0; ic < 3; ++ic) w1.at({oc, ic, 0, 0}) = oc == ic ? S(1) : S(0);
        w2 = Tensor<S>::uniform_fan_in({16, 8, 3, 3}, 8 * 9, rng);
        w3 = Tensor<S>::uniform_fan_in({32, 16, 3, 3}, 16 * 9, rng);
        w4 = Tensor<S>::uniform_fan_in({64, 32, 3, 3}, 32 * 9, rng);
    }

    explicit FeatureExtractor(Tensor<S> l1, Tensor<S> l2, Tensor<S> l3, Tensor<S> l4)
        : w1(std::move(l1)), w2(std::move(l2)), w3(std::move(l3)), w4(std::move(l4)) {}

    // Four activated feature maps; differentiable w.r.t. the image, never
    // w.r.t. the weights.
    std::vector<Var<S>> features(const Var<S>& img) const {
        std::vector<Var<S>> out;
        Var<S> h = leaky_relu(conv2d(img, Var<S>::constant(w1), 1, 0), S(0.2));
        out.push_back(h);
        h = leaky_relu(conv2d(h, Var<S>::constant(w2), 2, 1), S(0.2));
        out.push_back(h);
        h = leaky_relu(conv2d(h, Var<S>::constant(w3), 2, 1), S(0.2));
        out.push_back(h);
        h = leaky_relu(conv2d(h, Var<S>::constant(w4), 2, 1), S(0.2));
        out.push_back(h);
        return out;
    }
};

template <class S>
Var<S> perceptual_loss(const Var<S>& generated, const Var<S>& target,
                       const FeatureExtractor<S>& fx) {
    require_same_shape(generated.value(), target.value(), "perceptual_loss");
    std::vector<Var<S>> fa = fx.features(generated);
    std::vector<Var<S>> fb = fx.features(target);
    Var<S> acc;
    for (std::size_t i = 0; i < fa.size(); ++i) {
        Var<S> layer = mean(abs_op(sub(fa[i], fb[i])));
        acc = i == 0 ? layer : add(acc, layer);
    }
    return acc;
}

template <class S>
Var<S> total_loss(const Var<S>& gan_part, const Var<S>& l1_part, const Var<S>& p_part,
                  const LossWeights& w) {
    w.validate();
    return add(add(scale(gan_part, S(w.lambda_gan)), scale(l1_part, S(w.lambda_l1))),
               scale(p_part, S(w.lambda_p)));
}

}  // namespace xing
