#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "xing/blocks.hpp"
#include "xing/ops.hpp"
#include "xing/rng.hpp"

namespace xing {

enum class Variant { SA, AS, SA_AS, FULL };

inline Variant parse_variant(const std::string& s) {
    if (s == "SA") return Variant::SA;
    if (s == "AS") return Variant::AS;
    if (s == "SA+AS") return Variant::SA_AS;
    if (s == "FULL") return Variant::FULL;
    throw std::invalid_argument("unknown variant '" + s + "' (expected SA, AS, SA+AS, FULL)");
}

inline std::string variant_name(Variant v) {
    switch (v) {
        case Variant::SA: return "SA";
        case Variant::AS: return "AS";
        case Variant::SA_AS: return "SA+AS";
        case Variant::FULL: return "FULL";
    }
    return "?";
}

// ---- encoder: two stride-2 convs, each followed by instance norm + ReLU ----

template <class S>
struct EncoderParams {
    Var<S> w1, b1, n1g, n1b;
    Var<S> w2, b2, n2g, n2b;

    static EncoderParams init(int in_ch, int c, Rng& rng) {
        EncoderParams p;
        int mid = c / 2;
        p.w1 = Var<S>::leaf(Tensor<S>::uniform_fan_in({mid, in_ch, 3, 3}, in_ch * 9, rng), true);
        p.b1 = Var<S>::leaf(Tensor<S>::zeros({mid}), true);
        p.n1g = Var<S>::leaf(Tensor<S>::ones({mid}), true);
        p.n1b = Var<S>::leaf(Tensor<S>::zeros({mid}), true);
        p.w2 = Var<S>::leaf(Tensor<S>::uniform_fan_in({c, mid, 3, 3}, mid * 9, rng), true);
        p.b2 = Var<S>::leaf(Tensor<S>::zeros({c}), true);
        p.n2g = Var<S>::leaf(Tensor<S>::ones({c}), true);
        p.n2b = Var<S>::leaf(Tensor<S>::zeros({c}), true);
        return p;
    }

    template <class F>
    void visit(const std::string& prefix, F&& f) {
        f(prefix + ".conv1.w", w1);
        f(prefix + ".conv1.b", b1);
        f(prefix + ".norm1.g", n1g);
        f(prefix + ".norm1.b", n1b);
        f(prefix + ".conv2.w", w2);
        f(prefix + ".conv2.b", b2);
        f(prefix + ".norm2.g", n2g);
        f(prefix + ".norm2.b", n2b);
    }
};

template <class S>
Var<S> encoder_forward(const Var<S>& x, const EncoderParams<S>& p) {
    const auto& shp = x.value().shape;
    if (shp[1] % 4 != 0 || shp[2] % 4 != 0)
        throw std::invalid_argument(
            "encoder input " + shape_str(shp) + " must have spatial dims divisible by 4; pad to " +
            std::to_string((shp[1] + 3) / 4 * 4) + "x" + std::to_string((shp[2] + 3) / 4 * 4));
    Var<S> h = relu(instance_norm(conv2d(x, p.w1, p.b1, 2, 1), p.n1g, p.n1b));
    return relu(instance_norm(conv2d(h, p.w2, p.b2, 2, 1), p.n2g, p.n2b));
}

// ---- decoder trunk: two stride-2 transposed convs (4x upsample), then a
// final conv whose kernel size is carried by its weight shape ----

template <class S>
struct DecoderParams {
    Var<S> tw1, tb1, n1g, n1b;
    Var<S> tw2, tb2, n2g, n2b;
    Var<S> fw, fb;

    static DecoderParams init(int in_ch, int c, int out_ch, int final_k, Rng& rng) {
        DecoderParams p;
        int mid1 = c / 2, mid2 = c / 4;
        p.tw1 = Var<S>::leaf(Tensor<S>::uniform_fan_in({in_ch, mid1, 4, 4}, in_ch * 16, rng), true);
        p.tb1 = Var<S>::leaf(Tensor<S>::zeros({mid1}), true);
        p.n1g = Var<S>::leaf(Tensor<S>::ones({mid1}), true);
        p.n1b = Var<S>::leaf(Tensor<S>::zeros({mid1}), true);
        p.tw2 = Var<S>::leaf(Tensor<S>::uniform_fan_in({mid1, mid2, 4, 4}, mid1 * 16, rng), true);
        p.tb2 = Var<S>::leaf(Tensor<S>::zeros({mid2}), true);
        p.n2g = Var<S>::leaf(Tensor<S>::ones({mid2}), true);
        p.n2b = Var<S>::leaf(Tensor<S>::zeros({mid2}), true);
        p.fw = Var<S>::leaf(
            Tensor<S>::uniform_fan_in({out_ch, mid2, final_k, final_k}, mid2 * final_k * final_k, rng),
            true);
        p.fb = Var<S>::leaf(Tensor<S>::zeros({out_ch}), true);
        return p;
    }

    template <class F>
    void visit(const std::string& prefix, F&& f) {
        f(prefix + ".up1.w", tw1);
        f(prefix + ".up1.b", tb1);
        f(prefix + ".norm1.g", n1g);
        f(prefix + ".norm1.b", n1b);
        f(prefix + ".up2.w", tw2);
        f(prefix + ".up2.b", tb2);
        f(prefix + ".norm2.g", n2g);
        f(prefix + ".norm2.b", n2b);
        f(prefix + ".final.w", fw);
        f(prefix + ".final.b", fb);
    }
};

template <class S>
Var<S> decoder_forward(const Var<S>& x, const DecoderParams<S>& p) {
    Var<S> h = relu(instance_norm(conv_transpose2d(x, p.tw1, p.tb1, 2, 1), p.n1g, p.n1b));
    h = relu(instance_norm(conv_transpose2d(h, p.tw2, p.tb2, 2, 1), p.n2g, p.n2b));
    int k = p.fw.value().shape[2];
    return conv2d(h, p.fw, p.fb, 1, k / 2);
}

// ---- generator ----

template <class S>
struct GenOutput {
    Var<S> final_image;                 // [3,H,W]
    std::vector<Var<S>> inter_i;        // N decoded appearance candidates (FULL)
    std::vector<Var<S>> inter_p;        // N decoded shape candidates (FULL)
    Var<S> attention;                   // [2N+1,H,W] channel-softmaxed (FULL)
    Var<S> f_i_final, f_p_final;        // codes after the cascade
    Var<S> f_i_initial;
};

template <class S>
struct GeneratorParams {
    Variant variant = Variant::FULL;
    int t_blocks = 0;
    int n_images = 0;
    int c = 0;

    EncoderParams<S> enc_i, enc_p;
    std::vector<SABlockParams<S>> sa;
    std::vector<ASBlockParams<S>> as;
    DecoderParams<S> dec_i;             // FULL: 3N-channel appearance decoder; other
                                        // variants: the single 3-channel decoder
    DecoderParams<S> dec_p;             // FULL only
    DecoderParams<S> attn_head;         // FULL only
    Var<S> fuse_w, fuse_b;              // SA+AS only

    static GeneratorParams init(Variant v, int T, int N, int c, Rng& rng) {
        if (T < 1) throw std::invalid_argument("generator needs T >= 1 blocks");
        if (N < 1) throw std::invalid_argument("generator needs N >= 1 candidate images");
        if (c % 4 != 0 || c < 4)
            throw std::invalid_argument("channel width c must be a positive multiple of 4, got " +
                                        std::to_string(c));
        GeneratorParams p;
        p.variant = v;
        p.t_blocks = T;
        p.n_images = N;
        p.c = c;
        p.enc_i = EncoderParams<S>::init(3, c, rng);
        p.enc_p = EncoderParams<S>::init(36, c, rng);
        bool want_sa = v != Variant::AS;
        bool want_as = v != Variant::SA;
        for (int t = 0; t < T; ++t) {
            if (want_sa) p.sa.push_back(SABlockParams<S>::init(c, rng));
            if (want_as) p.as.push_back(ASBlockParams<S>::init(c, rng));
        }
        if (v == Variant::FULL) {
            p.dec_i = DecoderParams<S>::init(c, c, 3 * N, 3, rng);
            p.dec_p = DecoderParams<S>::init(c, c, 3 * N, 3, rng);
            p.attn_head = DecoderParams<S>::init(2 * c, c, 2 * N + 1, 1, rng);
        } else {
            p.dec_i = DecoderParams<S>::init(c, c, 3, 3, rng);
            if (v == Variant::SA_AS) {
                p.fuse_w = Var<S>::leaf(Tensor<S>::uniform_fan_in({c, 2 * c, 3, 3}, 2 * c * 9, rng),
                                        true);
                p.fuse_b = Var<S>::leaf(Tensor<S>::zeros({c}), true);
            }
        }
        return p;
    }

    template <class F>
    void visit(F&& f) {
        enc_i.visit("enc_i", f);
        enc_p.visit("enc_p", f);
        for (std::size_t t = 0; t < sa.size(); ++t) sa[t].visit("block" + std::to_string(t) + ".sa", f);
        for (std::size_t t = 0; t < as.size(); ++t) as[t].visit("block" + std::to_string(t) + ".as", f);
        if (variant == Variant::FULL) {
            dec_i.visit("dec_i", f);
            dec_p.visit("dec_p", f);
            attn_head.visit("attn", f);
        } else {
            dec_i.visit("dec", f);
            if (variant == Variant::SA_AS) {
                f(std::string("fuse.w"), fuse_w);
                f(std::string("fuse.b"), fuse_b);
            }
        }
    }
};

template <class S>
Var<S> encode_image(const Var<S>& i_s, const GeneratorParams<S>& p) {
    if (i_s.value().rank() != 3 || i_s.value().shape[0] != 3)
        throw std::invalid_argument("image must be [3,H,W], got shape " +
                                    shape_str(i_s.value().shape));
    return encoder_forward(i_s, p.enc_i);
}

template <class S>
Var<S> encode_pose(const Var<S>& p_s, const Var<S>& p_t, const GeneratorParams<S>& p) {
    for (const Var<S>* hm : {&p_s, &p_t})
        if (hm->value().rank() != 3 || hm->value().shape[0] != 18)
            throw std::invalid_argument("pose heatmap must be [18,H,W], got shape " +
                                        shape_str(hm->value().shape));
    return encoder_forward(concat_channels<S>({p_s, p_t}), p.enc_p);
}

// Co-attention fusion: decode both final codes into N candidate images each,
// predict 2N+1 channel-softmaxed selection maps, and blend the candidates
// [appearance 1..N, shape 1..N, source image] per pixel.
template <class S>
GenOutput<S> caf_forward(const Var<S>& f_i, const Var<S>& f_p, const Var<S>& i_s,
                         const GeneratorParams<S>& p) {
    if (p.variant != Variant::FULL)
        throw std::logic_error("caf_forward requires FULL-variant parameters");
    require_same_shape(f_i.value(), f_p.value(), "caf_forward codes");
    int n = p.n_images;
    Var<S> dec_i_out = tanh_op(decoder_forward(f_i, p.dec_i));   // [3N,H,W]
    Var<S> dec_p_out = tanh_op(decoder_forward(f_p, p.dec_p));
    if (dec_i_out.value().shape[1] != i_s.value().shape[1] ||
        dec_i_out.value().shape[2] != i_s.value().shape[2])
        throw std::invalid_argument("source image " + shape_str(i_s.value().shape) +
                                    " does not match decoder resolution " +
                                    shape_str(dec_i_out.value().shape));
    GenOutput<S> out;
    for (int j = 0; j < n; ++j) {
        out.inter_i.push_back(slice_channels(dec_i_out, 3 * j, 3));
        out.inter_p.push_back(slice_channels(dec_p_out, 3 * j, 3));
    }
    Var<S> logits = decoder_forward(concat_channels<S>({f_i, f_p}), p.attn_head);
    out.attention = softmax_channels(logits);                    // [2N+1,H,W]

    Var<S> acc;
    for (int j = 0; j < 2 * n + 1; ++j) {
        const Var<S>& cand = j < n ? out.inter_i[j] : (j < 2 * n ? out.inter_p[j - n] : i_s);
        Var<S> term = mul_bc1(slice_channels(out.attention, j, 1), cand);
        acc = j == 0 ? term : add(acc, term);
    }
    out.final_image = acc;
    return out;
}

// Full cascade: encode, T crossed attention updates, then the variant's head.
template <class S>
GenOutput<S> xing_generator_forward(const Var<S>& i_s, const Var<S>& p_s, const Var<S>& p_t,
                                    const GeneratorParams<S>& p) {
    Var<S> f_i = encode_image(i_s, p);
    Var<S> f_p = encode_pose(p_s, p_t, p);
    GenOutput<S> out;
    out.f_i_initial = f_i;
    for (int t = 0; t < p.t_blocks; ++t) {
        switch (p.variant) {
            case Variant::SA: {
                f_i = sa_block(f_i, f_p, p.sa[t]);
                break;
            }
            case Variant::AS: {
                f_p = as_block(f_p, f_i, f_i, p.as[t]);
                break;
            }
            default: {
                Var<S> f_i_new = sa_block(f_i, f_p, p.sa[t]);
                f_p = as_block(f_p, f_i, f_i_new, p.as[t]);
                f_i = f_i_new;
                break;
            }
        }
    }
    out.f_i_final = f_i;
    out.f_p_final = f_p;
    switch (p.variant) {
        case Variant::FULL: {
            GenOutput<S> caf = caf_forward(f_i, f_p, i_s, p);
            caf.f_i_initial = out.f_i_initial;
            caf.f_i_final = f_i;
            caf.f_p_final = f_p;
            return caf;
        }
        case Variant::SA:
            out.final_image = tanh_op(decoder_forward(f_i, p.dec_i));
            return out;
        case Variant::AS:
            out.final_image = tanh_op(decoder_forward(f_p, p.dec_i));
            return out;
        case Variant::SA_AS: {
            Var<S> fused = conv2d(concat_channels<S>({f_i, f_p}), p.fuse_w, p.fuse_b, 1, 1);
            out.final_image = tanh_op(decoder_forward(fused, p.dec_i));
            return out;
        }
    }
    throw std::logic_error("unreachable variant");
}

// ---- conditional patch discriminators ----

template <class S>
struct DiscriminatorParams {
    int cond_ch = 0;
    Var<S> w1, b1, w2, b2, w3, b3, w4, b4, fw, fb;

    static DiscriminatorParams init(int cond_ch, Rng& rng) {
        DiscriminatorParams p;
        p.cond_ch = cond_ch;
        int in = cond_ch + 3;
        p.w1 = Var<S>::leaf(Tensor<S>::uniform_fan_in({64, in, 3, 3}, in * 9, rng), true);
        p.b1 = Var<S>::leaf(Tensor<S>::zeros({64}), true);
        p.w2 = Var<S>::leaf(Tensor<S>::uniform_fan_in({128, 64, 3, 3}, 64 * 9, rng), true);
        p.b2 = Var<S>::leaf(Tensor<S>::zeros({128}), true);
        p.w3 = Var<S>::leaf(Tensor<S>::uniform_fan_in({256, 128, 3, 3}, 128 * 9, rng), true);
        p.b3 = Var<S>::leaf(Tensor<S>::zeros({256}), true);
        p.w4 = Var<S>::leaf(Tensor<S>::uniform_fan_in({512, 256, 3, 3}, 256 * 9, rng), true);
        p.b4 = Var<S>::leaf(Tensor<S>::zeros({512}), true);
        p.fw = Var<S>::leaf(Tensor<S>::uniform_fan_in({1, 512, 3, 3}, 512 * 9, rng), true);
        p.fb = Var<S>::leaf(Tensor<S>::zeros({1}), true);
        return p;
    }

    template <class F>
    void visit(const std::string& prefix, F&& f) {
        f(prefix + ".conv1.w", w1);
        f(prefix + ".conv1.b", b1);
        f(prefix + ".conv2.w", w2);
        f(prefix + ".conv2.b", b2);
        f(prefix + ".conv3.w", w3);
        f(prefix + ".conv3.b", b3);
        f(prefix + ".conv4.w", w4);
        f(prefix + ".conv4.b", b4);
        f(prefix + ".final.w", fw);
        f(prefix + ".final.b", fb);
    }
};

// Patch logit map over concat(condition, image). Raw logits; the loss applies
// the sigmoid.
template <class S>
Var<S> discriminator_forward(const Var<S>& condition, const Var<S>& image,
                             const DiscriminatorParams<S>& p) {
    if (image.value().rank() != 3 || image.value().shape[0] != 3)
        throw std::invalid_argument("discriminator image must be [3,H,W], got shape " +
                                    shape_str(image.value().shape));
    if (condition.value().rank() != 3 || condition.value().shape[0] != p.cond_ch)
        throw std::invalid_argument("discriminator condition must have " +
                                    std::to_string(p.cond_ch) + " channels, got shape " +
                                    shape_str(condition.value().shape));
    Var<S> x = concat_channels<S>({condition, image});
    x = leaky_relu(conv2d(x, p.w1, p.b1, 2, 1), S(0.2));
    x = leaky_relu(conv2d(x, p.w2, p.b2, 2, 1), S(0.2));
    x = leaky_relu(conv2d(x, p.w3, p.b3, 2, 1), S(0.2));
    x = leaky_relu(conv2d(x, p.w4, p.b4, 2, 1), S(0.2));
    return conv2d(x, p.fw, p.fb, 1, 1);
}

}  // namespace xing
