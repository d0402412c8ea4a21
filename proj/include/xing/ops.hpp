#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "xing/autograd.hpp"
#include "xing/gemm.hpp"
#include "xing/tensor.hpp"

namespace xing {

namespace detail {

template <class S>
inline void axpy(std::size_t n, S a, const S* x, S* y) {
    for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

template <class S>
inline void acc(Tensor<S>& dst, const S* src) {
    for (std::size_t i = 0; i < dst.numel(); ++i) dst.data[i] += src[i];
}

template <class S>
inline bool wants_grad(const Node<S>& self, std::size_t parent) {
    return self.parents[parent]->requires_grad;
}

}  // namespace detail

// ---- elementwise arithmetic ----

template <class S>
Var<S> add(const Var<S>& a, const Var<S>& b) {
    require_same_shape(a.value(), b.value(), "add");
    Tensor<S> out = a.value();
    for (std::size_t i = 0; i < out.numel(); ++i) out.data[i] += b.value().data[i];
    return Var<S>::op(std::move(out), {a, b}, [](Node<S>& self) {
        for (int p = 0; p < 2; ++p)
            if (detail::wants_grad(self, p)) detail::acc(self.parents[p]->gbuf, self.gbuf.data.data());
    });
}

template <class S>
Var<S> sub(const Var<S>& a, const Var<S>& b) {
    require_same_shape(a.value(), b.value(), "sub");
    Tensor<S> out = a.value();
    for (std::size_t i = 0; i < out.numel(); ++i) out.data[i] -= b.value().data[i];
    return Var<S>::op(std::move(out), {a, b}, [](Node<S>& self) {
        if (detail::wants_grad(self, 0)) detail::acc(self.parents[0]->gbuf, self.gbuf.data.data());
        if (detail::wants_grad(self, 1))
            detail::axpy(self.gbuf.numel(), S(-1), self.gbuf.data.data(),
                         self.parents[1]->gbuf.data.data());
    });
}

template <class S>
Var<S> mul(const Var<S>& a, const Var<S>& b) {
    require_same_shape(a.value(), b.value(), "mul");
    Tensor<S> out = a.value();
    for (std::size_t i = 0; i < out.numel(); ++i) out.data[i] *= b.value().data[i];
    return Var<S>::op(std::move(out), {a, b}, [](Node<S>& self) {
        const Tensor<S>& av = self.parents[0]->value;
        const Tensor<S>& bv = self.parents[1]->value;
        if (detail::wants_grad(self, 0)) {
            S* g = self.parents[0]->gbuf.data.data();
            for (std::size_t i = 0; i < av.numel(); ++i) g[i] += self.gbuf.data[i] * bv.data[i];
        }
        if (detail::wants_grad(self, 1)) {
            S* g = self.parents[1]->gbuf.data.data();
            for (std::size_t i = 0; i < bv.numel(); ++i) g[i] += self.gbuf.data[i] * av.data[i];
        }
    });
}

// Scalar Var (shape {1}) times tensor; the learned gate coefficients go
// through this.
template <class S>
Var<S> smul(const Var<S>& s, const Var<S>& x) {
    if (s.value().numel() != 1)
        throw std::invalid_argument("smul: scalar operand must have 1 element, got shape " +
                                    shape_str(s.value().shape));
    Tensor<S> out = x.value();
    S c = s.value().data[0];
    for (auto& v : out.data) v *= c;
    return Var<S>::op(std::move(out), {s, x}, [](Node<S>& self) {
        const Tensor<S>& xv = self.parents[1]->value;
        S c = self.parents[0]->value.data[0];
        if (detail::wants_grad(self, 0)) {
            S acc = S(0);
            for (std::size_t i = 0; i < xv.numel(); ++i) acc += self.gbuf.data[i] * xv.data[i];
            self.parents[0]->gbuf.data[0] += acc;
        }
        if (detail::wants_grad(self, 1))
            detail::axpy(xv.numel(), c, self.gbuf.data.data(), self.parents[1]->gbuf.data.data());
    });
}

template <class S>
Var<S> scale(const Var<S>& x, S c) {
    Tensor<S> out = x.value();
    for (auto& v : out.data) v *= c;
    return Var<S>::op(std::move(out), {x}, [c](Node<S>& self) {
        if (detail::wants_grad(self, 0))
            detail::axpy(self.gbuf.numel(), c, self.gbuf.data.data(),
                         self.parents[0]->gbuf.data.data());
    });
}

template <class S>
Var<S> add_const(const Var<S>& x, S c) {
    Tensor<S> out = x.value();
    for (auto& v : out.data) v += c;
    return Var<S>::op(std::move(out), {x}, [](Node<S>& self) {
        if (detail::wants_grad(self, 0)) detail::acc(self.parents[0]->gbuf, self.gbuf.data.data());
    });
}

// ---- activations ----

template <class S>
Var<S> relu(const Var<S>& x) {
    Tensor<S> out = x.value();
    for (auto& v : out.data) v = v > S(0) ? v : S(0);
    return Var<S>::op(std::move(out), {x}, [](Node<S>& self) {
        if (!detail::wants_grad(self, 0)) return;
        const Tensor<S>& xv = self.parents[0]->value;
        S* g = self.parents[0]->gbuf.data.data();
        for (std::size_t i = 0; i < xv.numel(); ++i)
            if (xv.data[i] > S(0)) g[i] += self.gbuf.data[i];
    });
}

template <class S>
Var<S> leaky_relu(const Var<S>& x, S slope) {
    Tensor<S> out = x.value();
    for (auto& v : out.data) v = v > S(0) ? v : slope * v;
    return Var<S>::op(std::move(out), {x}, [slope](Node<S>& self) {
        if (!detail::wants_grad(self, 0)) return;
        const Tensor<S>& xv = self.parents[0]->value;
        S* g = self.parents[0]->gbuf.data.data();
        for (std::size_t i = 0; i < xv.numel(); ++i)
            g[i] += self.gbuf.data[i] * (xv.data[i] > S(0) ? S(1) : slope);
    });
}

template <class S>
Var<S> tanh_op(const Var<S>& x) {
    Tensor<S> out = x.value();
    for (auto& v : out.data) v = std::tanh(v);
    return Var<S>::op(std::move(out), {x}, [](Node<S>& self) {
        if (!detail::wants_grad(self, 0)) return;
        S* g = self.parents[0]->gbuf.data.data();
        for (std::size_t i = 0; i < self.value.numel(); ++i) {
            S y = self.value.data[i];
            g[i] += self.gbuf.data[i] * (S(1) - y * y);
        }
    });
}

// Subgradient 0 at the kink.
template <class S>
Var<S> abs_op(const Var<S>& x) {
    Tensor<S> out = x.value();
    for (auto& v : out.data) v = std::abs(v);
    return Var<S>::op(std::move(out), {x}, [](Node<S>& self) {
        if (!detail::wants_grad(self, 0)) return;
        const Tensor<S>& xv = self.parents[0]->value;
        S* g = self.parents[0]->gbuf.data.data();
        for (std::size_t i = 0; i < xv.numel(); ++i) {
            if (xv.data[i] > S(0)) g[i] += self.gbuf.data[i];
            else if (xv.data[i] < S(0)) g[i] -= self.gbuf.data[i];
        }
    });
}

// ---- reductions ----

template <class S>
Var<S> sum(const Var<S>& x) {
    S acc = S(0);
    for (S v : x.value().data) acc += v;
    return Var<S>::op(Tensor<S>({1}, {acc}), {x}, [](Node<S>& self) {
        if (!detail::wants_grad(self, 0)) return;
        S g = self.gbuf.data[0];
        for (auto& v : self.parents[0]->gbuf.data) v += g;
    });
}

template <class S>
Var<S> mean(const Var<S>& x) {
    S acc = S(0);
    for (S v : x.value().data) acc += v;
    S n = static_cast<S>(x.value().numel());
    return Var<S>::op(Tensor<S>({1}, {acc / n}), {x}, [n](Node<S>& self) {
        if (!detail::wants_grad(self, 0)) return;
        S g = self.gbuf.data[0] / n;
        for (auto& v : self.parents[0]->gbuf.data) v += g;
    });
}

// ---- shape plumbing ----

template <class S>
Var<S> reshape(const Var<S>& x, std::vector<int> shape) {
    Tensor<S> out = x.value().reshaped(shape);
    return Var<S>::op(std::move(out), {x}, [](Node<S>& self) {
        if (detail::wants_grad(self, 0)) detail::acc(self.parents[0]->gbuf, self.gbuf.data.data());
    });
}

template <class S>
Var<S> transpose2(const Var<S>& x) {
    if (x.value().rank() != 2)
        throw std::invalid_argument("transpose2 expects a rank-2 tensor, got shape " +
                                    shape_str(x.value().shape));
    int r = x.value().shape[0], c = x.value().shape[1];
    Tensor<S> out = Tensor<S>::zeros({c, r});
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) out.data[std::size_t(j) * r + i] = x.value().data[std::size_t(i) * c + j];
    return Var<S>::op(std::move(out), {x}, [r, c](Node<S>& self) {
        if (!detail::wants_grad(self, 0)) return;
        S* g = self.parents[0]->gbuf.data.data();
        for (int j = 0; j < c; ++j)
            for (int i = 0; i < r; ++i) g[std::size_t(i) * c + j] += self.gbuf.data[std::size_t(j) * r + i];
    });
}

template <class S>
Var<S> concat_channels(const std::vector<Var<S>>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_channels: no inputs");
    int h = parts[0].value().shape.size() == 3 ? parts[0].value().shape[1] : -1;
    int w = h < 0 ? -1 : parts[0].value().shape[2];
    int ctot = 0;
    for (const auto& p : parts) {
        if (p.value().rank() != 3 || p.value().shape[1] != h || p.value().shape[2] != w)
            throw std::invalid_argument("concat_channels: input shape " + shape_str(p.value().shape) +
                                        " incompatible with " + shape_str(parts[0].value().shape));
        ctot += p.value().shape[0];
    }
    Tensor<S> out = Tensor<S>::zeros({ctot, h, w});
    std::size_t off = 0;
    for (const auto& p : parts) {
        std::copy(p.value().data.begin(), p.value().data.end(), out.data.begin() + off);
        off += p.value().numel();
    }
    return Var<S>::op(std::move(out), parts, [](Node<S>& self) {
        std::size_t off = 0;
        for (std::size_t p = 0; p < self.parents.size(); ++p) {
            std::size_t n = self.parents[p]->value.numel();
            if (detail::wants_grad(self, p)) detail::acc(self.parents[p]->gbuf, self.gbuf.data.data() + off);
            off += n;
        }
    });
}

template <class S>
Var<S> slice_channels(const Var<S>& x, int from, int count) {
    if (x.value().rank() != 3)
        throw std::invalid_argument("slice_channels expects rank-3, got shape " +
                                    shape_str(x.value().shape));
    int c = x.value().shape[0], h = x.value().shape[1], w = x.value().shape[2];
    if (from < 0 || count < 1 || from + count > c)
        throw std::invalid_argument("slice_channels: range [" + std::to_string(from) + ", " +
                                    std::to_string(from + count) + ") outside " + std::to_string(c) +
                                    " channels");
    std::size_t plane = std::size_t(h) * w;
    Tensor<S> out = Tensor<S>::zeros({count, h, w});
    std::copy(x.value().data.begin() + std::size_t(from) * plane,
              x.value().data.begin() + std::size_t(from + count) * plane, out.data.begin());
    return Var<S>::op(std::move(out), {x}, [from, plane](Node<S>& self) {
        if (!detail::wants_grad(self, 0)) return;
        S* g = self.parents[0]->gbuf.data.data() + std::size_t(from) * plane;
        detail::axpy(self.gbuf.numel(), S(1), self.gbuf.data.data(), g);
    });
}

// Broadcast a single-channel map over every channel of x.
template <class S>
Var<S> mul_bc1(const Var<S>& m, const Var<S>& x) {
    if (m.value().rank() != 3 || m.value().shape[0] != 1)
        throw std::invalid_argument("mul_bc1: map must be [1,H,W], got shape " +
                                    shape_str(m.value().shape));
    if (x.value().rank() != 3 || x.value().shape[1] != m.value().shape[1] ||
        x.value().shape[2] != m.value().shape[2])
        throw std::invalid_argument("mul_bc1: spatial mismatch between map " +
                                    shape_str(m.value().shape) + " and input " +
                                    shape_str(x.value().shape));
    int c = x.value().shape[0];
    std::size_t plane = x.value().numel() / c;
    Tensor<S> out = x.value();
    for (int ch = 0; ch < c; ++ch)
        for (std::size_t i = 0; i < plane; ++i) out.data[ch * plane + i] *= m.value().data[i];
    return Var<S>::op(std::move(out), {m, x}, [c, plane](Node<S>& self) {
        const Tensor<S>& mv = self.parents[0]->value;
        const Tensor<S>& xv = self.parents[1]->value;
        if (detail::wants_grad(self, 0)) {
            S* g = self.parents[0]->gbuf.data.data();
            for (int ch = 0; ch < c; ++ch)
                for (std::size_t i = 0; i < plane; ++i)
                    g[i] += self.gbuf.data[ch * plane + i] * xv.data[ch * plane + i];
        }
        if (detail::wants_grad(self, 1)) {
            S* g = self.parents[1]->gbuf.data.data();
            for (int ch = 0; ch < c; ++ch)
                for (std::size_t i = 0; i < plane; ++i)
                    g[ch * plane + i] += self.gbuf.data[ch * plane + i] * mv.data[i];
        }
    });
}

// ---- matmul / softmax ----

template <class S>
Var<S> matmul(const Var<S>& a, const Var<S>& b) {
    if (a.value().rank() != 2 || b.value().rank() != 2)
        throw std::invalid_argument("matmul expects rank-2 operands, got " +
                                    shape_str(a.value().shape) + " and " + shape_str(b.value().shape));
    int m = a.value().shape[0], k = a.value().shape[1];
    int k2 = b.value().shape[0], n = b.value().shape[1];
    if (k != k2)
        throw std::invalid_argument("matmul: inner dimensions disagree, " + shape_str(a.value().shape) +
                                    " x " + shape_str(b.value().shape));
    Tensor<S> out = Tensor<S>::zeros({m, n});
    gemm(false, false, m, n, k, S(1), a.value().data.data(), b.value().data.data(), S(0),
         out.data.data());
    return Var<S>::op(std::move(out), {a, b}, [m, n, k](Node<S>& self) {
        const S* g = self.gbuf.data.data();
        if (detail::wants_grad(self, 0))
            gemm(false, true, m, k, n, S(1), g, self.parents[1]->value.data.data(), S(1),
                 self.parents[0]->gbuf.data.data());
        if (detail::wants_grad(self, 1))
            gemm(true, false, k, n, m, S(1), self.parents[0]->value.data.data(), g, S(1),
                 self.parents[1]->gbuf.data.data());
    });
}

// Row-wise softmax of a rank-2 tensor, max-subtracted. Rejects non-finite
// input instead of quietly emitting NaN rows.
template <class S>
Var<S> softmax_rows(const Var<S>& x) {
    if (x.value().rank() != 2)
        throw std::invalid_argument("softmax_rows expects rank-2, got shape " +
                                    shape_str(x.value().shape));
    if (!x.value().all_finite())
        throw std::invalid_argument("softmax_rows: non-finite input");
    int r = x.value().shape[0], c = x.value().shape[1];
    Tensor<S> out = Tensor<S>::zeros({r, c});
    for (int i = 0; i < r; ++i) {
        const S* row = x.value().data.data() + std::size_t(i) * c;
        S* orow = out.data.data() + std::size_t(i) * c;
        S mx = row[0];
        for (int j = 1; j < c; ++j) mx = std::max(mx, row[j]);
        S z = S(0);
        for (int j = 0; j < c; ++j) {
            orow[j] = std::exp(row[j] - mx);
            z += orow[j];
        }
        for (int j = 0; j < c; ++j) orow[j] /= z;
    }
    return Var<S>::op(std::move(out), {x}, [r, c](Node<S>& self) {
        if (!detail::wants_grad(self, 0)) return;
        S* g = self.parents[0]->gbuf.data.data();
        for (int i = 0; i < r; ++i) {
            const S* y = self.value.data.data() + std::size_t(i) * c;
            const S* go = self.gbuf.data.data() + std::size_t(i) * c;
            S dot = S(0);
            for (int j = 0; j < c; ++j) dot += go[j] * y[j];
            for (int j = 0; j < c; ++j) g[std::size_t(i) * c + j] += y[j] * (go[j] - dot);
        }
    });
}

// ---- convolution ----

template <class S>
inline void conv_check_input(const Tensor<S>& x, const Tensor<S>& w, int stride, int pad,
                             const char* what) {
    if (x.rank() != 3) throw std::invalid_argument(std::string(what) + ": input must be [C,H,W], got " + shape_str(x.shape));
    if (w.rank() != 4) throw std::invalid_argument(std::string(what) + ": weight must be rank-4, got " + shape_str(w.shape));
    if (w.shape[2] != w.shape[3]) throw std::invalid_argument(std::string(what) + ": kernel must be square, got " + shape_str(w.shape));
    if (stride < 1) throw std::invalid_argument(std::string(what) + ": stride must be >= 1");
    if (pad < 0) throw std::invalid_argument(std::string(what) + ": pad must be >= 0");
}

// x [Cin,H,W], w [Cout,Cin,k,k], optional b [Cout]; output [Cout,Ho,Wo] with
// Ho = (H + 2*pad - k)/stride + 1. im2col plus one gemm; the backward pass
// rebuilds the column buffer instead of caching it.
template <class S>
Var<S> conv2d(const Var<S>& x, const Var<S>& w, const Var<S>& b, int stride, int pad) {
    conv_check_input(x.value(), w.value(), stride, pad, "conv2d");
    const auto& xs = x.value().shape;
    const auto& ws = w.value().shape;
    int cin = xs[0], h = xs[1], wd = xs[2];
    int cout = ws[0], k = ws[2];
    if (ws[1] != cin)
        throw std::invalid_argument("conv2d: weight expects " + std::to_string(ws[1]) +
                                    " input channels but input has shape " + shape_str(xs));
    if (h + 2 * pad < k || wd + 2 * pad < k)
        throw std::invalid_argument("conv2d: kernel " + std::to_string(k) + " larger than padded input " +
                                    shape_str(xs) + " pad " + std::to_string(pad));
    bool with_bias = b.valid();
    if (with_bias && (b.value().rank() != 1 || b.value().shape[0] != cout))
        throw std::invalid_argument("conv2d: bias must be [" + std::to_string(cout) + "], got " +
                                    shape_str(b.value().shape));
    int ho = (h + 2 * pad - k) / stride + 1;
    int wo = (wd + 2 * pad - k) / stride + 1;
    std::size_t cols = std::size_t(ho) * wo;
    std::vector<S> col(std::size_t(cin) * k * k * cols);
    im2col(x.value().data.data(), cin, h, wd, k, stride, pad, ho, wo, col.data());
    Tensor<S> out = Tensor<S>::zeros({cout, ho, wo});
    gemm(false, false, cout, int(cols), cin * k * k, S(1), w.value().data.data(), col.data(), S(0),
         out.data.data());
    if (with_bias)
        for (int oc = 0; oc < cout; ++oc)
            for (std::size_t i = 0; i < cols; ++i) out.data[oc * cols + i] += b.value().data[oc];

    std::vector<Var<S>> parents = {x, w};
    if (with_bias) parents.push_back(b);
    auto bw = [cin, h, wd, cout, k, stride, pad, ho, wo, with_bias](Node<S>& self) {
        std::size_t cols = std::size_t(ho) * wo;
        const S* g = self.gbuf.data.data();
        bool need_x = detail::wants_grad(self, 0);
        bool need_w = detail::wants_grad(self, 1);
        if (need_w) {
            std::vector<S> col(std::size_t(cin) * k * k * cols);
            im2col(self.parents[0]->value.data.data(), cin, h, wd, k, stride, pad, ho, wo, col.data());
            gemm(false, true, cout, cin * k * k, int(cols), S(1), g, col.data(), S(1),
                 self.parents[1]->gbuf.data.data());
        }
        if (need_x) {
            std::vector<S> dcol(std::size_t(cin) * k * k * cols);
            gemm(true, false, cin * k * k, int(cols), cout, S(1), self.parents[1]->value.data.data(), g,
                 S(0), dcol.data());
            col2im(dcol.data(), cin, h, wd, k, stride, pad, ho, wo,
                   self.parents[0]->gbuf.data.data());
        }
        if (with_bias && detail::wants_grad(self, 2)) {
            S* gb = self.parents[2]->gbuf.data.data();
            for (int oc = 0; oc < cout; ++oc) {
                S acc = S(0);
                for (std::size_t i = 0; i < cols; ++i) acc += g[oc * cols + i];
                gb[oc] += acc;
            }
        }
    };
    return Var<S>::op(std::move(out), std::move(parents), std::move(bw));
}

template <class S>
Var<S> conv2d(const Var<S>& x, const Var<S>& w, int stride, int pad) {
    return conv2d(x, w, Var<S>(), stride, pad);
}

// x [Cin,H,W], w [Cin,Cout,k,k], optional b [Cout]; output [Cout,Ho,Wo] with
// Ho = (H-1)*stride - 2*pad + k. The scatter adjoint of conv2d: columns are
// built from x by one gemm and accumulated into the output image.
template <class S>
Var<S> conv_transpose2d(const Var<S>& x, const Var<S>& w, const Var<S>& b, int stride, int pad) {
    conv_check_input(x.value(), w.value(), stride, pad, "conv_transpose2d");
    const auto& xs = x.value().shape;
    const auto& ws = w.value().shape;
    int cin = xs[0], h = xs[1], wd = xs[2];
    int cout = ws[1], k = ws[2];
    if (ws[0] != cin)
        throw std::invalid_argument("conv_transpose2d: weight expects " + std::to_string(ws[0]) +
                                    " input channels but input has shape " + shape_str(xs));
    int ho = (h - 1) * stride - 2 * pad + k;
    int wo = (wd - 1) * stride - 2 * pad + k;
    if (ho < 1 || wo < 1)
        throw std::invalid_argument("conv_transpose2d: output would be empty for input " +
                                    shape_str(xs));
    bool with_bias = b.valid();
    if (with_bias && (b.value().rank() != 1 || b.value().shape[0] != cout))
        throw std::invalid_argument("conv_transpose2d: bias must be [" + std::to_string(cout) +
                                    "], got " + shape_str(b.value().shape));
    std::size_t cols = std::size_t(h) * wd;
    std::vector<S> col(std::size_t(cout) * k * k * cols);
    // col = w^T [Cout*k*k, Cin] x x [Cin, H*W]
    gemm(true, false, cout * k * k, int(cols), cin, S(1), w.value().data.data(),
         x.value().data.data(), S(0), col.data());
    Tensor<S> out = Tensor<S>::zeros({cout, ho, wo});
    col2im(col.data(), cout, ho, wo, k, stride, pad, h, wd, out.data.data());
    if (with_bias) {
        std::size_t plane = std::size_t(ho) * wo;
        for (int oc = 0; oc < cout; ++oc)
            for (std::size_t i = 0; i < plane; ++i) out.data[oc * plane + i] += b.value().data[oc];
    }

    std::vector<Var<S>> parents = {x, w};
    if (with_bias) parents.push_back(b);
    auto bw = [cin, h, wd, cout, k, stride, pad, ho, wo, with_bias](Node<S>& self) {
        std::size_t cols = std::size_t(h) * wd;
        const S* g = self.gbuf.data.data();
        bool need_x = detail::wants_grad(self, 0);
        bool need_w = detail::wants_grad(self, 1);
        if (need_x || need_w) {
            std::vector<S> gcol(std::size_t(cout) * k * k * cols);
            im2col(g, cout, ho, wo, k, stride, pad, h, wd, gcol.data());
            if (need_x)
                gemm(false, false, cin, int(cols), cout * k * k, S(1),
                     self.parents[1]->value.data.data(), gcol.data(), S(1),
                     self.parents[0]->gbuf.data.data());
            if (need_w)
                gemm(false, true, cin, cout * k * k, int(cols), S(1),
                     self.parents[0]->value.data.data(), gcol.data(), S(1),
                     self.parents[1]->gbuf.data.data());
        }
        if (with_bias && detail::wants_grad(self, 2)) {
            std::size_t plane = std::size_t(ho) * wo;
            S* gb = self.parents[2]->gbuf.data.data();
            for (int oc = 0; oc < cout; ++oc) {
                S acc = S(0);
                for (std::size_t i = 0; i < plane; ++i) acc += g[oc * plane + i];
                gb[oc] += acc;
            }
        }
    };
    return Var<S>::op(std::move(out), std::move(parents), std::move(bw));
}

// ---- normalization ----

// Per-channel standardization over the spatial extent with population
// variance, then the affine gamma/beta. Needs H*W >= 2 so the variance is
// meaningful.
template <class S>
Var<S> instance_norm(const Var<S>& x, const Var<S>& gamma, const Var<S>& beta, S eps = S(1e-5)) {
    if (x.value().rank() != 3)
        throw std::invalid_argument("instance_norm expects [C,H,W], got shape " +
                                    shape_str(x.value().shape));
    int c = x.value().shape[0];
    std::size_t m = std::size_t(x.value().shape[1]) * x.value().shape[2];
    if (m < 2)
        throw std::invalid_argument("instance_norm: spatial extent must be >= 2, got shape " +
                                    shape_str(x.value().shape));
    auto check_affine = [&](const Tensor<S>& t, const char* name) {
        if (t.rank() != 1 || t.shape[0] != c)
            throw std::invalid_argument(std::string("instance_norm: ") + name + " must be [" +
                                        std::to_string(c) + "], got " + shape_str(t.shape));
    };
    check_affine(gamma.value(), "gamma");
    check_affine(beta.value(), "beta");
    std::vector<S> mu(c), inv(c);
    Tensor<S> out = Tensor<S>::zeros(x.value().shape);
    for (int ch = 0; ch < c; ++ch) {
        const S* xp = x.value().data.data() + ch * m;
        S s = S(0);
        for (std::size_t i = 0; i < m; ++i) s += xp[i];
        mu[ch] = s / S(m);
        S v = S(0);
        for (std::size_t i = 0; i < m; ++i) {
            S d = xp[i] - mu[ch];
            v += d * d;
        }
        inv[ch] = S(1) / std::sqrt(v / S(m) + eps);
        S g = gamma.value().data[ch], bta = beta.value().data[ch];
        S* op = out.data.data() + ch * m;
        for (std::size_t i = 0; i < m; ++i) op[i] = g * (xp[i] - mu[ch]) * inv[ch] + bta;
    }
    return Var<S>::op(std::move(out), {x, gamma, beta},
                      [c, m, mu, inv](Node<S>& self) {
        for (int ch = 0; ch < c; ++ch) {
            const S* xp = self.parents[0]->value.data.data() + ch * m;
            const S* go = self.gbuf.data.data() + ch * m;
            S gam = self.parents[1]->value.data[ch];
            // dgamma, dbeta from xhat
            S sg = S(0), sgx = S(0);
            for (std::size_t i = 0; i < m; ++i) {
                S xhat = (xp[i] - mu[ch]) * inv[ch];
                sg += go[i];
                sgx += go[i] * xhat;
            }
            if (detail::wants_grad(self, 1)) self.parents[1]->gbuf.data[ch] += sgx;
            if (detail::wants_grad(self, 2)) self.parents[2]->gbuf.data[ch] += sg;
            if (detail::wants_grad(self, 0)) {
                S* gx = self.parents[0]->gbuf.data.data() + ch * m;
                S mg = gam * sg / S(m);
                S mgx = gam * sgx / S(m);
                for (std::size_t i = 0; i < m; ++i) {
                    S xhat = (xp[i] - mu[ch]) * inv[ch];
                    gx[i] += inv[ch] * (gam * go[i] - mg - xhat * mgx);
                }
            }
        }
    });
}

// ---- losses ----

inline double stable_sigmoid(double v) {
    if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
    double e = std::exp(v);
    return e / (1.0 + e);
}

// mean over elements of max(x,0) - x*t + log(1+exp(-|x|)), the overflow-safe
// form of -[t*log(sigmoid(x)) + (1-t)*log(1-sigmoid(x))] with a constant
// target t.
template <class S>
Var<S> bce_with_logits_mean(const Var<S>& logits, S target) {
    if (target < S(0) || target > S(1))
        throw std::invalid_argument("bce_with_logits_mean: target must lie in [0,1]");
    const Tensor<S>& x = logits.value();
    if (x.numel() == 0) throw std::invalid_argument("bce_with_logits_mean: empty logits");
    S acc = S(0);
    for (S v : x.data)
        acc += std::max(v, S(0)) - v * target + std::log1p(std::exp(-std::abs(v)));
    S n = static_cast<S>(x.numel());
    return Var<S>::op(Tensor<S>({1}, {acc / n}), {logits}, [target, n](Node<S>& self) {
        if (!detail::wants_grad(self, 0)) return;
        const Tensor<S>& xv = self.parents[0]->value;
        S g0 = self.gbuf.data[0] / n;
        S* g = self.parents[0]->gbuf.data.data();
        for (std::size_t i = 0; i < xv.numel(); ++i)
            g[i] += g0 * (S(stable_sigmoid(double(xv.data[i]))) - target);
    });
}

// ---- composites ----

// Softmax across the channel axis at each pixel of a [C,H,W] tensor,
// expressed through reshape/transpose/softmax_rows so it inherits their
// gradients.
template <class S>
Var<S> softmax_channels(const Var<S>& x) {
    if (x.value().rank() != 3)
        throw std::invalid_argument("softmax_channels expects [C,H,W], got shape " +
                                    shape_str(x.value().shape));
    int c = x.value().shape[0], h = x.value().shape[1], w = x.value().shape[2];
    Var<S> flat = reshape(x, {c, h * w});
    Var<S> t = transpose2(flat);
    Var<S> sm = softmax_rows(t);
    return reshape(transpose2(sm), {c, h, w});
}

}  // namespace xing
