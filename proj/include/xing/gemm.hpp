#pragma once

#include <cblas.h>

#include <vector>

namespace xing {

// Row-major C = alpha * op(A) * op(B) + beta * C through OpenBLAS.
inline void gemm(bool trans_a, bool trans_b, int m, int n, int k,
                 float alpha, const float* a, int lda, const float* b, int ldb,
                 float beta, float* c, int ldc) {
    cblas_sgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans,
                trans_b ? CblasTrans : CblasNoTrans, m, n, k, alpha, a, lda, b,
                ldb, beta, c, ldc);
}

inline void gemm(bool trans_a, bool trans_b, int m, int n, int k,
                 double alpha, const double* a, int lda, const double* b, int ldb,
                 double beta, double* c, int ldc) {
    cblas_dgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans,
                trans_b ? CblasTrans : CblasNoTrans, m, n, k, alpha, a, lda, b,
                ldb, beta, c, ldc);
}

// Tightly packed operands: leading dimensions follow from the shapes.
template <class S>
inline void gemm(bool trans_a, bool trans_b, int m, int n, int k, S alpha, const S* a, const S* b,
                 S beta, S* c) {
    gemm(trans_a, trans_b, m, n, k, alpha, a, trans_a ? m : k, b, trans_b ? k : n, beta, c, n);
}

// Unpacks k*k patches of a [C,H,W] image into a [C*k*k, Ho*Wo] matrix with
// zero padding, so convolution becomes one GEMM.
template <class S>
void im2col(const S* img, int c, int h, int w, int k, int stride, int pad,
            int ho, int wo, S* col) {
    for (int ch = 0; ch < c; ++ch) {
        for (int ki = 0; ki < k; ++ki) {
            for (int kj = 0; kj < k; ++kj) {
                S* row = col + (static_cast<std::size_t>(ch) * k * k + ki * k + kj) *
                                   (static_cast<std::size_t>(ho) * wo);
                const S* src = img + static_cast<std::size_t>(ch) * h * w;
                for (int oy = 0; oy < ho; ++oy) {
                    int iy = oy * stride + ki - pad;
                    if (iy < 0 || iy >= h) {
                        for (int ox = 0; ox < wo; ++ox) row[oy * wo + ox] = S(0);
                        continue;
                    }
                    for (int ox = 0; ox < wo; ++ox) {
                        int ix = ox * stride + kj - pad;
                        row[oy * wo + ox] = (ix < 0 || ix >= w) ? S(0) : src[iy * w + ix];
                    }
                }
            }
        }
    }
}

// Adjoint of im2col: scatter-adds a [C*k*k, Ho*Wo] matrix back onto a
// [C,H,W] image. Caller zeroes img first.
template <class S>
void col2im(const S* col, int c, int h, int w, int k, int stride, int pad,
            int ho, int wo, S* img) {
    for (int ch = 0; ch < c; ++ch) {
        for (int ki = 0; ki < k; ++ki) {
            for (int kj = 0; kj < k; ++kj) {
                const S* row = col + (static_cast<std::size_t>(ch) * k * k + ki * k + kj) *
                                         (static_cast<std::size_t>(ho) * wo);
                S* dst = img + static_cast<std::size_t>(ch) * h * w;
                for (int oy = 0; oy < ho; ++oy) {
                    int iy = oy * stride + ki - pad;
                    if (iy < 0 || iy >= h) continue;
                    for (int ox = 0; ox < wo; ++ox) {
                        int ix = ox * stride + kj - pad;
                        if (ix < 0 || ix >= w) continue;
                        dst[iy * w + ix] += row[oy * wo + ox];
                    }
                }
            }
        }
    }
}

}  // namespace xing
