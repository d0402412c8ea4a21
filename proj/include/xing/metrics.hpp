#pragma once

// Evaluation metrics: SSIM with an 11x11 Gaussian window, skeleton-mask SSIM,
// pixel-based joint detection, and PCKh keypoint accuracy.

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "xing/synth.hpp"
#include "xing/tensor.hpp"

namespace xing {

inline constexpr int kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;
inline constexpr double kSsimK1 = 0.01;
inline constexpr double kSsimK2 = 0.03;
inline constexpr double kDetectColorDist = 0.15;   // in [0,1]^3
inline constexpr double kDefaultMaskRadius = 3.0;  // px

struct BinaryMask {
    int h = 0, w = 0;
    std::vector<std::uint8_t> v;  // row-major, values {0,1}

    int area() const {
        int n = 0;
        for (std::uint8_t b : v) n += b;
        return n;
    }
};

namespace detail {

inline const std::vector<double>& ssim_kernel() {
    static const std::vector<double> k = [] {
        std::vector<double> out(kSsimWindow * kSsimWindow);
        double sum = 0.0;
        for (int y = 0; y < kSsimWindow; ++y)
            for (int x = 0; x < kSsimWindow; ++x) {
                double dy = y - kSsimWindow / 2, dx = x - kSsimWindow / 2;
                double g = std::exp(-(dx * dx + dy * dy) / (2.0 * kSsimSigma * kSsimSigma));
                out[static_cast<std::size_t>(y * kSsimWindow + x)] = g;
                sum += g;
            }
        for (double& g : out) g /= sum;
        return out;
    }();
    return k;
}

}  // namespace detail

// Mean SSIM between two images in [-1, 1]. Values are mapped to [0, 1], then
// each valid 11x11 window contributes one score through the Gaussian-weighted
// moment form; scores average over windows and channels. Identical inputs
// give exactly 1.0 because numerator and denominator come out bit-equal.
template <typename S>
double ssim(const Tensor<S>& a, const Tensor<S>& b) {
    require_same_shape(a, b, "ssim");
    if (a.rank() != 3) throw std::invalid_argument("ssim: expected [C,H,W], got " + shape_str(a.shape));
    int c = a.dim(0), h = a.dim(1), w = a.dim(2);
    if (h < kSsimWindow || w < kSsimWindow)
        throw std::invalid_argument("ssim: image " + shape_str(a.shape) + " smaller than the " +
                                    std::to_string(kSsimWindow) + "x" +
                                    std::to_string(kSsimWindow) + " window");
    const std::vector<double>& kern = detail::ssim_kernel();
    const double c1 = (kSsimK1 * 1.0) * (kSsimK1 * 1.0);
    const double c2 = (kSsimK2 * 1.0) * (kSsimK2 * 1.0);
    double total = 0.0;
    std::size_t count = 0;
    std::size_t plane = static_cast<std::size_t>(h) * static_cast<std::size_t>(w);
    for (int ch = 0; ch < c; ++ch) {
        const S* pa = a.data.data() + static_cast<std::size_t>(ch) * plane;
        const S* pb = b.data.data() + static_cast<std::size_t>(ch) * plane;
        for (int oy = 0; oy + kSsimWindow <= h; ++oy)
            for (int ox = 0; ox + kSsimWindow <= w; ++ox) {
                double mua = 0.0, mub = 0.0, eaa = 0.0, ebb = 0.0, eab = 0.0;
                for (int y = 0; y < kSsimWindow; ++y)
                    for (int x = 0; x < kSsimWindow; ++x) {
                        double k = kern[static_cast<std::size_t>(y * kSsimWindow + x)];
                        double ua = (static_cast<double>(pa[(oy + y) * w + ox + x]) + 1.0) / 2.0;
                        double ub = (static_cast<double>(pb[(oy + y) * w + ox + x]) + 1.0) / 2.0;
                        mua += k * ua;
                        mub += k * ub;
                        eaa += k * ua * ua;
                        ebb += k * ub * ub;
                        eab += k * ua * ub;
                    }
                double va = eaa - mua * mua;
                double vb = ebb - mub * mub;
                double cov = eab - mua * mub;
                double num = (2.0 * mua * mub + c1) * (2.0 * cov + c2);
                double den = (mua * mua + mub * mub + c1) * (va + vb + c2);
                total += num / den;
                ++count;
            }
    }
    return total / static_cast<double>(count);
}

// Union of limb segments dilated to the given radius.
BinaryMask pose_mask(const Skeleton& sk, const std::vector<Bone>& edges, double dilation_radius,
                     int h, int w);
BinaryMask pose_mask(const Skeleton& sk, double dilation_radius, int h, int w);
inline BinaryMask pose_mask(const Skeleton& sk, int h, int w) {
    return pose_mask(sk, kDefaultMaskRadius, h, w);
}

// SSIM after zeroing everything outside the mask in both images. The mask must
// be nonempty; an empty one signals a degenerate sample.
template <typename S>
double mask_ssim(const Tensor<S>& a, const Tensor<S>& b, const BinaryMask& mask) {
    require_same_shape(a, b, "mask_ssim");
    if (a.rank() != 3 || a.dim(1) != mask.h || a.dim(2) != mask.w)
        throw std::invalid_argument("mask_ssim: mask " + std::to_string(mask.h) + "x" +
                                    std::to_string(mask.w) + " does not match image " +
                                    shape_str(a.shape));
    if (mask.area() == 0) throw std::invalid_argument("mask_ssim: empty mask");
    Tensor<S> ma = a, mb = b;
    std::size_t plane = static_cast<std::size_t>(mask.h) * static_cast<std::size_t>(mask.w);
    for (int ch = 0; ch < a.dim(0); ++ch)
        for (std::size_t i = 0; i < plane; ++i)
            if (!mask.v[i]) {
                ma.data[static_cast<std::size_t>(ch) * plane + i] = S(0);
                mb.data[static_cast<std::size_t>(ch) * plane + i] = S(0);
            }
    return ssim(ma, mb);
}

// Per joint: centroid of the largest 8-connected blob of pixels within
// kDetectColorDist of that joint's universal marker color, in [0,1] color
// space; absent when nothing matches. Taking one blob keeps stray matches on
// color transitions elsewhere in the image from dragging the centroid; a
// clean render has exactly one blob per marker, where this reduces to the
// plain centroid.
template <typename S>
std::array<std::optional<Vec2>, kNumJoints> detect_joints(const Tensor<S>& img) {
    if (img.rank() != 3 || img.dim(0) != 3)
        throw std::invalid_argument("detect_joints: expected [3,H,W], got " + shape_str(img.shape));
    int h = img.dim(1), w = img.dim(2);
    std::size_t plane = static_cast<std::size_t>(h) * static_cast<std::size_t>(w);
    const auto& markers = joint_marker_colors();
    std::array<std::vector<std::uint8_t>, kNumJoints> match;
    for (auto& m : match) m.assign(plane, 0);
    const double lim2 = kDetectColorDist * kDetectColorDist;
    for (std::size_t i = 0; i < plane; ++i) {
        double r = (static_cast<double>(img.data[i]) + 1.0) / 2.0;
        double g = (static_cast<double>(img.data[plane + i]) + 1.0) / 2.0;
        double b = (static_cast<double>(img.data[2 * plane + i]) + 1.0) / 2.0;
        for (int j = 0; j < kNumJoints; ++j) {
            double dr = r - markers[static_cast<std::size_t>(j)].r;
            double dg = g - markers[static_cast<std::size_t>(j)].g;
            double db = b - markers[static_cast<std::size_t>(j)].b;
            if (dr * dr + dg * dg + db * db <= lim2) match[static_cast<std::size_t>(j)][i] = 1;
        }
    }
    std::array<std::optional<Vec2>, kNumJoints> out;
    std::vector<std::size_t> stack;
    for (int j = 0; j < kNumJoints; ++j) {
        auto& m = match[static_cast<std::size_t>(j)];
        double best_sx = 0.0, best_sy = 0.0;
        long best_n = 0;
        for (std::size_t seed = 0; seed < plane; ++seed) {
            if (!m[seed]) continue;
            double sx = 0.0, sy = 0.0;
            long n = 0;
            stack.assign(1, seed);
            m[seed] = 0;
            while (!stack.empty()) {
                std::size_t i = stack.back();
                stack.pop_back();
                int y = static_cast<int>(i / static_cast<std::size_t>(w));
                int x = static_cast<int>(i % static_cast<std::size_t>(w));
                sx += x;
                sy += y;
                ++n;
                for (int dy = -1; dy <= 1; ++dy)
                    for (int dx = -1; dx <= 1; ++dx) {
                        int ny = y + dy, nx = x + dx;
                        if (ny < 0 || ny >= h || nx < 0 || nx >= w) continue;
                        std::size_t ni = static_cast<std::size_t>(ny) * static_cast<std::size_t>(w) +
                                         static_cast<std::size_t>(nx);
                        if (m[ni]) {
                            m[ni] = 0;
                            stack.push_back(ni);
                        }
                    }
            }
            if (n > best_n) {
                best_n = n;
                best_sx = sx;
                best_sy = sy;
            }
        }
        if (best_n > 0)
            out[static_cast<std::size_t>(j)] =
                Vec2{best_sx / static_cast<double>(best_n), best_sy / static_cast<double>(best_n)};
    }
    return out;
}

// Fraction of joints whose prediction lands within half the head-segment
// (nose to neck) length of ground truth; absent predictions are misses.
// Returns nothing when the head segment is shorter than 1 px, so the caller
// can skip and flag the sample.
std::optional<double> pckh(const std::array<std::optional<Vec2>, kNumJoints>& pred,
                           const Skeleton& gt);

// Mean absolute difference, the evaluation-side L1.
template <typename S>
double l1_metric(const Tensor<S>& a, const Tensor<S>& b) {
    require_same_shape(a, b, "l1_metric");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.numel(); ++i)
        acc += std::fabs(static_cast<double>(a.data[i]) - static_cast<double>(b.data[i]));
    return acc / static_cast<double>(a.numel());
}

struct EvalReport {
    double ssim = 0.0;
    double mask_ssim = 0.0;
    double pckh = 0.0;
    double l1 = 0.0;
    int n_samples = 0;
    int n_skipped = 0;  // degenerate-head samples excluded from the averages
};

std::string eval_csv_header();
std::string eval_csv_row(long step, const EvalReport& r);

}  // namespace xing
