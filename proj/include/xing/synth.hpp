#pragma once

// Procedural stick-person dataset. Every sample is a pure function of
// (master seed, identity id, pair index) and is regenerated on demand;
// nothing is ever rendered to disk during training.

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "xing/rng.hpp"
#include "xing/tensor.hpp"

namespace xing {

inline constexpr int kNumJoints = 18;
inline constexpr int kNumBones = 17;

// Standard 18-keypoint body ordering (COCO layout): nose, neck, right arm,
// left arm, right leg, left leg, eyes, ears.
enum Joint : int {
    kNose = 0,
    kNeck = 1,
    kRShoulder = 2,
    kRElbow = 3,
    kRWrist = 4,
    kLShoulder = 5,
    kLElbow = 6,
    kLWrist = 7,
    kRHip = 8,
    kRKnee = 9,
    kRAnkle = 10,
    kLHip = 11,
    kLKnee = 12,
    kLAnkle = 13,
    kREye = 14,
    kLEye = 15,
    kREar = 16,
    kLEar = 17,
};

struct Vec2 {
    double x = 0.0;
    double y = 0.0;
};

struct Bone {
    int parent;
    int child;
};

// Bone tree rooted at the neck, in topological order: drawing, palette
// indexing, and skeleton generation all walk this list by index.
const std::array<Bone, kNumBones>& bone_list();

struct Skeleton {
    // Real-valued pixel positions, x = column, y = row (y grows downward).
    std::array<Vec2, kNumJoints> joints{};
};

struct Rgb {
    double r = 0.0, g = 0.0, b = 0.0;  // components in [0, 1]
};

struct Identity {
    int id = 0;
    std::array<Rgb, kNumBones> limb_palette{};
    std::array<double, kNumBones> bone_lengths{};  // canonical, in pixels
    double torso_width = 0.0;                      // shoulder span in pixels
};

// Universal per-joint marker colors, shared by every identity: corners and
// edge midpoints of the RGB cube, so any two entries are >= 0.5 apart and
// every entry keeps its distance from the background gray. Limb palettes are
// rejection-sampled to stay kMarkerClearance away from all of these, which is
// what makes joint detection from pixels unambiguous.
const std::array<Rgb, kNumJoints>& joint_marker_colors();

inline constexpr double kBackgroundValue = -0.5;  // all three channels
inline constexpr double kMarkerClearance = 0.3;   // Euclidean, in [0,1]^3
inline constexpr double kPaletteMinChannelDist = 32.0 / 255.0;
inline constexpr double kJointMargin = 2.0;  // px kept to every border
inline constexpr double kDefaultSigma = 1.5;
inline constexpr double kLimbHalfWidth = 1.0;   // 2 px wide segments
inline constexpr double kMarkerRadius = 2.0;    // px
inline constexpr int kSkeletonMaxTries = 100;

struct SkeletonNoise {
    double body_angle = 0.30;   // radians, uniform +-
    double face_angle = 0.08;   // head bones move less so face markers stay apart
    double length_lo = 0.85;    // per-bone length factor range
    double length_hi = 1.15;
    double root_jitter = 0.02;  // fraction of image height, uniform +- both axes
};

// Seed-stream tags for derive_seed.
inline constexpr std::uint64_t kStreamIdentity = 1;
inline constexpr std::uint64_t kStreamPair = 2;

Identity make_identity(int id, std::uint64_t master_seed, int h);

// Upright pose at the identity's proportions, centered horizontally.
Skeleton canonical_skeleton(const Identity& idt, int h, int w);

// Canonical pose perturbed by per-bone angular and length noise.
// Rejection-resamples until every joint keeps kJointMargin to the borders;
// throws after kSkeletonMaxTries failures.
Skeleton sample_skeleton(const Identity& idt, Rng& rng, int h, int w,
                         const SkeletonNoise& noise = SkeletonNoise{});

bool skeleton_in_bounds(const Skeleton& sk, int h, int w);

namespace detail {

inline double dist_point_segment(double px, double py, Vec2 a, Vec2 b) {
    double vx = b.x - a.x, vy = b.y - a.y;
    double wx = px - a.x, wy = py - a.y;
    double vv = vx * vx + vy * vy;
    double t = vv > 0.0 ? (wx * vx + wy * vy) / vv : 0.0;
    if (t < 0.0) t = 0.0;
    if (t > 1.0) t = 1.0;
    double dx = wx - t * vx, dy = wy - t * vy;
    return std::sqrt(dx * dx + dy * dy);
}

}  // namespace detail

// 18-channel pose encoding: channel j holds a Gaussian bump centered on the
// joint's rounded pixel, value exactly 1 there. Computed separably per axis.
template <typename S = float>
Tensor<S> render_pose_heatmaps(const Skeleton& sk, double sigma, int h, int w) {
    if (!(sigma > 0.0))
        throw std::invalid_argument("render_pose_heatmaps: sigma must be > 0, got " +
                                    std::to_string(sigma));
    Tensor<S> hm({kNumJoints, h, w});
    double inv = 1.0 / (2.0 * sigma * sigma);
    std::vector<double> ex(static_cast<std::size_t>(w));
    std::vector<double> ey(static_cast<std::size_t>(h));
    for (int j = 0; j < kNumJoints; ++j) {
        long cx = std::lround(sk.joints[static_cast<std::size_t>(j)].x);
        long cy = std::lround(sk.joints[static_cast<std::size_t>(j)].y);
        for (int x = 0; x < w; ++x) {
            double d = static_cast<double>(x - cx);
            ex[static_cast<std::size_t>(x)] = std::exp(-d * d * inv);
        }
        for (int y = 0; y < h; ++y) {
            double d = static_cast<double>(y - cy);
            ey[static_cast<std::size_t>(y)] = std::exp(-d * d * inv);
        }
        S* out = hm.data.data() + static_cast<std::size_t>(j) * static_cast<std::size_t>(h) *
                                      static_cast<std::size_t>(w);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                out[y * w + x] = static_cast<S>(ey[static_cast<std::size_t>(y)] *
                                                ex[static_cast<std::size_t>(x)]);
    }
    return hm;
}

// Flat gray background, limbs as 2 px wide palette-colored segments, then one
// 2 px radius marker disk per joint in index order. Markers are drawn last so
// they are always recoverable from pixels. Values live in [-1, 1]; stored
// colors in [0, 1] map through 2c - 1.
template <typename S = float>
Tensor<S> render_person(const Skeleton& sk, const Identity& idt, int h, int w) {
    Tensor<S> img({3, h, w});
    std::size_t plane = static_cast<std::size_t>(h) * static_cast<std::size_t>(w);
    for (int ch = 0; ch < 3; ++ch)
        for (std::size_t i = 0; i < plane; ++i)
            img.data[static_cast<std::size_t>(ch) * plane + i] = static_cast<S>(kBackgroundValue);

    auto put = [&](int x, int y, const Rgb& c) {
        std::size_t i = static_cast<std::size_t>(y) * static_cast<std::size_t>(w) +
                        static_cast<std::size_t>(x);
        img.data[i] = static_cast<S>(2.0 * c.r - 1.0);
        img.data[plane + i] = static_cast<S>(2.0 * c.g - 1.0);
        img.data[2 * plane + i] = static_cast<S>(2.0 * c.b - 1.0);
    };
    auto clampi = [](int v, int lo, int hi) { return v < lo ? lo : (v > hi ? hi : v); };

    const auto& bones = bone_list();
    for (int b = 0; b < kNumBones; ++b) {
        Vec2 p = sk.joints[static_cast<std::size_t>(bones[static_cast<std::size_t>(b)].parent)];
        Vec2 q = sk.joints[static_cast<std::size_t>(bones[static_cast<std::size_t>(b)].child)];
        const Rgb& c = idt.limb_palette[static_cast<std::size_t>(b)];
        int x0 = clampi(static_cast<int>(std::floor(std::min(p.x, q.x) - kLimbHalfWidth)), 0, w - 1);
        int x1 = clampi(static_cast<int>(std::ceil(std::max(p.x, q.x) + kLimbHalfWidth)), 0, w - 1);
        int y0 = clampi(static_cast<int>(std::floor(std::min(p.y, q.y) - kLimbHalfWidth)), 0, h - 1);
        int y1 = clampi(static_cast<int>(std::ceil(std::max(p.y, q.y) + kLimbHalfWidth)), 0, h - 1);
        for (int y = y0; y <= y1; ++y)
            for (int x = x0; x <= x1; ++x)
                if (detail::dist_point_segment(x, y, p, q) <= kLimbHalfWidth) put(x, y, c);
    }

    const auto& markers = joint_marker_colors();
    for (int j = 0; j < kNumJoints; ++j) {
        Vec2 c = sk.joints[static_cast<std::size_t>(j)];
        const Rgb& col = markers[static_cast<std::size_t>(j)];
        int x0 = clampi(static_cast<int>(std::floor(c.x - kMarkerRadius)), 0, w - 1);
        int x1 = clampi(static_cast<int>(std::ceil(c.x + kMarkerRadius)), 0, w - 1);
        int y0 = clampi(static_cast<int>(std::floor(c.y - kMarkerRadius)), 0, h - 1);
        int y1 = clampi(static_cast<int>(std::ceil(c.y + kMarkerRadius)), 0, h - 1);
        for (int y = y0; y <= y1; ++y)
            for (int x = x0; x <= x1; ++x) {
                double dx = x - c.x, dy = y - c.y;
                if (dx * dx + dy * dy <= kMarkerRadius * kMarkerRadius) put(x, y, col);
            }
    }
    return img;
}

template <typename S = float>
struct SamplePair {
    Tensor<S> i_s, p_s, i_t, p_t;
    Skeleton sk_s, sk_t;
};

template <typename S = float>
SamplePair<S> make_pair(const Identity& idt, Rng& rng, int h, int w,
                        double sigma = kDefaultSigma) {
    SamplePair<S> out;
    out.sk_s = sample_skeleton(idt, rng, h, w);
    out.sk_t = sample_skeleton(idt, rng, h, w);
    out.i_s = render_person<S>(out.sk_s, idt, h, w);
    out.p_s = render_pose_heatmaps<S>(out.sk_s, sigma, h, w);
    out.i_t = render_person<S>(out.sk_t, idt, h, w);
    out.p_t = render_pose_heatmaps<S>(out.sk_t, sigma, h, w);
    return out;
}

// Identity split: ids below kTrainIdentityEnd train, the rest are held out,
// so the two sets never overlap.
inline constexpr int kTrainIdentityBegin = 0;
inline constexpr int kTrainIdentityEnd = 200;  // exclusive
inline constexpr int kEvalIdentityBegin = 200;
inline constexpr int kEvalIdentityEnd = 240;  // exclusive

struct SampleRecord {
    int identity_id = 0;
    int pair_index = 0;
    std::uint64_t seed = 0;
};

std::vector<SampleRecord> make_manifest(std::uint64_t master_seed, int id_begin, int id_end,
                                        int pairs_per_identity);

// One text line per sample: "identity,pair,seed".
std::string manifest_text(const std::vector<SampleRecord>& records);

template <typename S = float>
SamplePair<S> make_sample(std::uint64_t master_seed, const SampleRecord& rec, int h, int w,
                          double sigma = kDefaultSigma) {
    Identity idt = make_identity(rec.identity_id, master_seed, h);
    Rng rng(rec.seed);
    return make_pair<S>(idt, rng, h, w, sigma);
}

}  // namespace xing
