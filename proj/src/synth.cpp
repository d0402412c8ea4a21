#include "xing/synth.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace xing {

namespace {

// Canonical upright layout. x is the offset from the horizontal center, y the
// distance from the top edge, both as fractions of the image height, so the
// same figure scales to 64x32 and 128x64.
struct JointSpec {
    double dx;
    double y;
};

constexpr std::array<JointSpec, kNumJoints> kLayout = {{
    {0.000, 0.140},   // nose
    {0.000, 0.250},   // neck
    {-0.090, 0.280},  // r shoulder
    {-0.115, 0.420},  // r elbow
    {-0.125, 0.550},  // r wrist
    {0.090, 0.280},   // l shoulder
    {0.115, 0.420},   // l elbow
    {0.125, 0.550},   // l wrist
    {-0.055, 0.560},  // r hip
    {-0.065, 0.730},  // r knee
    {-0.070, 0.900},  // r ankle
    {0.055, 0.560},   // l hip
    {0.065, 0.730},   // l knee
    {0.070, 0.900},   // l ankle
    {-0.045, 0.100},  // r eye
    {0.045, 0.100},   // l eye
    {-0.090, 0.130},  // r ear
    {0.090, 0.130},   // l ear
}};

constexpr std::array<Bone, kNumBones> kBones = {{
    {kNeck, kNose},        // 0, face bones first
    {kNose, kREye},        // 1
    {kNose, kLEye},        // 2
    {kREye, kREar},        // 3
    {kLEye, kLEar},        // 4
    {kNeck, kRShoulder},   // 5
    {kRShoulder, kRElbow},  // 6
    {kRElbow, kRWrist},    // 7
    {kNeck, kLShoulder},   // 8
    {kLShoulder, kLElbow},  // 9
    {kLElbow, kLWrist},    // 10
    {kNeck, kRHip},        // 11
    {kRHip, kRKnee},       // 12
    {kRKnee, kRAnkle},     // 13
    {kNeck, kLHip},        // 14
    {kLHip, kLKnee},       // 15
    {kLKnee, kLAnkle},     // 16
}};

constexpr int kNumFaceBones = 5;  // kBones[0..4] get the smaller angle noise

// Torso bones scale with the identity's torso width, not an independent draw.
constexpr bool is_torso_bone(int b) { return b == 5 || b == 8 || b == 11 || b == 14; }

constexpr double kShoulderHalfSpan = 0.090;  // of image height, per side
constexpr double kNeckY = 0.250;

struct BoneGeometry {
    double angle;   // radians from +x, y downward
    double length;  // fraction of image height
};

const std::array<BoneGeometry, kNumBones>& bone_geometry() {
    static const std::array<BoneGeometry, kNumBones> g = [] {
        std::array<BoneGeometry, kNumBones> out{};
        for (int b = 0; b < kNumBones; ++b) {
            const JointSpec& p = kLayout[static_cast<std::size_t>(kBones[static_cast<std::size_t>(b)].parent)];
            const JointSpec& c = kLayout[static_cast<std::size_t>(kBones[static_cast<std::size_t>(b)].child)];
            double vx = c.dx - p.dx, vy = c.y - p.y;
            out[static_cast<std::size_t>(b)] = {std::atan2(vy, vx), std::sqrt(vx * vx + vy * vy)};
        }
        return out;
    }();
    return g;
}

Skeleton build_skeleton(const Identity& idt, int h, int w,
                        const std::array<double, kNumBones>& angle_noise,
                        const std::array<double, kNumBones>& length_factor, Vec2 jitter) {
    Skeleton sk;
    sk.joints[kNeck] = {0.5 * (w - 1) + jitter.x, kNeckY * h + jitter.y};
    const auto& geo = bone_geometry();
    for (int b = 0; b < kNumBones; ++b) {
        const Bone& bone = kBones[static_cast<std::size_t>(b)];
        double a = geo[static_cast<std::size_t>(b)].angle + angle_noise[static_cast<std::size_t>(b)];
        double len = idt.bone_lengths[static_cast<std::size_t>(b)] *
                     length_factor[static_cast<std::size_t>(b)];
        Vec2 p = sk.joints[static_cast<std::size_t>(bone.parent)];
        sk.joints[static_cast<std::size_t>(bone.child)] = {p.x + len * std::cos(a),
                                                           p.y + len * std::sin(a)};
    }
    return sk;
}

double color_dist2(const Rgb& a, const Rgb& b) {
    double dr = a.r - b.r, dg = a.g - b.g, db = a.b - b.b;
    return dr * dr + dg * dg + db * db;
}

double max_channel_dist(const Rgb& a, const Rgb& b) {
    return std::max({std::fabs(a.r - b.r), std::fabs(a.g - b.g), std::fabs(a.b - b.b)});
}

}  // namespace

const std::array<Bone, kNumBones>& bone_list() {
    static const std::array<Bone, kNumBones> b = kBones;
    return b;
}

const std::array<Rgb, kNumJoints>& joint_marker_colors() {
    // Eight cube corners, then edge midpoints in lexicographic order until 18
    // entries are filled. Minimum pairwise Euclidean distance is 0.5 and the
    // nearest entry to the background gray (0.25, 0.25, 0.25) is 0.433 away.
    static const std::array<Rgb, kNumJoints> table = {{
        {0, 0, 0},
        {0, 0, 1},
        {0, 1, 0},
        {0, 1, 1},
        {1, 0, 0},
        {1, 0, 1},
        {1, 1, 0},
        {1, 1, 1},
        {0, 0, 0.5},
        {0, 0.5, 0},
        {0, 0.5, 1},
        {0, 1, 0.5},
        {0.5, 0, 0},
        {0.5, 0, 1},
        {0.5, 1, 0},
        {0.5, 1, 1},
        {1, 0, 0.5},
        {1, 0.5, 0},
    }};
    return table;
}

Identity make_identity(int id, std::uint64_t master_seed, int h) {
    if (h < 1) throw std::invalid_argument("make_identity: image height must be >= 1");
    Rng rng(derive_seed(master_seed, {kStreamIdentity, static_cast<std::uint64_t>(id)}));
    Identity idt;
    idt.id = id;

    double torso = rng.uniform(0.9, 1.1);
    std::array<double, kNumBones> factor{};
    for (int b = 0; b < kNumBones; ++b) factor[static_cast<std::size_t>(b)] = rng.uniform(0.9, 1.1);
    const auto& geo = bone_geometry();
    for (int b = 0; b < kNumBones; ++b) {
        double f = is_torso_bone(b) ? torso : factor[static_cast<std::size_t>(b)];
        idt.bone_lengths[static_cast<std::size_t>(b)] =
            geo[static_cast<std::size_t>(b)].length * h * f;
    }
    idt.torso_width = torso * 2.0 * kShoulderHalfSpan * h;

    const auto& markers = joint_marker_colors();
    for (int b = 0; b < kNumBones; ++b) {
        Rgb c;
        bool ok = false;
        for (int t = 0; t < 10000 && !ok; ++t) {
            c = {rng.unit(), rng.unit(), rng.unit()};
            ok = true;
            for (const Rgb& m : markers)
                if (color_dist2(c, m) < kMarkerClearance * kMarkerClearance) {
                    ok = false;
                    break;
                }
            for (int j = 0; ok && j < b; ++j)
                if (max_channel_dist(c, idt.limb_palette[static_cast<std::size_t>(j)]) <
                    kPaletteMinChannelDist)
                    ok = false;
        }
        if (!ok)
            throw std::runtime_error("make_identity: could not place limb color " +
                                     std::to_string(b) + " for identity " + std::to_string(id));
        idt.limb_palette[static_cast<std::size_t>(b)] = c;
    }
    return idt;
}

Skeleton canonical_skeleton(const Identity& idt, int h, int w) {
    std::array<double, kNumBones> zeros{};
    std::array<double, kNumBones> ones{};
    ones.fill(1.0);
    return build_skeleton(idt, h, w, zeros, ones, {0.0, 0.0});
}

bool skeleton_in_bounds(const Skeleton& sk, int h, int w) {
    for (const Vec2& j : sk.joints) {
        if (!(j.x >= kJointMargin && j.x <= w - 1 - kJointMargin)) return false;
        if (!(j.y >= kJointMargin && j.y <= h - 1 - kJointMargin)) return false;
    }
    return true;
}

Skeleton sample_skeleton(const Identity& idt, Rng& rng, int h, int w,
                         const SkeletonNoise& noise) {
    for (int attempt = 0; attempt < kSkeletonMaxTries; ++attempt) {
        Vec2 jitter = {rng.uniform(-noise.root_jitter * h, noise.root_jitter * h),
                       rng.uniform(-noise.root_jitter * h, noise.root_jitter * h)};
        std::array<double, kNumBones> angles{};
        std::array<double, kNumBones> lengths{};
        for (int b = 0; b < kNumBones; ++b) {
            double r = b < kNumFaceBones ? noise.face_angle : noise.body_angle;
            angles[static_cast<std::size_t>(b)] = rng.uniform(-r, r);
            lengths[static_cast<std::size_t>(b)] = rng.uniform(noise.length_lo, noise.length_hi);
        }
        Skeleton sk = build_skeleton(idt, h, w, angles, lengths, jitter);
        if (skeleton_in_bounds(sk, h, w)) return sk;
    }
    throw std::runtime_error("sample_skeleton: no in-bounds pose after " +
                             std::to_string(kSkeletonMaxTries) + " tries at " +
                             std::to_string(h) + "x" + std::to_string(w));
}

std::vector<SampleRecord> make_manifest(std::uint64_t master_seed, int id_begin, int id_end,
                                        int pairs_per_identity) {
    if (id_begin < 0 || id_end < id_begin || pairs_per_identity < 0)
        throw std::invalid_argument("make_manifest: bad identity range or pair count");
    std::vector<SampleRecord> out;
    out.reserve(static_cast<std::size_t>(id_end - id_begin) *
                static_cast<std::size_t>(pairs_per_identity));
    for (int id = id_begin; id < id_end; ++id)
        for (int k = 0; k < pairs_per_identity; ++k)
            out.push_back({id, k,
                           derive_seed(master_seed, {kStreamPair, static_cast<std::uint64_t>(id),
                                                     static_cast<std::uint64_t>(k)})});
    return out;
}

std::string manifest_text(const std::vector<SampleRecord>& records) {
    std::ostringstream os;
    for (const SampleRecord& r : records)
        os << r.identity_id << ',' << r.pair_index << ',' << r.seed << '\n';
    return os.str();
}

}  // namespace xing
