#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "oracles.hpp"
#include "xing/metrics.hpp"
#include "xing/synth.hpp"

using namespace xing;

namespace {

constexpr int kH = 64;
constexpr int kW = 32;

Tensor<double> random_image(std::vector<int> shape, Rng& rng) {
    Tensor<double> t(std::move(shape));
    for (double& v : t.data) v = rng.uniform(-1.0, 1.0);
    return t;
}

Tensor<double> to_unit(const Tensor<double>& t) {
    Tensor<double> u = t;
    for (double& v : u.data) v = (v + 1.0) / 2.0;
    return u;
}

BinaryMask full_mask(int h, int w) {
    BinaryMask m;
    m.h = h;
    m.w = w;
    m.v.assign(static_cast<std::size_t>(h) * static_cast<std::size_t>(w), 1);
    return m;
}

}  // namespace

TEST_CASE("ssim of an image with itself is exactly 1") {
    Rng rng(1);
    Tensor<double> a = random_image({3, 20, 20}, rng);
    CHECK(ssim(a, a) == 1.0);
    Tensor<float> af = a.cast<float>();
    CHECK(ssim(af, af) == 1.0);
}

TEST_CASE("ssim of anticorrelated halves is negative") {
    Tensor<double> a({1, 16, 16});
    for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x) a.at({0, y, x}) = x < 8 ? -1.0 : 1.0;
    Tensor<double> b = a;
    for (double& v : b.data) v = -v;
    CHECK(ssim(a, b) < 0.0);
}

TEST_CASE("ssim matches the direct-formula second implementation") {
    Rng rng(7);
    for (int t = 0; t < 20; ++t) {
        std::vector<int> shape = t % 2 == 0 ? std::vector<int>{1, 16, 16}
                                            : std::vector<int>{3, 14, 13};
        Tensor<double> a = random_image(shape, rng);
        Tensor<double> b = random_image(shape, rng);
        double got = ssim(a, b);
        double want = oracle::ssim(to_unit(a), to_unit(b));
        CHECK(std::fabs(got - want) <= 1e-8);
    }
}

TEST_CASE("ssim is symmetric") {
    Rng rng(9);
    Tensor<double> a = random_image({3, 18, 15}, rng);
    Tensor<double> b = random_image({3, 18, 15}, rng);
    CHECK(std::fabs(ssim(a, b) - ssim(b, a)) <= 1e-9);
}

TEST_CASE("ssim rejects images smaller than the window or mismatched") {
    Tensor<double> small({1, 8, 8});
    CHECK_THROWS_AS(ssim(small, small), std::invalid_argument);
    Tensor<double> tall({1, 16, 10});
    CHECK_THROWS_AS(ssim(tall, tall), std::invalid_argument);
    Tensor<double> a({1, 16, 16});
    Tensor<double> b({1, 16, 15});
    CHECK_THROWS_AS(ssim(a, b), std::invalid_argument);
}

TEST_CASE("pose mask covers every limb-colored pixel") {
    Identity idt = make_identity(1, 42, kH);
    Skeleton sk = canonical_skeleton(idt, kH, kW);
    Tensor<float> img = render_person<float>(sk, idt, kH, kW);
    BinaryMask m = pose_mask(sk, kH, kW);
    CHECK(m.area() > 0);
    for (std::uint8_t b : m.v) CHECK(b <= 1);
    std::size_t plane = static_cast<std::size_t>(kH) * kW;
    for (int y = 0; y < kH; ++y)
        for (int x = 0; x < kW; ++x) {
            std::size_t i = static_cast<std::size_t>(y) * kW + static_cast<std::size_t>(x);
            bool is_limb = false;
            for (int bn = 0; bn < kNumBones; ++bn) {
                const Rgb& c = idt.limb_palette[static_cast<std::size_t>(bn)];
                if (img.data[i] == static_cast<float>(2.0 * c.r - 1.0) &&
                    img.data[plane + i] == static_cast<float>(2.0 * c.g - 1.0) &&
                    img.data[2 * plane + i] == static_cast<float>(2.0 * c.b - 1.0))
                    is_limb = true;
            }
            if (is_limb) CHECK(m.v[i] == 1);
        }
}

TEST_CASE("pose mask with no edges is empty") {
    Identity idt = make_identity(1, 42, kH);
    Skeleton sk = canonical_skeleton(idt, kH, kW);
    BinaryMask m = pose_mask(sk, {}, 3.0, kH, kW);
    CHECK(m.area() == 0);
}

TEST_CASE("pose mask area grows with the dilation radius") {
    Identity idt = make_identity(2, 42, kH);
    Skeleton sk = canonical_skeleton(idt, kH, kW);
    int prev = 0;
    for (int r = 1; r <= 5; ++r) {
        int area = pose_mask(sk, static_cast<double>(r), kH, kW).area();
        CHECK(area >= prev);
        prev = area;
    }
    CHECK_THROWS_AS(pose_mask(sk, 0.5, kH, kW), std::invalid_argument);
}

TEST_CASE("mask ssim with a full mask equals plain ssim") {
    Rng rng(3);
    Tensor<double> a = random_image({3, 16, 16}, rng);
    Tensor<double> b = random_image({3, 16, 16}, rng);
    CHECK(mask_ssim(a, b, full_mask(16, 16)) == ssim(a, b));
    CHECK(mask_ssim(a, a, full_mask(16, 16)) == 1.0);
}

TEST_CASE("mask ssim sees only the masked region") {
    Identity idt = make_identity(4, 42, kH);
    Skeleton sk = canonical_skeleton(idt, kH, kW);
    BinaryMask m = pose_mask(sk, kH, kW);
    REQUIRE(m.area() > 0);
    REQUIRE(m.area() < kH * kW);
    Rng rng(5);
    Tensor<double> a = random_image({3, kH, kW}, rng);
    Tensor<double> b = a;
    std::size_t plane = static_cast<std::size_t>(kH) * kW;
    for (std::size_t i = 0; i < plane; ++i)
        if (!m.v[i])
            for (int ch = 0; ch < 3; ++ch) b.data[static_cast<std::size_t>(ch) * plane + i] += 0.7;
    CHECK(mask_ssim(a, b, m) == 1.0);
    CHECK(ssim(a, b) < 1.0);
    CHECK(mask_ssim(a, b, m) != ssim(a, b));
}

TEST_CASE("mask ssim rejects an empty mask") {
    Tensor<double> a({3, 16, 16});
    BinaryMask empty;
    empty.h = 16;
    empty.w = 16;
    empty.v.assign(16 * 16, 0);
    CHECK_THROWS_AS(mask_ssim(a, a, empty), std::invalid_argument);
}

TEST_CASE("uniform gray image yields no detected joints") {
    Tensor<float> img = Tensor<float>::full({3, kH, kW}, -0.5f);
    auto det = detect_joints(img);
    for (const auto& d : det) CHECK_FALSE(d.has_value());
}

TEST_CASE("detection recovers a clean render within one pixel") {
    Identity idt = make_identity(6, 42, kH);
    Skeleton sk = canonical_skeleton(idt, kH, kW);
    Tensor<float> img = render_person<float>(sk, idt, kH, kW);
    auto det = detect_joints(img);
    for (int j = 0; j < kNumJoints; ++j) {
        REQUIRE(det[j].has_value());
        double err = std::hypot(det[j]->x - sk.joints[j].x, det[j]->y - sk.joints[j].y);
        CHECK(err <= 1.0);
    }
}

TEST_CASE("detection sticks to the largest blob when strays match") {
    // A real marker disk plus a few isolated matching pixels far away: the
    // detector must report the disk, not a dragged global average.
    Identity idt = make_identity(6, 42, kH);
    Skeleton sk = canonical_skeleton(idt, kH, kW);
    Tensor<float> img = render_person<float>(sk, idt, kH, kW);
    auto clean = detect_joints(img);
    const Rgb col = joint_marker_colors()[kRShoulder];
    for (int y : {kH - 2, kH - 4}) {
        img.at({0, y, 1}) = float(2.0 * col.r - 1.0);
        img.at({1, y, 1}) = float(2.0 * col.g - 1.0);
        img.at({2, y, 1}) = float(2.0 * col.b - 1.0);
    }
    auto det = detect_joints(img);
    REQUIRE(clean[kRShoulder].has_value());
    REQUIRE(det[kRShoulder].has_value());
    CHECK(det[kRShoulder]->x == clean[kRShoulder]->x);
    CHECK(det[kRShoulder]->y == clean[kRShoulder]->y);
}

TEST_CASE("detection ignores the limb palette entirely") {
    Identity a = make_identity(20, 42, kH);
    Identity b = make_identity(21, 42, kH);
    Skeleton sk = canonical_skeleton(a, kH, kW);
    auto da = detect_joints(render_person<float>(sk, a, kH, kW));
    auto db = detect_joints(render_person<float>(sk, b, kH, kW));
    for (int j = 0; j < kNumJoints; ++j) {
        REQUIRE(da[j].has_value());
        REQUIRE(db[j].has_value());
        CHECK(da[j]->x == db[j]->x);
        CHECK(da[j]->y == db[j]->y);
    }
}

TEST_CASE("pckh scores exact predictions, misses, and offsets") {
    Identity idt = make_identity(8, 42, kH);
    Skeleton gt = canonical_skeleton(idt, kH, kW);
    std::array<std::optional<Vec2>, kNumJoints> pred;
    for (int j = 0; j < kNumJoints; ++j) pred[j] = gt.joints[j];
    CHECK(pckh(pred, gt).value() == 1.0);

    std::array<std::optional<Vec2>, kNumJoints> absent;
    CHECK(pckh(absent, gt).value() == 0.0);

    for (int j = 9; j < kNumJoints; ++j) pred[j].reset();
    CHECK(pckh(pred, gt).value() == 0.5);

    Skeleton head8;
    head8.joints[kNose] = {16.0, 8.0};
    head8.joints[kNeck] = {16.0, 16.0};
    for (int j = 2; j < kNumJoints; ++j) head8.joints[j] = {16.0, 20.0 + j};
    std::array<std::optional<Vec2>, kNumJoints> off;
    for (int j = 0; j < kNumJoints; ++j)
        off[j] = Vec2{head8.joints[j].x + 10.0, head8.joints[j].y};
    CHECK(pckh(off, head8).value() == 0.0);

    Skeleton degenerate = head8;
    degenerate.joints[kNose] = degenerate.joints[kNeck];
    CHECK_FALSE(pckh(off, degenerate).has_value());
}

TEST_CASE("detect after render recovers 1000 random skeletons") {
    int detected = 0, total = 0;
    double err_sum = 0.0;
    for (int s = 0; s < 1000; ++s) {
        Identity idt = make_identity(s % 40, 4242, kH);
        Rng rng(derive_seed(4242, {kStreamPair, static_cast<std::uint64_t>(s)}));
        Skeleton sk = sample_skeleton(idt, rng, kH, kW);
        auto det = detect_joints(render_person<float>(sk, idt, kH, kW));
        for (int j = 0; j < kNumJoints; ++j) {
            ++total;
            if (det[j].has_value()) {
                ++detected;
                err_sum += std::hypot(det[j]->x - sk.joints[j].x, det[j]->y - sk.joints[j].y);
            } else {
                err_sum += 4.0;  // a vanished marker counts as a gross miss
            }
        }
    }
    CHECK(static_cast<double>(detected) / total >= 0.995);
    CHECK(err_sum / total <= 1.0);
}

TEST_CASE("evaluation csv row carries exactly six fields") {
    EvalReport r;
    r.ssim = 0.5;
    r.mask_ssim = 0.25;
    r.pckh = 0.75;
    r.l1 = 0.125;
    r.n_samples = 40;
    std::string row = eval_csv_row(1000, r);
    CHECK(std::count(row.begin(), row.end(), ',') == 5);
    CHECK(row == "1000,0.500000,0.250000,0.750000,0.125000,40");
    CHECK(eval_csv_header() == "step,ssim,mask_ssim,pckh,l1,n_samples");
}
