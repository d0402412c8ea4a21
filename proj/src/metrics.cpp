#include "xing/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace xing {

BinaryMask pose_mask(const Skeleton& sk, const std::vector<Bone>& edges, double dilation_radius,
                     int h, int w) {
    if (!(dilation_radius >= 1.0))
        throw std::invalid_argument("pose_mask: dilation radius must be >= 1, got " +
                                    std::to_string(dilation_radius));
    BinaryMask m;
    m.h = h;
    m.w = w;
    m.v.assign(static_cast<std::size_t>(h) * static_cast<std::size_t>(w), 0);
    for (const Bone& e : edges) {
        Vec2 p = sk.joints[static_cast<std::size_t>(e.parent)];
        Vec2 q = sk.joints[static_cast<std::size_t>(e.child)];
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                if (detail::dist_point_segment(x, y, p, q) <= dilation_radius)
                    m.v[static_cast<std::size_t>(y) * static_cast<std::size_t>(w) +
                        static_cast<std::size_t>(x)] = 1;
    }
    return m;
}

BinaryMask pose_mask(const Skeleton& sk, double dilation_radius, int h, int w) {
    const auto& bones = bone_list();
    return pose_mask(sk, std::vector<Bone>(bones.begin(), bones.end()), dilation_radius, h, w);
}

std::optional<double> pckh(const std::array<std::optional<Vec2>, kNumJoints>& pred,
                           const Skeleton& gt) {
    double head = std::hypot(gt.joints[kNose].x - gt.joints[kNeck].x,
                             gt.joints[kNose].y - gt.joints[kNeck].y);
    if (head < 1.0) return std::nullopt;
    double thr = 0.5 * head;
    int hits = 0;
    for (int j = 0; j < kNumJoints; ++j) {
        const auto& p = pred[static_cast<std::size_t>(j)];
        if (!p) continue;
        double d = std::hypot(p->x - gt.joints[static_cast<std::size_t>(j)].x,
                              p->y - gt.joints[static_cast<std::size_t>(j)].y);
        if (d <= thr) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(kNumJoints);
}

std::string eval_csv_header() { return "step,ssim,mask_ssim,pckh,l1,n_samples"; }

std::string eval_csv_row(long step, const EvalReport& r) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%ld,%.6f,%.6f,%.6f,%.6f,%d", step, r.ssim, r.mask_ssim,
                  r.pckh, r.l1, r.n_samples);
    return std::string(buf);
}

}  // namespace xing
