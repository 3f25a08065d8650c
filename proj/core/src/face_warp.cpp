#include <algorithm>
#include <cmath>
#include <limits>

#include "gsrec/face.hpp"

namespace gsrec {

ForwardWarpResult forward_warp(const Image& ref_face, const DepthMap& ref_depth,
                               const Intrinsics& k0, const Intrinsics& k, const RigidPose& t) {
    k0.validate();
    k.validate();
    GSREC_CHECK_ARG(ref_face.width() == k0.width && ref_face.height() == k0.height,
                    "reference image does not match its intrinsics");
    GSREC_CHECK_ARG(ref_depth.depth.width() == k0.width &&
                        ref_depth.depth.height() == k0.height,
                    "reference depth does not match its intrinsics");

    ForwardWarpResult out;
    out.image = Image(k.width, k.height, ref_face.channels());
    out.coverage = Image(k.width, k.height, 1);
    out.depth = Image(k.width, k.height, 1);
    std::vector<double> zbuf(static_cast<size_t>(k.width) * k.height,
                             std::numeric_limits<double>::max());

    for (int y = 0; y < k0.height; ++y) {
        for (int x = 0; x < k0.width; ++x) {
            if (ref_depth.valid.at(x, y) <= 0.5) continue;
            const double d = ref_depth.depth.at(x, y);
            if (!(d > 0.0)) continue;
            const Vec3 p_ref(d * (x - k0.cx) / k0.fx, d * (y - k0.cy) / k0.fy, d);
            const Vec3 p_tgt = t.apply(p_ref);
            if (p_tgt.z() <= 1e-9) continue;
            const double u = k.cx + k.fx * p_tgt.x() / p_tgt.z();
            const double v = k.cy + k.fy * p_tgt.y() / p_tgt.z();
            const int ui = static_cast<int>(std::lround(u));
            const int vi = static_cast<int>(std::lround(v));
            if (ui < 0 || ui >= k.width || vi < 0 || vi >= k.height) continue;
            const size_t idx = static_cast<size_t>(vi) * k.width + ui;
            if (p_tgt.z() >= zbuf[idx]) continue;  // nearer source pixel wins
            zbuf[idx] = p_tgt.z();
            for (int c = 0; c < ref_face.channels(); ++c)
                out.image.at(ui, vi, c) = ref_face.at(x, y, c);
            out.coverage.at(ui, vi) = 1.0;
            out.depth.at(ui, vi) = p_tgt.z();
        }
    }
    return out;
}

namespace {

// Two-pass chamfer transform: per covered pixel, the approximate distance to
// the nearest uncovered pixel and that pixel's index. An empty complement
// leaves distances at infinity.
void nearest_outside(const Image& coverage, std::vector<double>& dist,
                     std::vector<int>& nearest) {
    const int w = coverage.width(), h = coverage.height();
    const double inf = std::numeric_limits<double>::max();
    dist.assign(static_cast<size_t>(w) * h, inf);
    nearest.assign(static_cast<size_t>(w) * h, -1);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            if (coverage.at(x, y) <= 0.5) {
                dist[static_cast<size_t>(y) * w + x] = 0.0;
                nearest[static_cast<size_t>(y) * w + x] = y * w + x;
            }

    auto relax = [&](int x, int y, int nx, int ny, double step) {
        if (nx < 0 || nx >= w || ny < 0 || ny >= h) return;
        const size_t from = static_cast<size_t>(ny) * w + nx;
        const size_t to = static_cast<size_t>(y) * w + x;
        if (dist[from] == inf) return;
        if (dist[from] + step < dist[to]) {
            dist[to] = dist[from] + step;
            nearest[to] = nearest[from];
        }
    };
    const double diag = std::sqrt(2.0);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            relax(x, y, x - 1, y, 1.0);
            relax(x, y, x, y - 1, 1.0);
            relax(x, y, x - 1, y - 1, diag);
            relax(x, y, x + 1, y - 1, diag);
        }
    }
    for (int y = h - 1; y >= 0; --y) {
        for (int x = w - 1; x >= 0; --x) {
            relax(x, y, x + 1, y, 1.0);
            relax(x, y, x, y + 1, 1.0);
            relax(x, y, x + 1, y + 1, diag);
            relax(x, y, x - 1, y + 1, diag);
        }
    }
}

}  // namespace

std::vector<Image> inpaint_faces(const std::vector<Image>& generated_views,
                                 const std::vector<ForwardWarpResult>& warps) {
    GSREC_CHECK_ARG(generated_views.size() == warps.size(),
                    "need one warp per view (empty coverage for untouched views)");
    std::vector<Image> out = generated_views;
    constexpr double kFeather = 3.0;  // full opacity from 3 px in; 2 px blend band

    for (size_t i = 0; i < warps.size(); ++i) {
        const auto& warp = warps[i];
        if (warp.coverage.empty()) continue;
        GSREC_CHECK_ARG(warp.coverage.width() == generated_views[i].width() &&
                            warp.coverage.height() == generated_views[i].height(),
                        "warp ", i, " is not registered to its view's pixel grid");
        std::vector<double> dist;
        std::vector<int> nearest;
        nearest_outside(warp.coverage, dist, nearest);

        const int w = out[i].width(), h = out[i].height();
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                if (warp.coverage.at(x, y) <= 0.5) continue;
                const size_t idx = static_cast<size_t>(y) * w + x;
                const double a = dist[idx] == std::numeric_limits<double>::max()
                                     ? 1.0
                                     : std::min(1.0, dist[idx] / kFeather);
                if (a >= 1.0) {
                    for (int c = 0; c < out[i].channels(); ++c)
                        out[i].at(x, y, c) = warp.image.at(x, y, c);
                } else {
                    // Blend toward the surrounding image, not the replaced
                    // pixels: the band then reproduces exactly on a second
                    // pass with the same warps.
                    const int nx = nearest[idx] % w;
                    const int ny = nearest[idx] / w;
                    for (int c = 0; c < out[i].channels(); ++c)
                        out[i].at(x, y, c) = a * warp.image.at(x, y, c) +
                                             (1.0 - a) * generated_views[i].at(nx, ny, c);
                }
            }
        }
    }
    return out;
}

}  // namespace gsrec
