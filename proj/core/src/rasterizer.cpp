#include "gsrec/rasterizer.hpp"

#include <algorithm>
#include <cmath>

#include "gsrec/parallel.hpp"
#include "gsrec/rng.hpp"
#include "rasterizer_internal.hpp"

namespace gsrec {

Vec3 RenderConfig::resolve_background() const {
    if (!random_background) return background;
    Rng rng(background_seed);
    return Vec3(rng.uniform(), rng.uniform(), rng.uniform());
}

namespace detail {

void sh_basis(const Vec3& dir, int degree, double* out) {
    out[0] = kShC0;
    if (degree < 1) return;
    const double x = dir.x(), y = dir.y(), z = dir.z();
    out[1] = -kSH1 * y;
    out[2] = kSH1 * z;
    out[3] = -kSH1 * x;
    if (degree < 2) return;
    const double xx = x * x, yy = y * y, zz = z * z;
    out[4] = kSH2[0] * x * y;
    out[5] = kSH2[1] * y * z;
    out[6] = kSH2[2] * (2.0 * zz - xx - yy);
    out[7] = kSH2[3] * x * z;
    out[8] = kSH2[4] * (xx - yy);
    if (degree < 3) return;
    out[9] = kSH3[0] * y * (3.0 * xx - yy);
    out[10] = kSH3[1] * x * y * z;
    out[11] = kSH3[2] * y * (4.0 * zz - xx - yy);
    out[12] = kSH3[3] * z * (2.0 * zz - 3.0 * xx - 3.0 * yy);
    out[13] = kSH3[4] * x * (4.0 * zz - xx - yy);
    out[14] = kSH3[5] * z * (xx - yy);
    out[15] = kSH3[6] * x * (xx - 3.0 * yy);
}

void sh_basis_gradient(const Vec3& dir, int degree, Eigen::Matrix<double, 3, 16>& grad) {
    grad.setZero();
    if (degree < 1) return;
    const double x = dir.x(), y = dir.y(), z = dir.z();
    grad.col(1) = Vec3(0.0, -kSH1, 0.0);
    grad.col(2) = Vec3(0.0, 0.0, kSH1);
    grad.col(3) = Vec3(-kSH1, 0.0, 0.0);
    if (degree < 2) return;
    grad.col(4) = kSH2[0] * Vec3(y, x, 0.0);
    grad.col(5) = kSH2[1] * Vec3(0.0, z, y);
    grad.col(6) = kSH2[2] * Vec3(-2.0 * x, -2.0 * y, 4.0 * z);
    grad.col(7) = kSH2[3] * Vec3(z, 0.0, x);
    grad.col(8) = kSH2[4] * Vec3(2.0 * x, -2.0 * y, 0.0);
    if (degree < 3) return;
    const double xx = x * x, yy = y * y, zz = z * z;
    grad.col(9) = kSH3[0] * Vec3(6.0 * x * y, 3.0 * xx - 3.0 * yy, 0.0);
    grad.col(10) = kSH3[1] * Vec3(y * z, x * z, x * y);
    grad.col(11) = kSH3[2] * Vec3(-2.0 * x * y, 4.0 * zz - xx - 3.0 * yy, 8.0 * y * z);
    grad.col(12) = kSH3[3] * Vec3(-6.0 * x * z, -6.0 * y * z, 6.0 * zz - 3.0 * xx - 3.0 * yy);
    grad.col(13) = kSH3[4] * Vec3(4.0 * zz - 3.0 * xx - yy, -2.0 * x * y, 8.0 * x * z);
    grad.col(14) = kSH3[5] * Vec3(2.0 * x * z, -2.0 * y * z, xx - yy);
    grad.col(15) = kSH3[6] * Vec3(3.0 * xx - 3.0 * yy, -6.0 * x * y, 0.0);
}

namespace {

void prepare_one(const Gaussian3D& g, int id, const Camera& cam, const RenderConfig& cfg,
                 int active_degree, PreparedGaussian& out) {
    out.id = id;
    out.visible = false;

    const Mat3& rot_w2c = cam.world_to_camera.rotation;
    out.p_cam = cam.world_to_camera.apply(g.mean);
    out.depth = out.p_cam.z();
    if (out.depth <= cfg.near_plane || out.depth >= cfg.far_plane) return;

    const double fx = cam.intrinsics.fx, fy = cam.intrinsics.fy;
    const double x = out.p_cam.x(), y = out.p_cam.y(), z = out.p_cam.z();
    out.mean2d = Vec2(cam.intrinsics.cx + fx * x / z, cam.intrinsics.cy + fy * y / z);

    out.sigma_world = covariance(g);

    out.smooth3d_var = 0.0;
    out.smooth3d_cam = -1;
    out.c3d = 1.0;
    out.sigma_eff = out.sigma_world;
    if (cfg.smooth3d_enabled && cfg.smooth3d_cameras && !cfg.smooth3d_cameras->empty()) {
        // Maximal sampling rate over the frozen training cameras: smallest
        // depth-per-focal ratio among cameras that see the mean.
        double best = std::numeric_limits<double>::max();
        int best_cam = -1;
        const auto& cams = *cfg.smooth3d_cameras;
        for (size_t i = 0; i < cams.size(); ++i) {
            const Vec3 pc = cams[i].world_to_camera.apply(g.mean);
            if (pc.z() <= cfg.near_plane) continue;
            const double ratio = pc.z() / cams[i].intrinsics.fx;
            if (ratio < best) {
                best = ratio;
                best_cam = static_cast<int>(i);
            }
        }
        if (best_cam >= 0) {
            const double s = cfg.smooth3d_scale * best;
            out.smooth3d_var = s * s;
            out.smooth3d_cam = best_cam;
            out.sigma_eff = out.sigma_world + out.smooth3d_var * Mat3::Identity();
            const double det_ratio =
                out.sigma_world.determinant() / out.sigma_eff.determinant();
            out.c3d = std::sqrt(std::max(det_ratio, 0.0));
        }
    }

    out.jproj << fx / z, 0.0, -fx * x / (z * z), 0.0, fy / z, -fy * y / (z * z);
    const Mat23 m = out.jproj * rot_w2c;
    out.cov2d_raw = m * out.sigma_eff * m.transpose();

    const double det_raw = out.cov2d_raw.determinant();
    if (!(det_raw > kMinDet) || !out.cov2d_raw.allFinite()) return;

    out.cov2d = out.cov2d_raw + cfg.mip2d_variance * Mat2::Identity();
    const double det = out.cov2d.determinant();
    if (!(det > kMinDet)) return;
    out.c2d = cfg.mip2d_variance > 0.0 ? std::sqrt(det_raw / det) : 1.0;

    out.conic = out.cov2d.inverse();

    out.alpha = g.opacity() * out.c2d * out.c3d;
    if (out.alpha < kSupportFloor) return;

    // Screen bound covering the entire supported footprint (with a pixel of
    // slack), so tiles outside the bound hold no visible tail.
    const double mid = 0.5 * (out.cov2d(0, 0) + out.cov2d(1, 1));
    const double lam_max = mid + std::sqrt(std::max(0.0, mid * mid - det));
    const double mahal = std::sqrt(2.0 * std::log(out.alpha / kSupportFloor));
    out.radius_px = mahal * std::sqrt(std::max(lam_max, 0.0)) + 1.0;
    const int w = cam.intrinsics.width, h = cam.intrinsics.height;
    if (out.mean2d.x() + out.radius_px < 0.0 || out.mean2d.x() - out.radius_px > w - 1 ||
        out.mean2d.y() + out.radius_px < 0.0 || out.mean2d.y() - out.radius_px > h - 1) {
        return;
    }

    out.view_dir = g.mean - cam.center();
    out.view_dist = out.view_dir.norm();
    if (out.view_dist < 1e-12) return;
    out.view_dir /= out.view_dist;

    const int coeffs = static_cast<int>(g.sh.size()) / 3;
    double basis[16];
    sh_basis(out.view_dir, active_degree, basis);
    const int active_coeffs = sh_coeff_count(active_degree);
    for (int c = 0; c < 3; ++c) {
        double v = 0.5;
        for (int k = 0; k < active_coeffs && k < coeffs; ++k)
            v += basis[k] * g.sh[static_cast<size_t>(c) * coeffs + k];
        out.rgb_clamped[c] = v < 0.0;
        out.rgb[c] = std::max(v, 0.0);
    }

    out.visible = true;
}

}  // namespace

std::vector<PreparedGaussian> prepare_gaussians(const GaussianScene& scene, const Camera& cam,
                                                const RenderConfig& cfg) {
    const int active_degree =
        cfg.sh_degree_active >= 0 ? std::min(cfg.sh_degree_active, scene.sh_degree())
                                  : scene.sh_degree();
    std::vector<PreparedGaussian> prepared(scene.size());
    parallel_for(
        0, static_cast<int64_t>(scene.size()),
        [&](int64_t lo, int64_t hi) {
            for (int64_t i = lo; i < hi; ++i) {
                prepare_one(scene[static_cast<size_t>(i)], static_cast<int>(i), cam, cfg,
                            active_degree, prepared[static_cast<size_t>(i)]);
            }
        },
        cfg.threads);
    return prepared;
}

std::vector<int> depth_order(const std::vector<PreparedGaussian>& prepared) {
    std::vector<int> order;
    order.reserve(prepared.size());
    for (size_t i = 0; i < prepared.size(); ++i)
        if (prepared[i].visible) order.push_back(static_cast<int>(i));
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (prepared[a].depth != prepared[b].depth) return prepared[a].depth < prepared[b].depth;
        return prepared[a].id < prepared[b].id;  // stable tie-break for determinism
    });
    return order;
}

TileGrid build_tile_lists(const std::vector<PreparedGaussian>& prepared,
                          const std::vector<int>& order, int width, int height, int tile_size) {
    TileGrid grid;
    grid.tiles_x = (width + tile_size - 1) / tile_size;
    grid.tiles_y = (height + tile_size - 1) / tile_size;
    grid.lists.resize(static_cast<size_t>(grid.tiles_x) * grid.tiles_y);
    for (int idx : order) {
        const auto& p = prepared[idx];
        const int tx0 = std::max(0, static_cast<int>((p.mean2d.x() - p.radius_px) / tile_size));
        const int tx1 = std::min(grid.tiles_x - 1,
                                 static_cast<int>((p.mean2d.x() + p.radius_px) / tile_size));
        const int ty0 = std::max(0, static_cast<int>((p.mean2d.y() - p.radius_px) / tile_size));
        const int ty1 = std::min(grid.tiles_y - 1,
                                 static_cast<int>((p.mean2d.y() + p.radius_px) / tile_size));
        for (int ty = ty0; ty <= ty1; ++ty)
            for (int tx = tx0; tx <= tx1; ++tx)
                grid.lists[static_cast<size_t>(ty) * grid.tiles_x + tx].push_back(idx);
    }
    return grid;
}

}  // namespace detail

std::optional<ProjectedGaussian> project_gaussian(const Gaussian3D& g, int id,
                                                  const Camera& cam, const RenderConfig& cfg) {
    cfg.validate();
    detail::PreparedGaussian p;
    const int degree =
        cfg.sh_degree_active >= 0 ? cfg.sh_degree_active
                                  : [&] {
                                        const int coeffs = static_cast<int>(g.sh.size()) / 3;
                                        for (int d = kMaxShDegree; d >= 0; --d)
                                            if (sh_coeff_count(d) <= coeffs) return d;
                                        return 0;
                                    }();
    detail::prepare_one(g, id, cam, cfg, degree, p);
    if (!p.visible) return std::nullopt;
    ProjectedGaussian out;
    out.mean2d = p.mean2d;
    out.cov2d = p.cov2d;
    out.depth = p.depth;
    out.opacity = p.alpha;
    out.rgb = p.rgb;
    out.id = p.id;
    return out;
}

RenderOutput render(const GaussianScene& scene, const Camera& cam, const RenderConfig& cfg) {
    cfg.validate();
    cam.validate();
    GSREC_CHECK_ARG(!scene.empty(), "cannot render an empty scene");

    const int w = cam.intrinsics.width;
    const int h = cam.intrinsics.height;
    RenderOutput out;
    out.color = Image(w, h, 3);
    out.alpha = Image(w, h, 1);
    out.depth = Image(w, h, 1);
    out.contributors = Image(w, h, 1);
    out.background_used = cfg.resolve_background();
    const Vec3 bg = out.background_used;

    const auto prepared = detail::prepare_gaussians(scene, cam, cfg);
    const auto order = detail::depth_order(prepared);
    const auto grid = detail::build_tile_lists(prepared, order, w, h, cfg.tile_size);

    const int64_t tile_count = static_cast<int64_t>(grid.lists.size());
    parallel_for(
        0, tile_count,
        [&](int64_t lo, int64_t hi) {
            for (int64_t t = lo; t < hi; ++t) {
                const int tx = static_cast<int>(t % grid.tiles_x);
                const int ty = static_cast<int>(t / grid.tiles_x);
                const int x0 = tx * cfg.tile_size;
                const int y0 = ty * cfg.tile_size;
                const int x1 = std::min(w, x0 + cfg.tile_size);
                const int y1 = std::min(h, y0 + cfg.tile_size);
                const auto& list = grid.lists[static_cast<size_t>(t)];
                for (int py = y0; py < y1; ++py) {
                    for (int px = x0; px < x1; ++px) {
                        double transmittance = 1.0;
                        Vec3 color = Vec3::Zero();
                        double depth_acc = 0.0;
                        int contributors = 0;
                        for (int idx : list) {
                            const auto& g = prepared[idx];
                            const Vec2 d(px - g.mean2d.x(), py - g.mean2d.y());
                            const double power = -0.5 * d.dot(g.conic * d);
                            if (power > 0.0) continue;
                            const double u = g.alpha * std::exp(power);
                            if (u <= detail::kSupportFloor) continue;
                            double dalpha_du;
                            double a = detail::support_windowed_alpha(u, dalpha_du);
                            a = std::min(a, detail::kMaxAlpha);
                            const double weight = a * transmittance;
                            color += weight * g.rgb;
                            depth_acc += weight * g.depth;
                            ++contributors;
                            transmittance *= 1.0 - a;
                            if (transmittance < detail::kTransmittanceCutoff) break;
                        }
                        for (int c = 0; c < 3; ++c)
                            out.color.at(px, py, c) = color[c] + transmittance * bg[c];
                        out.alpha.at(px, py) = 1.0 - transmittance;
                        out.depth.at(px, py) = depth_acc;
                        out.contributors.at(px, py) = contributors;
                    }
                }
            }
        },
        cfg.threads);

    return out;
}

}  // namespace gsrec
