#include <algorithm>
#include <cmath>

#include "gsrec/parallel.hpp"
#include "gsrec/rasterizer.hpp"
#include "rasterizer_internal.hpp"

namespace gsrec {

namespace {

using detail::PreparedGaussian;

// Screen-space gradient sums for one Gaussian.
struct ScreenAcc {
    Vec2 mean2d = Vec2::Zero();
    Mat2 conic = Mat2::Zero();
    double alpha = 0.0;  // dL/d(per-splat opacity before the pixel falloff)
    Vec3 rgb = Vec3::Zero();

    void operator+=(const ScreenAcc& o) {
        mean2d += o.mean2d;
        conic += o.conic;
        alpha += o.alpha;
        rgb += o.rgb;
    }
};

struct Contribution {
    int local_index;
    double alpha;       // after the support window and 0.999 clamp
    double t_before;    // transmittance ahead of this splat
    double falloff;     // exp(power)
    double raw;         // alpha before the window, g.alpha * falloff
    double dalpha_draw; // window derivative d(alpha)/d(raw)
    bool clamped;
};

// d(R)/d(q_i) for a unit quaternion (w, x, y, z).
void quat_rotation_jacobian(const Vec4& q, Mat3 out[4]) {
    const double w = q[0], x = q[1], y = q[2], z = q[3];
    out[0] << 0, -z, y, z, 0, -x, -y, x, 0;
    out[1] << 0, y, z, y, -2 * x, -w, z, w, -2 * x;
    out[2] << -2 * y, x, w, x, 0, z, -w, z, -2 * y;
    out[3] << -2 * z, -w, x, w, -2 * z, y, x, y, 0;
    for (int i = 0; i < 4; ++i) out[i] *= 2.0;
}

}  // namespace

SceneGrads render_backward(const GaussianScene& scene, const Camera& cam,
                           const RenderConfig& cfg, const Image& grad_color) {
    cfg.validate();
    cam.validate();
    GSREC_CHECK_ARG(!scene.empty(), "cannot differentiate an empty scene");
    GSREC_CHECK_ARG(grad_color.width() == cam.intrinsics.width &&
                        grad_color.height() == cam.intrinsics.height &&
                        grad_color.channels() == 3,
                    "grad_color shape ", grad_color.width(), "x", grad_color.height(), "x",
                    grad_color.channels(), " does not match render output ",
                    cam.intrinsics.width, "x", cam.intrinsics.height, "x3");

    const int w = cam.intrinsics.width;
    const int h = cam.intrinsics.height;
    const Vec3 bg = cfg.resolve_background();

    const auto prepared = detail::prepare_gaussians(scene, cam, cfg);
    const auto order = detail::depth_order(prepared);
    const auto grid = detail::build_tile_lists(prepared, order, w, h, cfg.tile_size);
    const int64_t tile_count = static_cast<int64_t>(grid.lists.size());

    // Pixel loops accumulate per tile, then tiles merge in index order so the
    // result does not depend on the worker count.
    std::vector<std::vector<ScreenAcc>> tile_acc(grid.lists.size());
    parallel_for(
        0, tile_count,
        [&](int64_t lo, int64_t hi) {
            std::vector<Contribution> stack;
            for (int64_t t = lo; t < hi; ++t) {
                const auto& list = grid.lists[static_cast<size_t>(t)];
                auto& acc = tile_acc[static_cast<size_t>(t)];
                acc.assign(list.size(), ScreenAcc{});
                if (list.empty()) continue;
                const int tx = static_cast<int>(t % grid.tiles_x);
                const int ty = static_cast<int>(t / grid.tiles_x);
                const int x0 = tx * cfg.tile_size;
                const int y0 = ty * cfg.tile_size;
                const int x1 = std::min(w, x0 + cfg.tile_size);
                const int y1 = std::min(h, y0 + cfg.tile_size);
                for (int py = y0; py < y1; ++py) {
                    for (int px = x0; px < x1; ++px) {
                        const Vec3 dldc(grad_color.at(px, py, 0), grad_color.at(px, py, 1),
                                        grad_color.at(px, py, 2));
                        if (dldc.isZero(0.0)) continue;

                        stack.clear();
                        double transmittance = 1.0;
                        for (size_t li = 0; li < list.size(); ++li) {
                            const auto& g = prepared[list[li]];
                            const Vec2 d(px - g.mean2d.x(), py - g.mean2d.y());
                            const double power = -0.5 * d.dot(g.conic * d);
                            if (power > 0.0) continue;
                            const double falloff = std::exp(power);
                            const double raw = g.alpha * falloff;
                            if (raw <= detail::kSupportFloor) continue;
                            double dalpha_draw;
                            double a = detail::support_windowed_alpha(raw, dalpha_draw);
                            const bool clamped = a > detail::kMaxAlpha;
                            if (clamped) a = detail::kMaxAlpha;
                            stack.push_back({static_cast<int>(li), a, transmittance, falloff,
                                             raw, dalpha_draw, clamped});
                            transmittance *= 1.0 - a;
                            if (transmittance < detail::kTransmittanceCutoff) break;
                        }

                        Vec3 suffix = transmittance * bg;  // color after contributor i
                        for (size_t s = stack.size(); s-- > 0;) {
                            const auto& ct = stack[s];
                            const auto& g = prepared[list[ct.local_index]];
                            const double weight = ct.alpha * ct.t_before;
                            const Vec3 dcda = ct.t_before * g.rgb - suffix / (1.0 - ct.alpha);
                            const double dlda = dldc.dot(dcda);
                            auto& a = acc[ct.local_index];
                            a.rgb += weight * dldc;
                            if (!ct.clamped) {
                                // alpha = window(raw), raw = alpha_g * falloff
                                const double dldraw = ct.dalpha_draw * dlda;
                                a.alpha += ct.falloff * dldraw;
                                const double dldpower = ct.raw * dldraw;
                                const Vec2 d(px - g.mean2d.x(), py - g.mean2d.y());
                                a.mean2d += dldpower * (g.conic * d);
                                a.conic += -0.5 * dldpower * (d * d.transpose());
                            }
                            suffix += weight * g.rgb;
                        }
                    }
                }
            }
        },
        cfg.threads);

    const size_t n = scene.size();
    std::vector<ScreenAcc> acc(n);
    std::vector<char> touched(n, 0);
    for (size_t t = 0; t < grid.lists.size(); ++t) {
        const auto& list = grid.lists[t];
        for (size_t li = 0; li < list.size(); ++li) {
            acc[static_cast<size_t>(list[li])] += tile_acc[t][li];
            touched[static_cast<size_t>(list[li])] = 1;
        }
    }

    SceneGrads grads;
    grads.gaussians.resize(n);
    const int coeffs = scene.sh_coeffs_per_channel();
    for (auto& g : grads.gaussians) g.sh.assign(static_cast<size_t>(3) * coeffs, 0.0);
    std::vector<Vec6> pose_contrib(n, Vec6::Zero());

    const Mat3& rot = cam.world_to_camera.rotation;
    const Vec3& trans = cam.world_to_camera.translation;
    const double fx = cam.intrinsics.fx, fy = cam.intrinsics.fy;
    const int active_degree =
        cfg.sh_degree_active >= 0 ? std::min(cfg.sh_degree_active, scene.sh_degree())
                                  : scene.sh_degree();
    const int active_coeffs = sh_coeff_count(active_degree);

    parallel_for(
        0, static_cast<int64_t>(n),
        [&](int64_t lo, int64_t hi) {
            for (int64_t i = lo; i < hi; ++i) {
                const auto& p = prepared[static_cast<size_t>(i)];
                grads.gaussians[static_cast<size_t>(i)].visible = p.visible;
                if (!p.visible || !touched[static_cast<size_t>(i)]) continue;
                const auto& a = acc[static_cast<size_t>(i)];
                grads.gaussians[static_cast<size_t>(i)].mean2d_norm = a.mean2d.norm();
                const Gaussian3D& g = scene[static_cast<size_t>(i)];
                auto& out = grads.gaussians[static_cast<size_t>(i)];

                const double x = p.p_cam.x(), y = p.p_cam.y(), z = p.p_cam.z();
                const double z2 = z * z;

                // conic -> cov2d
                const Mat2 g_conic = 0.5 * (a.conic + a.conic.transpose());
                Mat2 g_cov2 = -p.conic * g_conic * p.conic;

                // opacity and the filter compensations
                const double sig = g.opacity();
                out.opacity_logit = a.alpha * p.c2d * p.c3d * sig * (1.0 - sig);
                const double dl_dc2d = a.alpha * sig * p.c3d;
                const double dl_dc3d = a.alpha * sig * p.c2d;

                Mat2 g_craw = g_cov2;
                if (cfg.mip2d_variance > 0.0) {
                    g_craw += dl_dc2d * 0.5 * p.c2d * (p.cov2d_raw.inverse() - p.conic);
                }
                const Mat2 g_craw_sym = 0.5 * (g_craw + g_craw.transpose());

                const Mat23 m = p.jproj * rot;
                Mat3 g_sigma_eff = m.transpose() * g_craw_sym * m;
                const Mat23 g_m = 2.0 * g_craw_sym * m * p.sigma_eff;

                Mat3 g_sigma_w = g_sigma_eff;
                double dl_ds2 = 0.0;
                if (p.smooth3d_cam >= 0) {
                    const Mat3 sw_inv = p.sigma_world.inverse();
                    const Mat3 se_inv = p.sigma_eff.inverse();
                    g_sigma_w += dl_dc3d * 0.5 * p.c3d * (sw_inv - se_inv);
                    dl_ds2 = g_sigma_eff.trace() - dl_dc3d * 0.5 * p.c3d * se_inv.trace();
                }

                const Mat23 g_j = g_m * rot.transpose();
                Mat3 g_rot = p.jproj.transpose() * g_m;  // camera-rotation gradient

                Vec3 g_pcam = Vec3::Zero();
                g_pcam.x() += g_j(0, 2) * (-fx / z2);
                g_pcam.y() += g_j(1, 2) * (-fy / z2);
                g_pcam.z() += g_j(0, 0) * (-fx / z2) + g_j(1, 1) * (-fy / z2) +
                              g_j(0, 2) * (2.0 * fx * x / (z2 * z)) +
                              g_j(1, 2) * (2.0 * fy * y / (z2 * z));
                g_pcam.x() += a.mean2d.x() * fx / z;
                g_pcam.y() += a.mean2d.y() * fy / z;
                g_pcam.z() += -a.mean2d.x() * fx * x / z2 - a.mean2d.y() * fy * y / z2;

                // sh coefficients and the view-direction path
                double basis[16];
                detail::sh_basis(p.view_dir, active_degree, basis);
                Eigen::Matrix<double, 3, 16> basis_grad;
                detail::sh_basis_gradient(p.view_dir, active_degree, basis_grad);
                Vec3 g_dir = Vec3::Zero();
                for (int c = 0; c < 3; ++c) {
                    if (p.rgb_clamped[c]) continue;
                    for (int k = 0; k < active_coeffs && k < coeffs; ++k) {
                        out.sh[static_cast<size_t>(c) * coeffs + k] = basis[k] * a.rgb[c];
                        g_dir += a.rgb[c] * g.sh[static_cast<size_t>(c) * coeffs + k] *
                                 basis_grad.col(k);
                    }
                }
                const Mat3 dir_proj =
                    (Mat3::Identity() - p.view_dir * p.view_dir.transpose()) / p.view_dist;
                const Vec3 g_mu_dir = dir_proj * g_dir;
                const Vec3 g_center = -g_mu_dir;

                // sigma_world = N N', N = R(q) diag(exp(log_scale))
                const Mat3 g_sigw_sym = 0.5 * (g_sigma_w + g_sigma_w.transpose());
                const Mat3 rq = quat_to_rotation(g.rotation);
                const Vec3 s = g.scale();
                const Mat3 nmat = rq * s.asDiagonal();
                const Mat3 g_n = 2.0 * g_sigw_sym * nmat;
                const Mat3 g_rq = g_n * s.asDiagonal();
                const Mat3 g_s = rq.transpose() * g_n;
                for (int k = 0; k < 3; ++k) out.log_scale[k] = g_s(k, k) * s[k];

                const double qnorm = g.rotation.norm();
                const Vec4 qhat = g.rotation / qnorm;
                Mat3 dr_dq[4];
                quat_rotation_jacobian(qhat, dr_dq);
                Vec4 g_qhat;
                for (int k = 0; k < 4; ++k)
                    g_qhat[k] = (g_rq.array() * dr_dq[k].array()).sum();
                out.rotation =
                    (Eigen::Matrix4d::Identity() - qhat * qhat.transpose()) / qnorm * g_qhat;

                Vec3 g_mu = rot.transpose() * g_pcam + g_mu_dir;
                if (p.smooth3d_cam >= 0) {
                    const auto& scam = (*cfg.smooth3d_cameras)[p.smooth3d_cam];
                    const double zstar = scam.world_to_camera.apply(g.mean).z();
                    const double fstar = scam.intrinsics.fx;
                    const double ds2_dz =
                        2.0 * cfg.smooth3d_scale * cfg.smooth3d_scale * zstar / (fstar * fstar);
                    g_mu += dl_ds2 * ds2_dz * scam.world_to_camera.rotation.row(2).transpose();
                }
                out.mean = g_mu;

                // camera twist: p_cam = R mu + t and center = -R't
                g_rot += g_pcam * g.mean.transpose();
                Vec3 g_trans = g_pcam;
                g_rot += -trans * g_center.transpose();
                g_trans += -rot * g_center;

                Vec6 twist;
                Vec3 omega = Vec3::Zero();
                for (int j = 0; j < 3; ++j) omega += rot.col(j).cross(g_rot.col(j));
                omega += trans.cross(g_trans);
                twist.head<3>() = omega;
                twist.tail<3>() = g_trans;
                pose_contrib[static_cast<size_t>(i)] = twist;
            }
        },
        cfg.threads);

    for (size_t i = 0; i < n; ++i) grads.camera_twist += pose_contrib[i];
    return grads;
}

}  // namespace gsrec
