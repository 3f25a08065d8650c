#include "gsrec/optimizer.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "gsrec/rng.hpp"

namespace gsrec {

namespace {

constexpr double kBeta1 = 0.9;
constexpr double kBeta2 = 0.999;
// Pose twists see only total_steps / n_views updates each; a shorter
// second-moment memory lets the step size adapt once the large pose modes
// have converged and only weakly observed ones remain.
constexpr double kBeta2Pose = 0.99;
constexpr double kEpsMeans = 1e-15;
constexpr double kEps = 1e-8;
constexpr double kBackgroundTolerance = 2.0 / 255.0;

double adam_step(double& m, double& v, double grad, double lr, double bc1, double bc2,
                 double eps, double beta2 = kBeta2) {
    m = kBeta1 * m + (1.0 - kBeta1) * grad;
    v = beta2 * v + (1.0 - beta2) * grad * grad;
    return lr * (m / bc1) / (std::sqrt(v / bc2) + eps);
}

// Targets recomposite onto the per-step background so content matching any
// fixed background cannot hide. With a subject alpha the swap is exact:
// target = image + (1 - alpha) * (bg - base_bg). Without one, pixels
// indistinguishable from the generator background are replaced outright.
Image subject_weight(const ViewBundle& views, size_t view) {
    if (!views.subject_alphas.empty()) return views.subject_alphas[view];
    const Image& img = views.images[view];
    Image mask(img.width(), img.height(), 1, 1.0);
    for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x) {
            bool is_bg = true;
            for (int c = 0; c < 3; ++c)
                is_bg = is_bg &&
                        std::abs(img.at(x, y, c) - views.background[c]) < kBackgroundTolerance;
            if (is_bg) mask.at(x, y) = 0.0;
        }
    }
    return mask;
}

Image compose_target(const Image& img, const Image& alpha, const Vec3& base_bg,
                     const Vec3& bg) {
    Image out = img;
    for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x) {
            const double t = 1.0 - std::clamp(alpha.at(x, y), 0.0, 1.0);
            if (t <= 0.0) continue;
            for (int c = 0; c < 3; ++c) out.at(x, y, c) += t * (bg[c] - base_bg[c]);
        }
    }
    return out;
}

struct AdamArrays {
    std::vector<Vec3> m_mean, v_mean;
    std::vector<Vec4> m_rot, v_rot;
    std::vector<Vec3> m_scale, v_scale;
    std::vector<double> m_op, v_op;
    std::vector<double> m_sh, v_sh;  // 3 * coeffs per gaussian, flattened
    int coeffs = 0;

    void init(size_t n, int coeffs_per_channel) {
        coeffs = coeffs_per_channel;
        m_mean.assign(n, Vec3::Zero());
        v_mean.assign(n, Vec3::Zero());
        m_rot.assign(n, Vec4::Zero());
        v_rot.assign(n, Vec4::Zero());
        m_scale.assign(n, Vec3::Zero());
        v_scale.assign(n, Vec3::Zero());
        m_op.assign(n, 0.0);
        v_op.assign(n, 0.0);
        m_sh.assign(n * 3 * coeffs, 0.0);
        v_sh.assign(n * 3 * coeffs, 0.0);
    }

    void append_zero() {
        m_mean.push_back(Vec3::Zero());
        v_mean.push_back(Vec3::Zero());
        m_rot.push_back(Vec4::Zero());
        v_rot.push_back(Vec4::Zero());
        m_scale.push_back(Vec3::Zero());
        v_scale.push_back(Vec3::Zero());
        m_op.push_back(0.0);
        v_op.push_back(0.0);
        m_sh.insert(m_sh.end(), 3 * coeffs, 0.0);
        v_sh.insert(v_sh.end(), 3 * coeffs, 0.0);
    }

    void keep(const std::vector<char>& keep_mask) {
        size_t out = 0;
        const size_t n = keep_mask.size();
        for (size_t i = 0; i < n; ++i) {
            if (!keep_mask[i]) continue;
            m_mean[out] = m_mean[i];
            v_mean[out] = v_mean[i];
            m_rot[out] = m_rot[i];
            v_rot[out] = v_rot[i];
            m_scale[out] = m_scale[i];
            v_scale[out] = v_scale[i];
            m_op[out] = m_op[i];
            v_op[out] = v_op[i];
            for (int k = 0; k < 3 * coeffs; ++k) {
                m_sh[out * 3 * coeffs + k] = m_sh[i * 3 * coeffs + k];
                v_sh[out * 3 * coeffs + k] = v_sh[i * 3 * coeffs + k];
            }
            ++out;
        }
        m_mean.resize(out);
        v_mean.resize(out);
        m_rot.resize(out);
        v_rot.resize(out);
        m_scale.resize(out);
        v_scale.resize(out);
        m_op.resize(out);
        v_op.resize(out);
        m_sh.resize(out * 3 * coeffs);
        v_sh.resize(out * 3 * coeffs);
    }
};

struct Engine {
    GaussianScene scene;
    const ViewBundle& views;
    const OptimSchedule& sched;
    const LossConfig& loss_cfg;
    RenderConfig render_cfg;

    AdamArrays adam;
    int step_count = 0;
    double extent = 1.0;

    std::vector<Image> view_alphas;
    std::vector<int> view_order;
    size_t order_pos = 0;
    Rng shuffle_rng;
    Rng bg_rng;
    Rng split_rng;

    // densification bookkeeping
    std::vector<double> grad2d_accum;
    std::vector<int> visible_count;

    Engine(GaussianScene s, const ViewBundle& v, const OptimSchedule& sc, const LossConfig& lc,
           const RenderConfig& rc)
        : scene(std::move(s)),
          views(v),
          sched(sc),
          loss_cfg(lc),
          render_cfg(rc),
          shuffle_rng(mix_seed(sc.seed, 1)),
          bg_rng(mix_seed(sc.seed, 2)),
          split_rng(mix_seed(sc.seed, 3)) {
        scene.validate();
        views.validate();
        loss_cfg.validate();
        sched.validate();
        adam.init(scene.size(), scene.sh_coeffs_per_channel());
        extent = std::max(scene.extent(), 1e-6);
        view_alphas.reserve(views.view_count());
        for (size_t i = 0; i < views.view_count(); ++i)
            view_alphas.push_back(subject_weight(views, i));
        grad2d_accum.assign(scene.size(), 0.0);
        visible_count.assign(scene.size(), 0);
    }

    int next_view() {
        if (order_pos == view_order.size()) {
            view_order.resize(views.view_count());
            std::iota(view_order.begin(), view_order.end(), 0);
            shuffle_rng.shuffle(view_order);
            order_pos = 0;
        }
        return view_order[order_pos++];
    }

    double means_lr() const {
        const double t = sched.total_steps > 1
                             ? static_cast<double>(step_count) / (sched.total_steps - 1)
                             : 0.0;
        return sched.lr_means * extent * std::pow(sched.means_lr_decay, t);
    }

    int active_sh_degree() const {
        return std::min(scene.sh_degree(), step_count / sched.sh_unlock_interval);
    }

    // Coarse-to-fine: extra screen-space variance applied to both the render
    // and (as a Gaussian blur) the target. Zero outside alignment.
    double blur_variance = 0.0;

    /// One render/loss/backward/update step on the given view and camera.
    /// Returns the loss; fills grads-dependent bookkeeping.
    double step_scene(int view, const Camera& cam, SceneGrads* out_grads) {
        const Vec3 bg = sched.random_background
                            ? Vec3(bg_rng.uniform(), bg_rng.uniform(), bg_rng.uniform())
                            : views.background;
        RenderConfig cfg = render_cfg;
        cfg.background = bg;
        cfg.random_background = false;
        cfg.sh_degree_active = active_sh_degree();

        // Coarse-to-fine compares blurred render against blurred target; the
        // blur is linear and symmetric, so its adjoint just blurs the
        // incoming gradient image.
        const double blur_sigma = blur_variance > 0.0 ? std::sqrt(blur_variance) : 0.0;
        Image target =
            compose_target(views.images[view], view_alphas[view], views.background, bg);
        if (blur_sigma > 0.0) target = gaussian_blur(target, blur_sigma);
        const RenderOutput rendered = render(scene, cam, cfg);
        const Image compared =
            blur_sigma > 0.0 ? gaussian_blur(rendered.color, blur_sigma) : rendered.color;
        LossResult loss = reconstruction_loss(compared, target, nullptr, loss_cfg);
        GSREC_CHECK_RUNTIME(std::isfinite(loss.value), "loss diverged (non-finite) at step ",
                            step_count, " on view ", view);
        if (blur_sigma > 0.0) loss.grad = gaussian_blur(loss.grad, blur_sigma);
        SceneGrads grads = render_backward(scene, cam, cfg, loss.grad);

        const double bc1 = 1.0 - std::pow(kBeta1, step_count + 1);
        const double bc2 = 1.0 - std::pow(kBeta2, step_count + 1);
        const double lr_mean = means_lr();
        const int coeffs = scene.sh_coeffs_per_channel();
        for (size_t i = 0; i < scene.size(); ++i) {
            const auto& g = grads.gaussians[i];
            auto& gs = scene[i];
            for (int a = 0; a < 3; ++a) {
                gs.mean[a] -= adam_step(adam.m_mean[i][a], adam.v_mean[i][a], g.mean[a],
                                        lr_mean, bc1, bc2, kEpsMeans);
                gs.log_scale[a] -= adam_step(adam.m_scale[i][a], adam.v_scale[i][a],
                                             g.log_scale[a], sched.lr_scales, bc1, bc2, kEps);
            }
            for (int a = 0; a < 4; ++a)
                gs.rotation[a] -= adam_step(adam.m_rot[i][a], adam.v_rot[i][a], g.rotation[a],
                                            sched.lr_rotations, bc1, bc2, kEps);
            const double qn = gs.rotation.norm();
            // Renormalize only when the update actually moved the quaternion;
            // a gratuitous renorm perturbs converged scenes at rounding level.
            if (qn > 1e-12 && std::abs(qn - 1.0) > 1e-12) gs.rotation /= qn;
            gs.opacity_logit -= adam_step(adam.m_op[i], adam.v_op[i], g.opacity_logit,
                                          sched.lr_opacities, bc1, bc2, kEps);
            for (int k = 0; k < 3 * coeffs; ++k) {
                const bool dc = (k % coeffs) == 0;
                const double lr = dc ? sched.lr_sh : sched.lr_sh / 20.0;
                gs.sh[k] -= adam_step(adam.m_sh[i * 3 * coeffs + k],
                                      adam.v_sh[i * 3 * coeffs + k], g.sh[k], lr, bc1, bc2,
                                      kEps);
            }
            const double gnorm = g.mean2d_norm;
            if (g.visible) {
                grad2d_accum[i] += gnorm;
                visible_count[i] += 1;
            }
        }

        if (out_grads) *out_grads = std::move(grads);
        return loss.value;
    }

    void densify_and_prune() {
        const size_t n = scene.size();
        std::vector<char> keep(n, 1);
        std::vector<Gaussian3D> added;

        const double size_threshold = sched.densify_size_fraction * extent;
        int clones = 0, splits = 0;
        for (size_t i = 0; i < n; ++i) {
            if (visible_count[i] == 0) continue;
            if (static_cast<int>(n + added.size()) >= sched.max_gaussians) break;
            const double avg = grad2d_accum[i] / visible_count[i];
            if (avg < sched.densify_grad_threshold) continue;
            const Gaussian3D& g = scene[i];
            const double max_scale = g.scale().maxCoeff();
            if (max_scale <= size_threshold) {
                added.push_back(g);  // clone; the optimizer separates the pair
                ++clones;
            } else {
                const Mat3 rot = quat_to_rotation(g.rotation);
                const Vec3 s = g.scale();
                for (int child = 0; child < 2; ++child) {
                    Gaussian3D split = g;
                    const Vec3 sample(split_rng.normal(), split_rng.normal(),
                                      split_rng.normal());
                    split.mean = g.mean + rot * (s.asDiagonal() * sample);
                    split.log_scale = g.log_scale.array() - std::log(1.6);
                    added.push_back(std::move(split));
                }
                keep[i] = 0;
                ++splits;
            }
        }

        for (size_t i = 0; i < n; ++i) {
            if (scene[i].opacity() < sched.prune_opacity_threshold) keep[i] = 0;
        }

        std::vector<Gaussian3D> next;
        next.reserve(n + added.size());
        for (size_t i = 0; i < n; ++i)
            if (keep[i]) next.push_back(scene[i]);
        adam.keep(keep);
        for (auto& g : added) {
            next.push_back(std::move(g));
            adam.append_zero();
        }
        GSREC_CHECK_RUNTIME(!next.empty(), "density control removed every gaussian at step ",
                            step_count);
        scene.mutable_gaussians() = std::move(next);

        grad2d_accum.assign(scene.size(), 0.0);
        visible_count.assign(scene.size(), 0);
    }

    void maybe_reset_opacity() {
        if (!sched.opacity_reset_enabled) return;
        if (step_count == 0 || step_count % sched.opacity_reset_interval != 0) return;
        const double cap = sched.opacity_reset_value;
        const double cap_logit = std::log(cap / (1.0 - cap));
        for (size_t i = 0; i < scene.size(); ++i) {
            if (scene[i].opacity() > cap) {
                scene[i].opacity_logit = cap_logit;
                adam.m_op[i] = 0.0;
                adam.v_op[i] = 0.0;
            }
        }
    }
};

// Levenberg-damped Gauss-Newton on one view's 6 pose coordinates with the
// scene frozen; the Jacobian comes from forward differences of the render.
RigidPose polish_pose(const GaussianScene& scene, const Image& target, const Camera& start,
                      const RenderConfig& cfg, int iterations) {
    const auto flatten = [](const Image& img) {
        return Eigen::Map<const Eigen::VectorXd>(img.data(), img.size());
    };
    const Eigen::VectorXd t = flatten(target);
    Camera cam = start;
    double lambda = 1e-4;
    for (int it = 0; it < iterations; ++it) {
        const Eigen::VectorXd r0 = flatten(render(scene, cam, cfg).color) - t;
        Eigen::MatrixXd jac(r0.size(), 6);
        const double h = 1e-5;
        for (int k = 0; k < 6; ++k) {
            PoseDelta dp;
            dp.twist[k] = h;
            Camera cp = cam;
            cp.world_to_camera = apply_pose_delta(cam.world_to_camera, dp);
            jac.col(k) = (flatten(render(scene, cp, cfg).color) - t - r0) / h;
        }
        const Eigen::Matrix<double, 6, 6> jtj = jac.transpose() * jac;
        const Eigen::Matrix<double, 6, 1> jtr = jac.transpose() * r0;
        Eigen::Matrix<double, 6, 6> damped = jtj;
        damped.diagonal() += lambda * jtj.diagonal();
        PoseDelta dp;
        dp.twist = -damped.ldlt().solve(jtr);
        // Trust region: against an imperfect scene the normal equations can
        // propose wild moves; keep each update local.
        constexpr double kMaxStep = 0.01;
        if (dp.twist.norm() > kMaxStep) dp.twist *= kMaxStep / dp.twist.norm();
        Camera trial = cam;
        trial.world_to_camera = apply_pose_delta(cam.world_to_camera, dp);
        const double after = (flatten(render(scene, trial, cfg).color) - t).squaredNorm();
        if (after < r0.squaredNorm()) {
            cam = trial;
            lambda = std::max(lambda * 0.5, 1e-7);
        } else {
            lambda *= 10.0;
        }
        if (dp.twist.norm() < 1e-9) break;
    }
    return cam.world_to_camera;
}

}  // namespace

void save_trace_csv(const std::vector<TraceRow>& trace, const std::string& path) {
    std::ofstream out(path);
    GSREC_CHECK_RUNTIME(out.good(), "cannot open trace file: ", path);
    out << "step,loss,view_id,rot_err_deg,trans_err\n";
    for (const auto& row : trace)
        out << row.step << "," << row.loss << "," << row.view_id << "," << row.rot_err_deg
            << "," << row.trans_err << "\n";
}

GaussianScene optimize_scene(const GaussianScene& scene, const ViewBundle& views,
                             const OptimSchedule& schedule, const LossConfig& loss_cfg,
                             const RenderConfig& render_cfg, std::vector<TraceRow>* trace) {
    Engine eng(scene, views, schedule, loss_cfg, render_cfg);
    const int densify_until =
        schedule.densify_until >= 0 ? schedule.densify_until : schedule.total_steps * 3 / 4;

    for (eng.step_count = 0; eng.step_count < schedule.total_steps; ++eng.step_count) {
        const int view = eng.next_view();
        const double loss = eng.step_scene(view, views.nominal_cameras[view], nullptr);
        if (trace) trace->push_back({eng.step_count, loss, view, 0.0, 0.0});

        if (schedule.densify_enabled && eng.step_count >= schedule.densify_start &&
            eng.step_count <= densify_until && eng.step_count > 0 &&
            eng.step_count % schedule.densify_interval == 0) {
            eng.densify_and_prune();
        }
        eng.maybe_reset_opacity();
    }
    return std::move(eng.scene);
}

AlignmentResult align_cameras(const GaussianScene& scene_init, const ViewBundle& views,
                              const OptimSchedule& schedule, const LossConfig& loss_cfg,
                              const RenderConfig& render_cfg) {
    GSREC_CHECK_ARG(views.view_count() >= 2, "alignment needs at least 2 views, got ",
                    views.view_count());
    Engine eng(scene_init, views, schedule, loss_cfg, render_cfg);

    AlignmentResult result;
    result.refined_cameras = views.nominal_cameras;
    const size_t n_views = views.view_count();
    std::vector<Vec6> m_pose(n_views, Vec6::Zero());
    std::vector<Vec6> v_pose(n_views, Vec6::Zero());
    std::vector<int> pose_steps(n_views, 0);

    for (eng.step_count = 0; eng.step_count < schedule.total_steps; ++eng.step_count) {
        // Anneal the coarse-to-fine blur over the first part of the phase.
        const double coarse_end =
            std::max(1.0, schedule.align_coarse_fraction * schedule.total_steps);
        const double progress = std::min(1.0, eng.step_count / coarse_end);
        const double level = schedule.align_coarse_blur * (1.0 - progress) * (1.0 - progress);
        eng.blur_variance = level < 0.05 ? 0.0 : level;

        const int view = eng.next_view();
        Camera& cam = result.refined_cameras[view];
        SceneGrads grads;
        const double loss = eng.step_scene(view, cam, &grads);

        if (view != 0) {  // reference view anchors the gauge
            const double t = schedule.total_steps > 1
                                 ? static_cast<double>(eng.step_count) /
                                       (schedule.total_steps - 1)
                                 : 0.0;
            const double lr = schedule.lr_pose * std::pow(schedule.pose_lr_decay, t);
            pose_steps[view] += 1;
            const double bc1 = 1.0 - std::pow(kBeta1, pose_steps[view]);
            const double bc2 = 1.0 - std::pow(kBeta2Pose, pose_steps[view]);
            PoseDelta delta;
            for (int a = 0; a < 6; ++a) {
                delta.twist[a] = -adam_step(m_pose[view][a], v_pose[view][a],
                                            grads.camera_twist[a], lr, bc1, bc2, kEps,
                                            kBeta2Pose);
            }
            cam.world_to_camera = apply_pose_delta(cam.world_to_camera, delta);
            cam.orbit.reset();  // no longer exactly on the nominal orbit
        }

        const double rot_err =
            geodesic_angle(result.refined_cameras[view].world_to_camera.rotation,
                           views.nominal_cameras[view].world_to_camera.rotation) *
            180.0 / M_PI;
        const double trans_err = (result.refined_cameras[view].center() -
                                  views.nominal_cameras[view].center())
                                     .norm();
        result.trace.push_back({eng.step_count, loss, view, rot_err, trans_err});
    }

    // Alternating polish: Gauss-Newton on each non-reference pose against the
    // frozen scene, then a short scene refresh under the updated cameras.
    eng.blur_variance = 0.0;
    RenderConfig polish_cfg = render_cfg;
    polish_cfg.background = views.background;
    polish_cfg.random_background = false;
    for (int round = 0; round < schedule.pose_polish_rounds; ++round) {
        polish_cfg.sh_degree_active = eng.active_sh_degree();
        for (size_t v = 1; v < n_views; ++v) {
            result.refined_cameras[v].world_to_camera =
                polish_pose(eng.scene, views.images[v], result.refined_cameras[v], polish_cfg,
                            schedule.pose_polish_iterations);
            result.refined_cameras[v].orbit.reset();
        }
        for (int s = 0; s < schedule.pose_polish_refresh_steps; ++s) {
            const int view = eng.next_view();
            const double loss = eng.step_scene(view, result.refined_cameras[view], nullptr);
            const double rot_err =
                geodesic_angle(result.refined_cameras[view].world_to_camera.rotation,
                               views.nominal_cameras[view].world_to_camera.rotation) *
                180.0 / M_PI;
            const double trans_err = (result.refined_cameras[view].center() -
                                      views.nominal_cameras[view].center())
                                         .norm();
            result.trace.push_back({eng.step_count, loss, view, rot_err, trans_err});
            ++eng.step_count;
        }
    }

    result.scene = std::move(eng.scene);
    result.corrections.resize(n_views);
    for (size_t i = 0; i < n_views; ++i) {
        result.corrections[i].rotation_deg =
            geodesic_angle(result.refined_cameras[i].world_to_camera.rotation,
                           views.nominal_cameras[i].world_to_camera.rotation) *
            180.0 / M_PI;
        result.corrections[i].translation =
            (result.refined_cameras[i].center() - views.nominal_cameras[i].center()).norm();
    }
    return result;
}

}  // namespace gsrec
