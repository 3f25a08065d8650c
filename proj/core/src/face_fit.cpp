#include <algorithm>
#include <cmath>

#include "gsrec/face.hpp"

namespace gsrec {

namespace {

constexpr double kBeta1 = 0.9;
constexpr double kBeta2 = 0.999;
constexpr double kEps = 1e-8;

struct FitState {
    // theta = [coeffs(B), rot twist(3), translation(3), log scale(1)]
    Eigen::VectorXd coeffs;
    Mat3 rotation;
    Vec3 translation;
    double log_scale;

    int dim() const { return static_cast<int>(coeffs.size()) + 7; }
};

}  // namespace

FaceFitParams fit_3dmm_multiview(const std::vector<FaceObservation>& observations,
                                 const MorphableFaceModel& model, const FaceFitConfig& cfg,
                                 const FaceFitParams& init) {
    GSREC_CHECK_ARG(observations.size() >= 2, "multi-view fit needs >= 2 observations, got ",
                    observations.size());
    model.validate();
    init.validate();
    const int n_basis = model.basis_count();
    const int n_lm = model.landmark_count();
    for (const auto& obs : observations) {
        GSREC_CHECK_ARG(static_cast<int>(obs.landmarks.size()) == n_lm, "observation for view ",
                        obs.view_id, " carries ", obs.landmarks.size(), " landmarks, model has ",
                        n_lm);
        obs.camera.validate();
    }

    FitState state;
    state.coeffs = init.shape_coeffs.size() == n_basis ? init.shape_coeffs
                                                       : Eigen::VectorXd::Zero(n_basis);
    state.rotation = init.rotation;
    state.translation = init.translation;
    state.log_scale = std::log(init.scale);

    const int dim = state.dim();
    Eigen::VectorXd m = Eigen::VectorXd::Zero(dim);
    Eigen::VectorXd v = Eigen::VectorXd::Zero(dim);

    std::vector<Image> target_gray;
    target_gray.reserve(observations.size());
    for (const auto& obs : observations) target_gray.push_back(luminance(obs.image));

    const int total_steps = cfg.warmup_steps + cfg.main_steps;
    for (int step = 0; step < total_steps; ++step) {
        const bool warmup = step < cfg.warmup_steps;
        const double w_img = warmup ? 0.0 : cfg.weights.img;

        const double scale = std::exp(state.log_scale);
        const Eigen::MatrixXd verts_model = model.vertices_for(state.coeffs);
        const Eigen::MatrixXd verts_world =
            (scale * (verts_model * state.rotation.transpose())).rowwise() +
            state.translation.transpose();

        double loss = 0.0;
        Eigen::VectorXd grad = Eigen::VectorXd::Zero(dim);

        // dw/dtheta assembled per point: dw/dc_b = scale*R*(sigma_b*mode_b row),
        // dw/d(twist_k) = e_k x (w - t), dw/dt = I, dw/d(log s) = w - t.
        auto accumulate_point = [&](const Vec3& w_pt, const Eigen::MatrixXd& coeff_dirs,
                                    const Vec2& dl_dpix, const Camera& cam) {
            const Vec3 p_cam = cam.world_to_camera.apply(w_pt);
            const double z = p_cam.z();
            if (z <= 1e-9) return;
            Mat23 jproj;
            jproj << cam.intrinsics.fx / z, 0.0, -cam.intrinsics.fx * p_cam.x() / (z * z), 0.0,
                cam.intrinsics.fy / z, -cam.intrinsics.fy * p_cam.y() / (z * z);
            const Eigen::Matrix<double, 3, 1> dl_dw =
                (jproj * cam.world_to_camera.rotation).transpose() * dl_dpix;

            const Vec3 lever = w_pt - state.translation;  // scale * R * v
            for (int b = 0; b < n_basis; ++b) {
                const Vec3 dir = scale * model.mode_sigmas[b] *
                                 (state.rotation * coeff_dirs.row(b).transpose());
                grad[b] += dl_dw.dot(dir);
            }
            grad[n_basis + 0] += dl_dw.dot(Vec3::UnitX().cross(lever));
            grad[n_basis + 1] += dl_dw.dot(Vec3::UnitY().cross(lever));
            grad[n_basis + 2] += dl_dw.dot(Vec3::UnitZ().cross(lever));
            grad.segment<3>(n_basis + 3) += dl_dw;
            grad[n_basis + 6] += dl_dw.dot(lever);
        };

        // Landmark reprojection, normalized per landmark and view.
        const double lm_norm = 1.0 / (static_cast<double>(n_lm) * observations.size());
        for (const auto& obs : observations) {
            for (int l = 0; l < n_lm; ++l) {
                const int vid = model.landmark_indices[l];
                const Vec3 w_pt = verts_world.row(vid).transpose();
                const Projection proj = project(w_pt, obs.camera);
                if (proj.behind_camera) continue;
                const Vec2 r = proj.pixel - obs.landmarks[l];
                loss += cfg.weights.lm * lm_norm * r.squaredNorm();
                const Vec2 dl_dpix = cfg.weights.lm * lm_norm * 2.0 * r;

                Eigen::MatrixXd dirs(n_basis, 3);
                for (int b = 0; b < n_basis; ++b) dirs.row(b) = model.shape_basis[b].row(vid);
                accumulate_point(w_pt, dirs, dl_dpix, obs.camera);
            }
        }

        // Masked photometric term with screen-motion gradients: a pixel sees a
        // surface point; moving the point by dp shifts the rendered intensity
        // by -grad(I) . dp.
        if (w_img > 0.0) {
            for (size_t o = 0; o < observations.size(); ++o) {
                const auto& obs = observations[o];
                const MeshRaster raster =
                    rasterize_mesh(verts_world, model.triangles, model.albedo, obs.camera);
                const int w = raster.gray.width(), h = raster.gray.height();
                double count = 0.0;
                for (int y = 0; y < h; ++y)
                    for (int x = 0; x < w; ++x)
                        if (raster.mask.at(x, y) > 0.5 && obs.mask.at(x, y) > 0.5) count += 1.0;
                if (count == 0.0) continue;
                const double img_norm = 1.0 / count;
                for (int y = 1; y + 1 < h; ++y) {
                    for (int x = 1; x + 1 < w; ++x) {
                        if (raster.mask.at(x, y) <= 0.5 || obs.mask.at(x, y) <= 0.5) continue;
                        const double r = raster.gray.at(x, y) - target_gray[o].at(x, y);
                        loss += w_img * img_norm * r * r;

                        Vec2 grad_img = Vec2::Zero();
                        if (raster.mask.at(x - 1, y) > 0.5 && raster.mask.at(x + 1, y) > 0.5)
                            grad_img.x() =
                                0.5 * (raster.gray.at(x + 1, y) - raster.gray.at(x - 1, y));
                        if (raster.mask.at(x, y - 1) > 0.5 && raster.mask.at(x, y + 1) > 0.5)
                            grad_img.y() =
                                0.5 * (raster.gray.at(x, y + 1) - raster.gray.at(x, y - 1));
                        if (grad_img.isZero(0.0)) continue;

                        const size_t idx = static_cast<size_t>(y) * w + x;
                        const int tri = raster.triangle_id[idx];
                        const Eigen::Vector3d& bc = raster.barycentric[idx];
                        const Vec3 w_pt =
                            (bc[0] * verts_world.row(model.triangles(tri, 0)) +
                             bc[1] * verts_world.row(model.triangles(tri, 1)) +
                             bc[2] * verts_world.row(model.triangles(tri, 2)))
                                .transpose();
                        // dr/dpix = -grad_img, so dl/dpix = 2 r w (-grad_img)
                        const Vec2 dl_dpix = -w_img * img_norm * 2.0 * r * grad_img;

                        Eigen::MatrixXd dirs(n_basis, 3);
                        for (int b = 0; b < n_basis; ++b) {
                            dirs.row(b) =
                                bc[0] * model.shape_basis[b].row(model.triangles(tri, 0)) +
                                bc[1] * model.shape_basis[b].row(model.triangles(tri, 1)) +
                                bc[2] * model.shape_basis[b].row(model.triangles(tri, 2));
                        }
                        accumulate_point(w_pt, dirs, dl_dpix, obs.camera);
                    }
                }
            }
        }

        loss += cfg.weights.reg * state.coeffs.squaredNorm();
        grad.head(n_basis) += cfg.weights.reg * 2.0 * state.coeffs;

        GSREC_CHECK_RUNTIME(std::isfinite(loss), "face fit diverged (non-finite loss) at step ",
                            step, " with scale ", scale);

        // Numerically zero gradients mean the fit is at a stationary point;
        // adaptive moments would otherwise turn rounding residue into steps.
        if (grad.cwiseAbs().maxCoeff() < 1e-12) continue;

        const double t = cfg.main_steps > 1 && !warmup
                             ? static_cast<double>(step - cfg.warmup_steps) /
                                   (cfg.main_steps - 1)
                             : 0.0;
        const double lr = cfg.lr * std::pow(cfg.lr_decay, t);
        const double bc1 = 1.0 - std::pow(kBeta1, step + 1);
        const double bc2 = 1.0 - std::pow(kBeta2, step + 1);
        Eigen::VectorXd update(dim);
        for (int i = 0; i < dim; ++i) {
            m[i] = kBeta1 * m[i] + (1.0 - kBeta1) * grad[i];
            v[i] = kBeta2 * v[i] + (1.0 - kBeta2) * grad[i] * grad[i];
            update[i] = lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + kEps);
        }
        state.coeffs -= update.head(n_basis);
        state.rotation = so3_exp(-update.segment<3>(n_basis)) * state.rotation;
        // Keep the rotation clean under many small increments.
        Eigen::Quaterniond q(state.rotation);
        q.normalize();
        state.rotation = q.toRotationMatrix();
        state.translation -= update.segment<3>(n_basis + 3);
        state.log_scale -= update[n_basis + 6];
    }

    FaceFitParams out;
    out.shape_coeffs = state.coeffs;
    out.rotation = state.rotation;
    out.translation = state.translation;
    out.scale = std::exp(state.log_scale);
    out.validate();
    return out;
}

double face_fit_objective(const std::vector<FaceObservation>& observations,
                          const MorphableFaceModel& model, const FaceFitWeights& weights,
                          const FaceFitParams& params) {
    params.validate();
    const int n_lm = model.landmark_count();
    const Eigen::MatrixXd verts_world = params.to_world(model.vertices_for(params.shape_coeffs));

    double loss = 0.0;
    const double lm_norm = 1.0 / (static_cast<double>(n_lm) * observations.size());
    for (const auto& obs : observations) {
        for (int l = 0; l < n_lm; ++l) {
            const Projection proj =
                project(verts_world.row(model.landmark_indices[l]).transpose(), obs.camera);
            if (proj.behind_camera) continue;
            loss += weights.lm * lm_norm * (proj.pixel - obs.landmarks[l]).squaredNorm();
        }
        if (weights.img > 0.0) {
            const MeshRaster raster =
                rasterize_mesh(verts_world, model.triangles, model.albedo, obs.camera);
            const Image target = luminance(obs.image);
            double acc = 0.0, count = 0.0;
            for (int y = 0; y < raster.gray.height(); ++y) {
                for (int x = 0; x < raster.gray.width(); ++x) {
                    if (raster.mask.at(x, y) <= 0.5 || obs.mask.at(x, y) <= 0.5) continue;
                    const double r = raster.gray.at(x, y) - target.at(x, y);
                    acc += r * r;
                    count += 1.0;
                }
            }
            if (count > 0.0) loss += weights.img * acc / count;
        }
    }
    return loss + weights.reg * params.shape_coeffs.squaredNorm();
}

}  // namespace gsrec
