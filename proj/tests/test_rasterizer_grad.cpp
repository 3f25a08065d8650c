#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "gsrec/rasterizer.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace gsrec;
using fixtures::look_at_origin;
using fixtures::random_scene;

namespace {

double image_sum(const Image& img) {
    double acc = 0.0;
    for (double v : img.raw()) acc += v;
    return acc;
}

double render_sum(const GaussianScene& scene, const Camera& cam, const RenderConfig& cfg) {
    return image_sum(render(scene, cam, cfg).color);
}

Image ones_like_render(const Camera& cam) {
    return Image(cam.intrinsics.width, cam.intrinsics.height, 3, 1.0);
}

struct GradCheckStats {
    double worst = 0.0;
    int checked = 0;
};

// Checks every Gaussian parameter and the 6 camera twist coordinates of
// d(sum of image)/d(theta) against central finite differences.
GradCheckStats check_all_gradients(GaussianScene scene, const Camera& cam,
                                   const RenderConfig& cfg, double step, double tol) {
    const SceneGrads grads = render_backward(scene, cam, cfg, ones_like_render(cam));
    GradCheckStats stats;

    auto fd_check = [&](double analytic, std::function<void(double)> set, double base) {
        set(base + step);
        const double fp = render_sum(scene, cam, cfg);
        set(base - step);
        const double fm = render_sum(scene, cam, cfg);
        set(base);
        const double numeric = (fp - fm) / (2.0 * step);
        const double err = oracles::grad_error(analytic, numeric);
        stats.worst = std::max(stats.worst, err);
        ++stats.checked;
        CHECK(err < tol);
    };

    const int coeffs = scene.sh_coeffs_per_channel();
    for (size_t i = 0; i < scene.size(); ++i) {
        for (int a = 0; a < 3; ++a) {
            fd_check(grads.gaussians[i].mean[a],
                     [&, a](double v) { scene[i].mean[a] = v; }, scene[i].mean[a]);
            fd_check(grads.gaussians[i].log_scale[a],
                     [&, a](double v) { scene[i].log_scale[a] = v; }, scene[i].log_scale[a]);
        }
        for (int a = 0; a < 4; ++a) {
            fd_check(grads.gaussians[i].rotation[a],
                     [&, a](double v) { scene[i].rotation[a] = v; }, scene[i].rotation[a]);
        }
        fd_check(grads.gaussians[i].opacity_logit,
                 [&](double v) { scene[i].opacity_logit = v; }, scene[i].opacity_logit);
        for (int k = 0; k < 3 * coeffs; ++k) {
            fd_check(grads.gaussians[i].sh[k], [&, k](double v) { scene[i].sh[k] = v; },
                     scene[i].sh[k]);
        }
    }
    return stats;
}

}  // namespace

TEST_CASE("zero output gradient produces exactly zero parameter gradients") {
    const GaussianScene scene = random_scene(10, 3);
    const Camera cam = look_at_origin(0.2, 0.1, 2.3, 32);
    RenderConfig cfg;
    const Image zero(32, 32, 3, 0.0);
    const SceneGrads grads = render_backward(scene, cam, cfg, zero);
    CHECK(grads.camera_twist.norm() == 0.0);
    for (const auto& g : grads.gaussians) {
        CHECK(g.mean.norm() == 0.0);
        CHECK(g.rotation.norm() == 0.0);
        CHECK(g.log_scale.norm() == 0.0);
        CHECK(g.opacity_logit == 0.0);
        for (double v : g.sh) CHECK(v == 0.0);
    }
}

TEST_CASE("opacity gradient is positive for a bright splat against a black background") {
    GaussianScene scene(2);
    scene.add(fixtures::gaussian_at(Vec3::Zero(), 0.2, 0.6, Vec3(0.8, 0.8, 0.8)));
    const Camera cam = look_at_origin(0.0, 0.0, 2.0, 32);
    RenderConfig cfg;
    cfg.background = Vec3::Zero();
    // Loss = intensity of the center pixel.
    Image grad_out(32, 32, 3, 0.0);
    grad_out.at(15, 15, 0) = grad_out.at(15, 15, 1) = grad_out.at(15, 15, 2) = 1.0;
    const SceneGrads grads = render_backward(scene, cam, cfg, grad_out);
    CHECK(grads.gaussians[0].opacity_logit > 0.0);
}

TEST_CASE("culled gaussians receive exactly zero gradients") {
    GaussianScene scene(2);
    scene.add(fixtures::gaussian_at(Vec3::Zero(), 0.1, 0.7, Vec3(0.6, 0.4, 0.4)));
    scene.add(fixtures::gaussian_at(Vec3(25.0, 0, 0), 0.1, 0.7, Vec3(0.6, 0.4, 0.4)));
    const Camera cam = look_at_origin(0.0, 0.0, 2.0, 32);
    RenderConfig cfg;
    const SceneGrads grads = render_backward(scene, cam, cfg, ones_like_render(cam));
    CHECK(!grads.gaussians[1].visible);
    CHECK(grads.gaussians[1].mean.norm() == 0.0);
    CHECK(grads.gaussians[1].opacity_logit == 0.0);
}

TEST_CASE("every gradient on a 25-splat scene matches finite differences") {
    const GaussianScene scene = random_scene(25, 1234);
    const Camera cam = look_at_origin(0.35, 0.12, 2.4, 32);
    RenderConfig cfg;
    cfg.background = Vec3(0.15, 0.25, 0.35);
    const auto stats = check_all_gradients(scene, cam, cfg, 1e-4, 1e-3);
    CHECK(stats.checked == 25 * (3 + 3 + 4 + 1 + 27));
    MESSAGE("worst relative gradient error: " << stats.worst);
}

TEST_CASE("camera twist gradients match finite differences") {
    const GaussianScene scene = random_scene(25, 1234);
    Camera cam = look_at_origin(0.35, 0.12, 2.4, 32);
    RenderConfig cfg;
    cfg.background = Vec3(0.15, 0.25, 0.35);
    const SceneGrads grads = render_backward(scene, cam, cfg, ones_like_render(cam));

    const RigidPose base = cam.world_to_camera;
    const double step = 1e-4;
    for (int k = 0; k < 6; ++k) {
        PoseDelta plus, minus;
        plus.twist[k] = step;
        minus.twist[k] = -step;
        Camera cp = cam, cm = cam;
        cp.world_to_camera = apply_pose_delta(base, plus);
        cm.world_to_camera = apply_pose_delta(base, minus);
        const double numeric =
            (render_sum(scene, cp, cfg) - render_sum(scene, cm, cfg)) / (2.0 * step);
        CHECK(oracles::grad_error(grads.camera_twist[k], numeric) < 1e-3);
    }
}

TEST_CASE("gradients stay correct with the 3d smoothing filter enabled") {
    GaussianScene scene = random_scene(8, 42);
    const Camera cam = look_at_origin(0.3, 0.05, 2.3, 32);
    RenderConfig cfg;
    cfg.smooth3d_enabled = true;
    std::vector<Camera> frozen = {look_at_origin(0.0, 0.0, 2.3, 32),
                                  look_at_origin(1.5, 0.0, 2.3, 32)};
    cfg.smooth3d_cameras = std::make_shared<const std::vector<Camera>>(frozen);
    // The filter's determinant terms carry more curvature, so use a finer
    // step to keep the finite-difference truncation below the tolerance.
    const auto stats = check_all_gradients(scene, cam, cfg, 1e-5, 1e-3);
    CHECK(stats.checked > 0);
}

TEST_CASE("backward satisfies the dot-product (adjoint) identity") {
    GaussianScene scene = random_scene(15, 88);
    const Camera cam = look_at_origin(0.25, 0.1, 2.4, 32);
    RenderConfig cfg;
    cfg.background = Vec3(0.2, 0.2, 0.2);

    // Random output cotangent and random parameter direction.
    Rng rng(5);
    Image grad_out(32, 32, 3);
    for (double& v : grad_out.raw()) v = rng.uniform(-1.0, 1.0);
    const SceneGrads grads = render_backward(scene, cam, cfg, grad_out);

    GaussianScene dir = random_scene(15, 89);  // same layout, used as a direction
    auto scene_shifted = [&](double t) {
        GaussianScene s = scene;
        for (size_t i = 0; i < s.size(); ++i) {
            s[i].mean += t * (dir[i].mean - Vec3(0, 0, 0));
            s[i].rotation += t * dir[i].rotation;
            s[i].log_scale += t * dir[i].log_scale;
            s[i].opacity_logit += t * dir[i].opacity_logit;
            for (size_t k = 0; k < s[i].sh.size(); ++k) s[i].sh[k] += t * dir[i].sh[k];
        }
        return s;
    };
    auto dot_output = [&](double t) {
        const RenderOutput out = render(scene_shifted(t), cam, cfg);
        double acc = 0.0;
        for (size_t i = 0; i < out.color.size(); ++i)
            acc += out.color.raw()[i] * grad_out.raw()[i];
        return acc;
    };

    // <J d, g> via Richardson-extrapolated central differences.
    const double h = 1e-5;
    const double d1 = (dot_output(h) - dot_output(-h)) / (2.0 * h);
    const double d2 = (dot_output(h / 2) - dot_output(-h / 2)) / h;
    const double lhs = (4.0 * d2 - d1) / 3.0;

    // <J' g, d> from the analytic backward pass.
    double rhs = 0.0;
    for (size_t i = 0; i < scene.size(); ++i) {
        rhs += grads.gaussians[i].mean.dot(dir[i].mean);
        rhs += grads.gaussians[i].rotation.dot(dir[i].rotation);
        rhs += grads.gaussians[i].log_scale.dot(dir[i].log_scale);
        rhs += grads.gaussians[i].opacity_logit * dir[i].opacity_logit;
        for (size_t k = 0; k < scene[i].sh.size(); ++k)
            rhs += grads.gaussians[i].sh[k] * dir[i].sh[k];
    }
    CHECK(std::abs(lhs - rhs) / std::max(std::abs(lhs), std::abs(rhs)) < 1e-5);
}

TEST_CASE("backward is byte-deterministic across thread counts") {
    const GaussianScene scene = random_scene(40, 31);
    const Camera cam = look_at_origin(0.9, 0.1, 2.4, 48);
    Image grad_out(48, 48, 3);
    Rng rng(6);
    for (double& v : grad_out.raw()) v = rng.uniform(-1.0, 1.0);

    RenderConfig cfg;
    cfg.threads = 1;
    const SceneGrads a = render_backward(scene, cam, cfg, grad_out);
    cfg.threads = 4;
    const SceneGrads b = render_backward(scene, cam, cfg, grad_out);
    CHECK(a.camera_twist == b.camera_twist);
    for (size_t i = 0; i < scene.size(); ++i) {
        CHECK(a.gaussians[i].mean == b.gaussians[i].mean);
        CHECK(a.gaussians[i].rotation == b.gaussians[i].rotation);
        CHECK(a.gaussians[i].log_scale == b.gaussians[i].log_scale);
        CHECK(a.gaussians[i].opacity_logit == b.gaussians[i].opacity_logit);
        CHECK(a.gaussians[i].sh == b.gaussians[i].sh);
    }
}
