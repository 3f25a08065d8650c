// Scratch isolation harness for gradient debugging. Not part of the build.
#include <cstdio>
#include <functional>

#include "gsrec/rasterizer.hpp"
#include "gsrec/rng.hpp"

using namespace gsrec;

static Camera look_at_origin(double az, double el, double r, int size) {
    OrbitPose orbit;
    orbit.azimuth = az;
    orbit.elevation = el;
    orbit.radius = r;
    Intrinsics intr;
    intr.width = intr.height = size;
    intr.fx = intr.fy = 0.5 * size / std::tan(0.5 * 40.0 * M_PI / 180.0);
    intr.cx = intr.cy = 0.5 * (size - 1);
    return camera_from_orbit(orbit, intr);
}

static double render_sum(const GaussianScene& s, const Camera& c, const RenderConfig& cfg) {
    double acc = 0;
    for (double v : render(s, c, cfg).color.raw()) acc += v;
    return acc;
}

int main() {
    const int size = 32;
    Camera cam = look_at_origin(0.3, 0.1, 2.4, size);

    auto run = [&](const char* label, GaussianScene scene, RenderConfig cfg) {
        Image ones(size, size, 3, 1.0);
        SceneGrads grads = render_backward(scene, cam, cfg, ones);
        const double h = 1e-5;
        auto fd = [&](std::function<void(double)> set, double base) {
            set(base + h);
            double fp = render_sum(scene, cam, cfg);
            set(base - h);
            double fm = render_sum(scene, cam, cfg);
            set(base);
            return (fp - fm) / (2 * h);
        };
        printf("== %s\n", label);
        for (size_t i = 0; i < scene.size(); ++i) {
            for (int a = 0; a < 3; ++a) {
                double n = fd([&](double v) { scene[i].mean[a] = v; }, scene[i].mean[a]);
                printf("  g%zu mean[%d]  ana=%+.6e fd=%+.6e\n", i, a, grads.gaussians[i].mean[a], n);
            }
            for (int a = 0; a < 3; ++a) {
                double n = fd([&](double v) { scene[i].log_scale[a] = v; }, scene[i].log_scale[a]);
                printf("  g%zu lsca[%d]  ana=%+.6e fd=%+.6e\n", i, a, grads.gaussians[i].log_scale[a], n);
            }
            for (int a = 0; a < 4; ++a) {
                double n = fd([&](double v) { scene[i].rotation[a] = v; }, scene[i].rotation[a]);
                printf("  g%zu quat[%d]  ana=%+.6e fd=%+.6e\n", i, a, grads.gaussians[i].rotation[a], n);
            }
            double n = fd([&](double v) { scene[i].opacity_logit = v; }, scene[i].opacity_logit);
            printf("  g%zu opac     ana=%+.6e fd=%+.6e\n", i, grads.gaussians[i].opacity_logit, n);
            for (size_t k = 0; k < std::min<size_t>(scene[i].sh.size(), 6); ++k) {
                double nn = fd([&](double v) { scene[i].sh[k] = v; }, scene[i].sh[k]);
                printf("  g%zu sh[%zu]    ana=%+.6e fd=%+.6e\n", i, k, grads.gaussians[i].sh[k], nn);
            }
        }
        const RigidPose base = cam.world_to_camera;
        for (int k = 0; k < 6; ++k) {
            PoseDelta p, m;
            p.twist[k] = h;
            m.twist[k] = -h;
            Camera cp = cam, cm = cam;
            cp.world_to_camera = apply_pose_delta(base, p);
            cm.world_to_camera = apply_pose_delta(base, m);
            double n = (render_sum(scene, cp, cfg) - render_sum(scene, cm, cfg)) / (2 * h);
            printf("  twist[%d]   ana=%+.6e fd=%+.6e\n", k, grads.camera_twist[k], n);
        }
    };

    // Case 1: single axis-aligned gaussian, degree 0, no mip.
    {
        GaussianScene s(0);
        Gaussian3D g;
        g.mean = Vec3(0.05, -0.1, 0.02);
        g.rotation = Vec4(1, 0, 0, 0);
        g.log_scale = Vec3(-2.5, -2.5, -2.5);
        g.opacity_logit = 0.8;
        g.set_dc_color(Vec3(0.6, 0.4, 0.3), 0);
        s.add(g);
        RenderConfig cfg;
        cfg.mip2d_variance = 0.0;
        cfg.background = Vec3(0.2, 0.3, 0.1);
        run("deg0 nomip", s, cfg);
    }
    // Case 2: rotated anisotropic, degree 0, no mip.
    {
        GaussianScene s(0);
        Gaussian3D g;
        g.mean = Vec3(0.05, -0.1, 0.02);
        Vec4 q(0.9, 0.2, -0.3, 0.1);
        g.rotation = q / q.norm();
        g.log_scale = Vec3(-2.2, -2.8, -3.0);
        g.opacity_logit = 0.8;
        g.set_dc_color(Vec3(0.6, 0.4, 0.3), 0);
        s.add(g);
        RenderConfig cfg;
        cfg.mip2d_variance = 0.0;
        cfg.background = Vec3(0.2, 0.3, 0.1);
        run("deg0 aniso nomip", s, cfg);
    }
    // Case 3: with mip filter.
    {
        GaussianScene s(0);
        Gaussian3D g;
        g.mean = Vec3(0.05, -0.1, 0.02);
        Vec4 q(0.9, 0.2, -0.3, 0.1);
        g.rotation = q / q.norm();
        g.log_scale = Vec3(-2.2, -2.8, -3.0);
        g.opacity_logit = 0.8;
        g.set_dc_color(Vec3(0.6, 0.4, 0.3), 0);
        s.add(g);
        RenderConfig cfg;
        cfg.mip2d_variance = 0.1;
        cfg.background = Vec3(0.2, 0.3, 0.1);
        run("deg0 aniso mip", s, cfg);
    }
    // Case 4: degree 2 sh.
    {
        GaussianScene s(2);
        Gaussian3D g;
        g.mean = Vec3(0.05, -0.1, 0.02);
        g.rotation = Vec4(1, 0, 0, 0);
        g.log_scale = Vec3(-2.5, -2.5, -2.5);
        g.opacity_logit = 0.8;
        g.set_dc_color(Vec3(0.6, 0.4, 0.3), 2);
        for (int c = 0; c < 3; ++c)
            for (int k = 1; k < 9; ++k) g.sh[c * 9 + k] = 0.05 * (k % 3 ? 1 : -1);
        s.add(g);
        RenderConfig cfg;
        cfg.mip2d_variance = 0.0;
        cfg.background = Vec3(0.2, 0.3, 0.1);
        run("deg2 sh", s, cfg);
    }
    return 0;
}
