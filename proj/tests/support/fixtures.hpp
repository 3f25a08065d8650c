#pragma once

// Shared scene/camera builders for the unit suites.

#include "gsrec/gaussians.hpp"
#include "gsrec/geometry.hpp"
#include "gsrec/rasterizer.hpp"
#include "gsrec/rng.hpp"

namespace fixtures {

using namespace gsrec;

inline Intrinsics square_intrinsics(int size, double fov_deg = 40.0) {
    Intrinsics intr;
    intr.width = intr.height = size;
    intr.fx = intr.fy = 0.5 * size / std::tan(0.5 * fov_deg * M_PI / 180.0);
    intr.cx = intr.cy = 0.5 * (size - 1);
    return intr;
}

inline Camera look_at_origin(double azimuth, double elevation, double radius, int size) {
    OrbitPose orbit;
    orbit.azimuth = azimuth;
    orbit.elevation = elevation;
    orbit.radius = radius;
    return camera_from_orbit(orbit, square_intrinsics(size));
}

inline Gaussian3D gaussian_at(const Vec3& mean, double scale, double opacity,
                              const Vec3& color, int degree = 2) {
    Gaussian3D g;
    g.mean = mean;
    g.rotation = Vec4(1, 0, 0, 0);
    g.log_scale = Vec3::Constant(std::log(scale));
    g.opacity_logit = std::log(opacity / (1.0 - opacity));
    g.set_dc_color(color, degree);
    return g;
}

/// Random scene inside a ball, sized to stay comfortably inside the frustum
/// and away from culling/clamping boundaries so gradients stay smooth.
inline GaussianScene random_scene(int count, uint64_t seed, int degree = 2) {
    Rng rng(seed);
    GaussianScene scene(degree);
    for (int i = 0; i < count; ++i) {
        Gaussian3D g;
        g.mean = Vec3(rng.uniform(-0.45, 0.45), rng.uniform(-0.45, 0.45),
                      rng.uniform(-0.45, 0.45));
        Vec4 q(rng.normal(), rng.normal(), rng.normal(), rng.normal());
        g.rotation = q / q.norm();
        g.log_scale = Vec3(rng.uniform(-3.2, -2.2), rng.uniform(-3.2, -2.2),
                           rng.uniform(-3.2, -2.2));
        g.opacity_logit = rng.uniform(0.4, 2.0);
        g.set_dc_color(Vec3(rng.uniform(0.25, 0.75), rng.uniform(0.25, 0.75),
                            rng.uniform(0.25, 0.75)),
                       degree);
        const int coeffs = sh_coeff_count(degree);
        for (int c = 0; c < 3; ++c)
            for (int k = 1; k < coeffs; ++k)
                g.sh[static_cast<size_t>(c) * coeffs + k] = rng.uniform(-0.08, 0.08);
        scene.add(std::move(g));
    }
    return scene;
}

}  // namespace fixtures
