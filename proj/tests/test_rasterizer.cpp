#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>

#include "gsrec/rasterizer.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace gsrec;
using fixtures::gaussian_at;
using fixtures::look_at_origin;
using fixtures::random_scene;

namespace {

double max_eigenvalue(const Mat2& m) {
    const double mid = 0.5 * (m(0, 0) + m(1, 1));
    return mid + std::sqrt(std::max(0.0, mid * mid - m.determinant()));
}

}  // namespace

TEST_CASE("single near-opaque splat reproduces its DC color at the center") {
    GaussianScene scene(2);
    scene.add(gaussian_at(Vec3::Zero(), 0.3, 0.999, Vec3(0.8, 0.3, 0.1)));
    const Camera cam = look_at_origin(0.0, 0.0, 2.0, 64);
    RenderConfig cfg;
    cfg.background = Vec3::Zero();
    const RenderOutput out = render(scene, cam, cfg);
    const int cx = 31, cy = 31;
    CHECK(out.alpha.at(cx, cy) > 0.99);
    CHECK(out.color.at(cx, cy, 0) == doctest::Approx(0.8).epsilon(0.02));
    CHECK(out.color.at(cx, cy, 1) == doctest::Approx(0.3).epsilon(0.02));
    CHECK(out.color.at(cx, cy, 2) == doctest::Approx(0.1).epsilon(0.02));
}

TEST_CASE("an opaque front splat fully occludes the back one") {
    GaussianScene scene(2);
    scene.add(gaussian_at(Vec3(0, 0, 0.5), 0.3, 0.999, Vec3(0.9, 0.9, 0.9)));  // nearer
    scene.add(gaussian_at(Vec3(0, 0, -0.5), 0.3, 0.999, Vec3(0.05, 0.05, 0.05)));
    const Camera cam = look_at_origin(0.0, 0.0, 2.0, 64);
    RenderConfig cfg;
    cfg.background = Vec3::Zero();
    const RenderOutput out = render(scene, cam, cfg);
    // Transmittance past an alpha-0.999 splat leaves at most 1e-3 for the back.
    CHECK(out.color.at(31, 31, 0) == doctest::Approx(0.9).epsilon(0.01));
    // Removing the back gaussian changes nothing visible at the center.
    GaussianScene front_only(2);
    front_only.add(gaussian_at(Vec3(0, 0, 0.5), 0.3, 0.999, Vec3(0.9, 0.9, 0.9)));
    const RenderOutput ref = render(front_only, cam, cfg);
    CHECK(std::abs(out.color.at(31, 31, 0) - ref.color.at(31, 31, 0)) < 2e-3);
}

TEST_CASE("three-splat pixel matches the direct compositing sum") {
    GaussianScene scene(2);
    scene.add(gaussian_at(Vec3(0, 0, 0.5), 0.25, 0.5, Vec3(0.8, 0.2, 0.2)));
    scene.add(gaussian_at(Vec3(0, 0, 0.0), 0.25, 0.5, Vec3(0.2, 0.8, 0.2)));
    scene.add(gaussian_at(Vec3(0, 0, -0.5), 0.25, 0.5, Vec3(0.2, 0.2, 0.8)));
    const Camera cam = look_at_origin(0.0, 0.0, 2.5, 64);
    RenderConfig cfg;
    cfg.background = Vec3(0.1, 0.2, 0.3);
    const RenderOutput out = render(scene, cam, cfg);

    const Vec2 pixel(20, 26);
    // Oracle: per-splat screen parameters from project_gaussian, then the
    // compositing sum evaluated directly.
    std::vector<std::pair<double, oracles::CompositingSample>> by_depth;
    for (size_t i = 0; i < scene.size(); ++i) {
        const auto proj = project_gaussian(scene[i], static_cast<int>(i), cam, cfg);
        REQUIRE(proj.has_value());
        const Vec2 d = pixel - proj->mean2d;
        const double falloff = std::exp(-0.5 * d.dot(proj->cov2d.inverse() * d));
        const double alpha = proj->opacity * falloff;
        by_depth.push_back({proj->depth, {std::min(alpha, 0.999), proj->rgb}});
    }
    std::sort(by_depth.begin(), by_depth.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<oracles::CompositingSample> ordered;
    for (const auto& [depth, sample] : by_depth) ordered.push_back(sample);
    const Vec3 expected = oracles::composite(ordered, cfg.background);

    for (int c = 0; c < 3; ++c)
        CHECK(out.color.at(static_cast<int>(pixel.x()), static_cast<int>(pixel.y()), c) ==
              doctest::Approx(expected[c]).epsilon(1e-9));
}

TEST_CASE("compositing weights sum to at most one and match the alpha channel") {
    for (uint64_t seed : {1ULL, 2ULL, 3ULL, 4ULL}) {
        const GaussianScene scene = random_scene(30, seed);
        const Camera cam = look_at_origin(0.4, 0.1, 2.2, 48);
        RenderConfig cfg;
        const RenderOutput out = render(scene, cam, cfg);
        for (int y = 0; y < 48; ++y) {
            for (int x = 0; x < 48; ++x) {
                CHECK(out.alpha.at(x, y) <= 1.0 + 1e-6);
                CHECK(out.alpha.at(x, y) >= -1e-12);
            }
        }
    }
}

TEST_CASE("storage order permutation leaves the image byte-identical") {
    const GaussianScene scene = random_scene(40, 77);
    const Camera cam = look_at_origin(1.1, -0.2, 2.4, 48);
    RenderConfig cfg;
    const RenderOutput ref = render(scene, cam, cfg);

    Rng rng(5);
    std::vector<size_t> perm(scene.size());
    for (size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    rng.shuffle(perm);
    GaussianScene shuffled(scene.sh_degree());
    for (size_t i : perm) shuffled.add(scene[i]);
    const RenderOutput out = render(shuffled, cam, cfg);
    CHECK(images_identical(ref.color, out.color));
    CHECK(images_identical(ref.alpha, out.alpha));
}

TEST_CASE("renders are byte-identical across thread counts") {
    const GaussianScene scene = random_scene(60, 99);
    const Camera cam = look_at_origin(0.7, 0.15, 2.3, 64);
    RenderConfig cfg;
    cfg.threads = 1;
    const RenderOutput a = render(scene, cam, cfg);
    cfg.threads = 4;
    const RenderOutput b = render(scene, cam, cfg);
    CHECK(images_identical(a.color, b.color));
    CHECK(images_identical(a.depth, b.depth));
}

TEST_CASE("a saturated pixel ignores the background") {
    GaussianScene scene(2);
    scene.add(gaussian_at(Vec3::Zero(), 0.3, 0.9999, Vec3(0.5, 0.5, 0.5)));
    const Camera cam = look_at_origin(0.0, 0.0, 2.0, 64);
    RenderConfig cfg;
    cfg.background = Vec3::Zero();
    const RenderOutput black = render(scene, cam, cfg);
    cfg.background = Vec3::Ones();
    const RenderOutput white = render(scene, cam, cfg);
    // At the splat center transmittance is a couple of 1e-3 (0.999 alpha
    // clamp plus sub-pixel falloff), so the background leak is bounded by it.
    CHECK(std::abs(black.color.at(31, 31, 0) - white.color.at(31, 31, 0)) < 3e-3);
}

TEST_CASE("on-axis isotropic splat projects to the pinhole footprint plus mip variance") {
    const double scale = 0.05, depth = 2.0;
    GaussianScene scene(2);
    scene.add(gaussian_at(Vec3::Zero(), scale, 0.8, Vec3(0.5, 0.5, 0.5)));
    const Camera cam = look_at_origin(0.0, 0.0, depth, 64);
    RenderConfig cfg;
    cfg.mip2d_variance = 0.1;
    const auto proj = project_gaussian(scene[0], 0, cam, cfg);
    REQUIRE(proj.has_value());
    const double sigma_px = cam.intrinsics.fx * scale / depth;
    const double expected = sigma_px * sigma_px + cfg.mip2d_variance;
    CHECK(proj->cov2d(0, 0) == doctest::Approx(expected).epsilon(1e-3));
    CHECK(proj->cov2d(1, 1) == doctest::Approx(expected).epsilon(1e-3));
    CHECK(std::abs(proj->cov2d(0, 1)) < 1e-6);
}

TEST_CASE("doubling the depth shrinks the raw footprint fourfold") {
    const double scale = 0.05;
    GaussianScene scene(2);
    scene.add(gaussian_at(Vec3::Zero(), scale, 0.8, Vec3(0.5, 0.5, 0.5)));
    RenderConfig cfg;
    cfg.mip2d_variance = 0.0;  // raw extent
    const auto near = project_gaussian(scene[0], 0, look_at_origin(0, 0, 2.0, 64), cfg);
    const auto far = project_gaussian(scene[0], 0, look_at_origin(0, 0, 4.0, 64), cfg);
    REQUIRE(near.has_value());
    REQUIRE(far.has_value());
    CHECK(max_eigenvalue(near->cov2d) / max_eigenvalue(far->cov2d) ==
          doctest::Approx(4.0).epsilon(1e-3));
}

TEST_CASE("off-axis anisotropic footprint matches the monte-carlo oracle") {
    Gaussian3D g;
    g.mean = Vec3(0.3, -0.2, 0.1);
    Vec4 q(0.8, 0.3, -0.4, 0.33);
    g.rotation = q / q.norm();
    g.log_scale = Vec3(std::log(0.08), std::log(0.03), std::log(0.05));
    g.opacity_logit = 1.0;
    g.set_dc_color(Vec3(0.5, 0.5, 0.5), 2);

    const Camera cam = look_at_origin(0.5, 0.2, 2.2, 64);
    RenderConfig cfg;
    cfg.mip2d_variance = 0.0;  // compare the unfiltered footprint
    const auto proj = project_gaussian(g, 0, cam, cfg);
    REQUIRE(proj.has_value());

    const Mat2 mc = oracles::monte_carlo_projected_cov(g.mean, covariance(g), cam, 100000, 123);
    const double rel = (proj->cov2d - mc).norm() / mc.norm();
    CHECK(rel < 0.02);
}

TEST_CASE("mip filter growth is monotone in the filter variance") {
    const GaussianScene scene = random_scene(10, 55);
    const Camera cam = look_at_origin(0.3, 0.0, 2.4, 64);
    for (size_t i = 0; i < scene.size(); ++i) {
        double prev = 0.0;
        bool first = true;
        for (double v : {0.0, 0.05, 0.1, 0.3, 0.6}) {
            RenderConfig cfg;
            cfg.mip2d_variance = v;
            const auto proj = project_gaussian(scene[i], static_cast<int>(i), cam, cfg);
            if (!proj) break;
            const double footprint = max_eigenvalue(proj->cov2d);
            if (!first) CHECK(footprint >= prev - 1e-12);
            prev = footprint;
            first = false;
        }
    }
}

TEST_CASE("splats behind the near plane or outside the frustum are culled") {
    RenderConfig cfg;
    const Camera cam = look_at_origin(0.0, 0.0, 2.0, 64);
    CHECK(!project_gaussian(gaussian_at(Vec3(0, 0, 5.0), 0.1, 0.8, Vec3(0.5, 0.5, 0.5)), 0, cam,
                            cfg)
               .has_value());  // behind the camera
    CHECK(!project_gaussian(gaussian_at(Vec3(10.0, 0, 0), 0.1, 0.8, Vec3(0.5, 0.5, 0.5)), 0,
                            cam, cfg)
               .has_value());  // far outside the frustum
}

TEST_CASE("random background is deterministic per seed") {
    RenderConfig cfg;
    cfg.random_background = true;
    cfg.background_seed = 7;
    const Vec3 a = cfg.resolve_background();
    const Vec3 b = cfg.resolve_background();
    CHECK(a == b);
    cfg.background_seed = 8;
    CHECK(a != cfg.resolve_background());
}

TEST_CASE("empty scene render is rejected") {
    GaussianScene scene(2);
    const Camera cam = look_at_origin(0.0, 0.0, 2.0, 32);
    CHECK_THROWS_AS(render(scene, cam, RenderConfig{}), std::invalid_argument);
}

TEST_CASE("3d smoothing filter enlarges world covariance and dims compensated opacity") {
    GaussianScene scene(2);
    scene.add(gaussian_at(Vec3::Zero(), 0.004, 0.9, Vec3(0.5, 0.5, 0.5)));
    const Camera cam = look_at_origin(0.0, 0.0, 2.0, 64);
    RenderConfig plain;
    plain.mip2d_variance = 0.0;
    const auto base = project_gaussian(scene[0], 0, cam, plain);
    RenderConfig smooth = plain;
    smooth.smooth3d_enabled = true;
    smooth.smooth3d_cameras = std::make_shared<const std::vector<Camera>>(
        std::vector<Camera>{cam});
    const auto with = project_gaussian(scene[0], 0, cam, smooth);
    REQUIRE(base.has_value());
    REQUIRE(with.has_value());
    CHECK(max_eigenvalue(with->cov2d) > max_eigenvalue(base->cov2d));
    CHECK(with->opacity < base->opacity);
}
