#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>

#include "gsrec/metrics.hpp"
#include "gsrec/rasterizer.hpp"
#include "gsrec/synthdata.hpp"
#include "support/oracles.hpp"

using namespace gsrec;
namespace fs = std::filesystem;

namespace {

SceneSpec sphere_spec(uint64_t seed = 2) {
    SceneSpec spec;
    spec.seed = seed;
    SceneSpec::Primitive p;
    p.type = SceneSpec::Primitive::Type::Sphere;
    p.radius = 0.4;
    p.texture_seed = seed;
    spec.primitives.push_back(p);
    spec.gaussian_spacing = 0.03;
    return spec;
}

}  // namespace

TEST_CASE("fixed seed reproduces byte-identical scenes") {
    const SceneSpec spec = human_standin_spec(5);
    const TestScene a = make_test_scene(spec);
    const TestScene b = make_test_scene(spec);
    REQUIRE(a.scene.size() == b.scene.size());
    for (size_t i = 0; i < a.scene.size(); ++i) {
        CHECK(a.scene[i].mean == b.scene[i].mean);
        CHECK(a.scene[i].sh == b.scene[i].sh);
        CHECK(a.scene[i].log_scale == b.scene[i].log_scale);
    }
}

TEST_CASE("a single sphere renders a disc silhouette") {
    const SceneSpec spec = sphere_spec();
    const TestScene scene = make_test_scene(spec);
    const ViewBundle bundle = make_view_bundle(scene, spec, 2, 0.0, 2.5, 64, 2);
    const Image& alpha_src = bundle.images[0];

    // Foreground = pixels that differ from the white background.
    auto is_fg = [&](int x, int y) {
        return std::abs(alpha_src.at(x, y, 0) - 1.0) > 0.02 ||
               std::abs(alpha_src.at(x, y, 1) - 1.0) > 0.02 ||
               std::abs(alpha_src.at(x, y, 2) - 1.0) > 0.02;
    };
    // Expected disc: radius r at distance d projects to f * r / sqrt(d^2 - r^2).
    const double f = bundle.gt_cameras[0].intrinsics.fx;
    const double expected_r = f * 0.4 / std::sqrt(2.5 * 2.5 - 0.4 * 0.4);
    const double cx = bundle.gt_cameras[0].intrinsics.cx;
    const double cy = bundle.gt_cameras[0].intrinsics.cy;
    int inside_fg = 0, inside_total = 0, outside_fg = 0, outside_total = 0;
    for (int y = 0; y < 64; ++y) {
        for (int x = 0; x < 64; ++x) {
            const double r = std::hypot(x - cx, y - cy);
            if (r < expected_r - 2.0) {
                ++inside_total;
                if (is_fg(x, y)) ++inside_fg;
            } else if (r > expected_r + 2.0) {
                ++outside_total;
                if (is_fg(x, y)) ++outside_fg;
            }
        }
    }
    CHECK(inside_fg > 0.97 * inside_total);
    CHECK(outside_fg < 0.03 * outside_total);
}

TEST_CASE("head landmarks project exactly where geometry.project puts the tagged vertices") {
    const SceneSpec spec = human_standin_spec(7);
    const TestScene scene = make_test_scene(spec);
    REQUIRE(scene.has_head);
    const ViewBundle bundle = make_view_bundle(scene, spec, 8, 0.1, 2.6, 64, 7);
    REQUIRE(!bundle.landmarks.empty());
    REQUIRE(!bundle.landmarks[0].empty());

    const Eigen::MatrixXd world =
        scene.head_pose.to_world(scene.head_model.vertices_for(scene.head_pose.shape_coeffs));
    for (size_t v = 0; v < bundle.view_count(); ++v) {
        if (bundle.landmarks[v].empty()) continue;
        REQUIRE(bundle.landmarks[v].size() == scene.head_model.landmark_indices.size());
        for (size_t l = 0; l < bundle.landmarks[v].size(); ++l) {
            const int vid = scene.head_model.landmark_indices[l];
            const Projection proj = project(world.row(vid).transpose(), bundle.gt_cameras[v]);
            CHECK((proj.pixel - bundle.landmarks[v][l]).norm() < 1e-9);
        }
    }
}

TEST_CASE("bundle azimuths are evenly spaced starting at the reference") {
    const SceneSpec spec = sphere_spec();
    const TestScene scene = make_test_scene(spec);
    const ViewBundle bundle = make_view_bundle(scene, spec, 4, 0.0, 2.5, 48, 3);
    REQUIRE(bundle.view_count() == 4);
    for (int i = 0; i < 4; ++i) {
        REQUIRE(bundle.gt_cameras[i].orbit.has_value());
        CHECK(bundle.gt_cameras[i].orbit->azimuth ==
              doctest::Approx(2.0 * M_PI * i / 4).epsilon(1e-12));
        CHECK(bundle.gt_cameras[i].orbit->elevation == doctest::Approx(0.0));
    }
}

TEST_CASE("view zero equals a direct render call") {
    const SceneSpec spec = sphere_spec();
    const TestScene scene = make_test_scene(spec);
    const ViewBundle bundle = make_view_bundle(scene, spec, 3, 0.0, 2.5, 48, 3);
    RenderConfig cfg;
    cfg.background = bundle.background;
    const RenderOutput direct = render(scene.scene, bundle.gt_cameras[0], cfg);
    CHECK(images_identical(bundle.images[0], direct.color));
}

TEST_CASE("sixteen views at zero elevation form the evaluation orbit layout") {
    const SceneSpec spec = sphere_spec();
    const TestScene scene = make_test_scene(spec);
    const ViewBundle bundle = make_view_bundle(scene, spec, 16, 0.0, 2.5, 32, 4);
    REQUIRE(bundle.view_count() == 16);
    for (int i = 0; i < 16; ++i) {
        CHECK(bundle.gt_cameras[i].orbit->elevation == 0.0);
        CHECK(bundle.gt_cameras[i].orbit->azimuth ==
              doctest::Approx(i / 16.0 * 2.0 * M_PI).epsilon(1e-12));
    }
}

TEST_CASE("zero-sigma perturbation leaves nominal cameras equal to ground truth") {
    const SceneSpec spec = sphere_spec();
    const TestScene scene = make_test_scene(spec);
    const ViewBundle bundle = make_view_bundle(scene, spec, 6, 0.0, 2.5, 32, 5);
    const ViewBundle out = perturb_cameras(bundle, 0.0, 0.0, 9);
    for (size_t i = 0; i < out.view_count(); ++i) {
        CHECK(out.nominal_cameras[i].world_to_camera.rotation ==
              bundle.gt_cameras[i].world_to_camera.rotation);
        CHECK(out.nominal_cameras[i].world_to_camera.translation ==
              bundle.gt_cameras[i].world_to_camera.translation);
    }
}

TEST_CASE("perturbations are seeded and the reference view is untouched") {
    const SceneSpec spec = sphere_spec();
    const TestScene scene = make_test_scene(spec);
    const ViewBundle bundle = make_view_bundle(scene, spec, 8, 0.0, 2.5, 32, 5);
    const ViewBundle a = perturb_cameras(bundle, 2.0, 0.01, 13);
    const ViewBundle b = perturb_cameras(bundle, 2.0, 0.01, 13);
    const ViewBundle c = perturb_cameras(bundle, 2.0, 0.01, 14);
    CHECK(a.nominal_cameras[0].world_to_camera.rotation ==
          bundle.gt_cameras[0].world_to_camera.rotation);
    for (size_t i = 1; i < a.view_count(); ++i) {
        CHECK(a.nominal_cameras[i].world_to_camera.rotation ==
              b.nominal_cameras[i].world_to_camera.rotation);
        CHECK(a.nominal_cameras[i].world_to_camera.rotation !=
              c.nominal_cameras[i].world_to_camera.rotation);
    }
}

TEST_CASE("two-degree rotation noise lands in the expected geodesic band") {
    const SceneSpec spec = sphere_spec();
    const TestScene scene = make_test_scene(spec);
    const ViewBundle bundle = make_view_bundle(scene, spec, 8, 0.0, 2.5, 32, 5);
    const ViewBundle noisy = perturb_cameras(bundle, 2.0, 0.0, 21);
    double mean_geodesic = 0.0;
    for (size_t i = 1; i < noisy.view_count(); ++i) {
        mean_geodesic += geodesic_angle(noisy.nominal_cameras[i].world_to_camera.rotation,
                                        bundle.gt_cameras[i].world_to_camera.rotation) *
                         180.0 / M_PI;
    }
    mean_geodesic /= static_cast<double>(noisy.view_count() - 1);
    // Chi(3) mean is ~1.6 sigma; a seeded draw stays well inside this band.
    CHECK(mean_geodesic > 1.0);
    CHECK(mean_geodesic < 3.5);
}

TEST_CASE("face distortion: severity zero is a no-op, reference never changes") {
    const SceneSpec spec = human_standin_spec(7);
    const TestScene scene = make_test_scene(spec);
    const ViewBundle bundle = make_view_bundle(scene, spec, 6, 0.05, 2.6, 64, 7);
    const ViewBundle zero = distort_faces(bundle, 0.0, 3);
    for (size_t i = 0; i < bundle.view_count(); ++i)
        CHECK(images_identical(zero.images[i], bundle.images[i]));

    const ViewBundle hit = distort_faces(bundle, 1.0, 3);
    CHECK(images_identical(hit.images[0], bundle.images[0]));
    REQUIRE(hit.clean_images.size() == bundle.view_count());
    for (size_t i = 0; i < bundle.view_count(); ++i)
        CHECK(images_identical(hit.clean_images[i], bundle.images[i]));
}

TEST_CASE("severity-one distortion drops masked PSNR below 25 dB") {
    const SceneSpec spec = human_standin_spec(7);
    const TestScene scene = make_test_scene(spec);
    const ViewBundle bundle = make_view_bundle(scene, spec, 6, 0.05, 2.6, 96, 7);
    const ViewBundle hit = distort_faces(bundle, 1.0, 3);
    int distorted_views = 0;
    for (size_t i = 1; i < bundle.view_count(); ++i) {
        double mask_area = 0.0;
        for (double v : bundle.face_masks[i].raw()) mask_area += v;
        if (mask_area < 40.0) continue;
        const double p = psnr_masked(hit.images[i], bundle.images[i], bundle.face_masks[i]);
        CHECK(p < 25.0);
        ++distorted_views;
    }
    CHECK(distorted_views >= 2);
}

TEST_CASE("perturbation and distortion commute") {
    const SceneSpec spec = human_standin_spec(7);
    const TestScene scene = make_test_scene(spec);
    const ViewBundle bundle = make_view_bundle(scene, spec, 6, 0.05, 2.6, 48, 7);
    const ViewBundle ab = distort_faces(perturb_cameras(bundle, 1.5, 0.01, 31), 0.8, 32);
    const ViewBundle ba = perturb_cameras(distort_faces(bundle, 0.8, 32), 1.5, 0.01, 31);
    for (size_t i = 0; i < bundle.view_count(); ++i) {
        CHECK(images_identical(ab.images[i], ba.images[i]));
        CHECK(ab.nominal_cameras[i].world_to_camera.rotation ==
              ba.nominal_cameras[i].world_to_camera.rotation);
    }
}

TEST_CASE("bundle directory round trip preserves cameras, masks, and landmarks") {
    const SceneSpec spec = human_standin_spec(7);
    const TestScene scene = make_test_scene(spec);
    ViewBundle bundle = make_view_bundle(scene, spec, 5, 0.05, 2.6, 48, 7);
    bundle = perturb_cameras(bundle, 1.0, 0.005, 3);
    bundle = distort_faces(bundle, 0.5, 4);

    const fs::path dir = fs::temp_directory_path() / "gsrec_bundle_roundtrip";
    fs::remove_all(dir);
    save_bundle(bundle, dir.string());
    const ViewBundle loaded = load_bundle(dir.string());
    REQUIRE(loaded.view_count() == bundle.view_count());
    CHECK(loaded.gt_cameras.size() == bundle.gt_cameras.size());
    CHECK(loaded.landmarks.size() == bundle.landmarks.size());
    for (size_t i = 0; i < bundle.view_count(); ++i) {
        CHECK((loaded.nominal_cameras[i].world_to_camera.translation -
               bundle.nominal_cameras[i].world_to_camera.translation)
                  .norm() < 1e-9);
        // Images go through 8-bit PNG quantization.
        CHECK(mean_abs_diff(loaded.images[i], bundle.images[i]) < 1.0 / 255.0);
        if (!bundle.landmarks[i].empty()) {
            REQUIRE(loaded.landmarks[i].size() == bundle.landmarks[i].size());
            for (size_t l = 0; l < bundle.landmarks[i].size(); ++l)
                CHECK((loaded.landmarks[i][l] - bundle.landmarks[i][l]).norm() < 1e-9);
        }
    }
    CHECK(loaded.spec_hash == bundle.spec_hash);
    fs::remove_all(dir);
}

TEST_CASE("negative perturbation or distortion parameters are rejected") {
    const SceneSpec spec = sphere_spec();
    const TestScene scene = make_test_scene(spec);
    const ViewBundle bundle = make_view_bundle(scene, spec, 3, 0.0, 2.5, 32, 5);
    CHECK_THROWS_AS(perturb_cameras(bundle, -1.0, 0.0, 1), std::invalid_argument);
    CHECK_THROWS_AS(distort_faces(bundle, -0.5, 1), std::invalid_argument);
}
