#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "gsrec/gaussians.hpp"
#include "gsrec/rng.hpp"
#include "support/oracles.hpp"

using namespace gsrec;
namespace fs = std::filesystem;

namespace {

Gaussian3D make_gaussian(const Vec3& mean, const Vec4& rot, const Vec3& log_scale,
                         double opacity_logit, const Vec3& color, int degree = 2) {
    Gaussian3D g;
    g.mean = mean;
    g.rotation = rot / rot.norm();
    g.log_scale = log_scale;
    g.opacity_logit = opacity_logit;
    g.set_dc_color(color, degree);
    return g;
}

fs::path temp_dir() {
    const fs::path dir = fs::temp_directory_path() / "gsrec_gaussians_test";
    fs::create_directories(dir);
    return dir;
}

}  // namespace

TEST_CASE("covariance of the unit gaussian is the identity") {
    const auto g = make_gaussian(Vec3::Zero(), Vec4(1, 0, 0, 0), Vec3::Zero(), 0.0,
                                 Vec3(0.5, 0.5, 0.5));
    CHECK((covariance(g) - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("axis-aligned scaling shows up on the diagonal") {
    const auto g = make_gaussian(Vec3::Zero(), Vec4(1, 0, 0, 0),
                                 Vec3(std::log(2.0), 0.0, 0.0), 0.0, Vec3(0.5, 0.5, 0.5));
    const Mat3 cov = covariance(g);
    CHECK(cov(0, 0) == doctest::Approx(4.0));
    CHECK(cov(1, 1) == doctest::Approx(1.0));
    CHECK(cov(2, 2) == doctest::Approx(1.0));
}

TEST_CASE("quarter-turn about z moves the stretched axis, matching the explicit product") {
    // 90 degrees about z: q = (cos45, 0, 0, sin45).
    const double s = std::sin(M_PI / 4);
    const auto g = make_gaussian(Vec3::Zero(), Vec4(std::cos(M_PI / 4), 0, 0, s),
                                 Vec3(std::log(2.0), 0.0, 0.0), 0.0, Vec3(0.5, 0.5, 0.5));
    const Mat3 cov = covariance(g);

    // Oracle: numeric R * S * S^T * R^T with explicit matrices.
    Mat3 rot;
    rot << 0, -1, 0, 1, 0, 0, 0, 0, 1;
    Mat3 scale = Vec3(2.0, 1.0, 1.0).asDiagonal();
    const Mat3 expected = rot * scale * scale.transpose() * rot.transpose();
    CHECK((cov - expected).cwiseAbs().maxCoeff() < 1e-9);
    CHECK(cov(1, 1) == doctest::Approx(4.0));
}

TEST_CASE("covariance is symmetric PSD with eigenvalues exp(2 log_scale)") {
    Rng rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        Vec4 q(rng.normal(), rng.normal(), rng.normal(), rng.normal());
        const Vec3 ls(rng.uniform(-2, 1), rng.uniform(-2, 1), rng.uniform(-2, 1));
        const auto g = make_gaussian(Vec3::Zero(), q, ls, 0.0, Vec3(0.5, 0.5, 0.5));
        const Mat3 cov = covariance(g);
        CHECK((cov - cov.transpose()).cwiseAbs().maxCoeff() < 1e-9);
        Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
        Vec3 expected = (2.0 * ls).array().exp();
        std::sort(expected.data(), expected.data() + 3);
        for (int i = 0; i < 3; ++i) {
            CHECK(eig.eigenvalues()[i] == doctest::Approx(expected[i]).epsilon(1e-9));
            CHECK(eig.eigenvalues()[i] >= 0.0);
        }
    }
}

TEST_CASE("quaternion sign flip leaves the covariance unchanged") {
    Rng rng(9);
    for (int trial = 0; trial < 20; ++trial) {
        Vec4 q(rng.normal(), rng.normal(), rng.normal(), rng.normal());
        const Vec3 ls(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
        const auto a = make_gaussian(Vec3::Zero(), q, ls, 0.0, Vec3(0.5, 0.5, 0.5));
        const auto b = make_gaussian(Vec3::Zero(), Vec4(-q), ls, 0.0, Vec3(0.5, 0.5, 0.5));
        CHECK((covariance(a) - covariance(b)).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("init from a single point falls back to the configured scale") {
    ColoredPointCloud pc;
    pc.points.push_back({Vec3(1, 2, 3), Vec3(0.2, 0.4, 0.6)});
    InitFromPointsConfig cfg;
    const GaussianScene scene = init_from_points(pc, cfg);
    REQUIRE(scene.size() == 1);
    CHECK((scene[0].mean - Vec3(1, 2, 3)).norm() < 1e-12);
    CHECK(scene[0].log_scale[0] == doctest::Approx(std::log(cfg.fallback_scale)));
    CHECK((scene[0].dc_color() - Vec3(0.2, 0.4, 0.6)).norm() < 1e-9);
    CHECK(scene[0].opacity() == doctest::Approx(cfg.initial_opacity));
}

TEST_CASE("two points use their separation as the scale") {
    ColoredPointCloud pc;
    pc.points.push_back({Vec3::Zero(), Vec3(0.5, 0.5, 0.5)});
    pc.points.push_back({Vec3(0.12, 0, 0), Vec3(0.5, 0.5, 0.5)});
    InitFromPointsConfig cfg;
    const GaussianScene scene = init_from_points(pc, cfg);
    for (size_t i = 0; i < 2; ++i)
        CHECK(scene[i].log_scale[0] == doctest::Approx(std::log(0.12)).epsilon(1e-9));
}

TEST_CASE("grid init matches the exhaustive k-NN oracle") {
    ColoredPointCloud pc;
    Rng rng(31);
    std::vector<Vec3> pts;
    for (int i = 0; i < 100; ++i) {
        const Vec3 p(rng.uniform(0, 1), rng.uniform(0, 1), rng.uniform(0, 1));
        pts.push_back(p);
        pc.points.push_back({p, Vec3(0.3, 0.3, 0.3)});
    }
    InitFromPointsConfig cfg;
    cfg.knn = 3;
    const GaussianScene scene = init_from_points(pc, cfg);
    const auto oracle = oracles::knn_mean_distance(pts, 3);
    for (size_t i = 0; i < pts.size(); ++i) {
        const double expected = std::clamp(oracle[i], cfg.min_scale, 0.5 * scene.extent());
        CHECK(std::exp(scene[i].log_scale[0]) == doctest::Approx(expected).epsilon(1e-9));
    }
}

TEST_CASE("empty cloud is rejected") {
    ColoredPointCloud pc;
    CHECK_THROWS_AS(init_from_points(pc, InitFromPointsConfig{}), std::invalid_argument);
}

TEST_CASE("ply round trip preserves every field after float32 quantization") {
    Rng rng(17);
    GaussianScene scene(2);
    for (int i = 0; i < 20; ++i) {
        Vec4 q(rng.normal(), rng.normal(), rng.normal(), rng.normal());
        auto g = make_gaussian(Vec3(rng.normal(), rng.normal(), rng.normal()), q,
                               Vec3(rng.uniform(-3, 0), rng.uniform(-3, 0), rng.uniform(-3, 0)),
                               rng.uniform(-2, 2), Vec3(0.1, 0.5, 0.9));
        for (auto& c : g.sh) c = rng.uniform(-0.5, 0.5);
        scene.add(std::move(g));
    }
    const fs::path path = temp_dir() / "roundtrip.ply";
    save_scene(scene, path.string());
    const GaussianScene loaded = load_scene(path.string());
    REQUIRE(loaded.size() == scene.size());
    CHECK(loaded.sh_degree() == scene.sh_degree());
    for (size_t i = 0; i < scene.size(); ++i) {
        for (int a = 0; a < 3; ++a) {
            CHECK(loaded[i].mean[a] == static_cast<float>(scene[i].mean[a]));
            CHECK(loaded[i].log_scale[a] == static_cast<float>(scene[i].log_scale[a]));
        }
        CHECK(loaded[i].opacity_logit == static_cast<float>(scene[i].opacity_logit));
        for (size_t k = 0; k < scene[i].sh.size(); ++k)
            CHECK(loaded[i].sh[k] == static_cast<float>(scene[i].sh[k]));
    }
    // Save -> load -> save is byte-stable.
    const fs::path path2 = temp_dir() / "roundtrip2.ply";
    save_scene(loaded, path2.string());
    std::ifstream f1(path, std::ios::binary), f2(path2, std::ios::binary);
    const std::string b1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
    const std::string b2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
    CHECK(b1 == b2);
}

TEST_CASE("saving an empty scene violates the scene invariant") {
    GaussianScene scene(2);
    CHECK_THROWS(save_scene(scene, (temp_dir() / "empty.ply").string()));
}

TEST_CASE("hand-authored fixture file loads with exact field values") {
    // Two degree-0 gaussians written byte by byte, independently of save_scene.
    const fs::path path = temp_dir() / "fixture_two.ply";
    {
        std::ofstream out(path, std::ios::binary);
        out << "ply\nformat binary_little_endian 1.0\n"
            << "element vertex 2\n";
        for (const char* p : {"x", "y", "z", "nx", "ny", "nz", "f_dc_0", "f_dc_1", "f_dc_2",
                              "opacity", "scale_0", "scale_1", "scale_2", "rot_0", "rot_1",
                              "rot_2", "rot_3"})
            out << "property float " << p << "\n";
        out << "end_header\n";
        const float v0[] = {1.5f, -2.25f, 0.5f, 0, 0, 0, 0.25f, 0.5f, -0.75f,
                            0.125f, -1.0f, -2.0f, -3.0f, 1.0f, 0.0f, 0.0f, 0.0f};
        const float v1[] = {-0.5f, 0.75f, 4.0f, 0, 0, 0, -0.125f, 1.0f, 0.0f,
                            2.0f, -0.5f, -0.5f, -0.5f, 0.0f, 1.0f, 0.0f, 0.0f};
        out.write(reinterpret_cast<const char*>(v0), sizeof(v0));
        out.write(reinterpret_cast<const char*>(v1), sizeof(v1));
    }
    const GaussianScene scene = load_scene(path.string());
    REQUIRE(scene.size() == 2);
    CHECK(scene.sh_degree() == 0);
    CHECK(scene[0].mean == Vec3(1.5, -2.25, 0.5));
    CHECK(scene[0].sh[0] == 0.25);
    CHECK(scene[0].sh[1] == 0.5);
    CHECK(scene[0].sh[2] == -0.75);
    CHECK(scene[0].opacity_logit == 0.125);
    CHECK(scene[0].log_scale == Vec3(-1.0, -2.0, -3.0));
    CHECK(scene[0].rotation == Vec4(1, 0, 0, 0));
    CHECK(scene[1].mean == Vec3(-0.5, 0.75, 4.0));
    CHECK(scene[1].rotation == Vec4(0, 1, 0, 0));
}

TEST_CASE("malformed ply names the offending field") {
    const fs::path path = temp_dir() / "missing_opacity.ply";
    {
        std::ofstream out(path, std::ios::binary);
        out << "ply\nformat binary_little_endian 1.0\nelement vertex 1\n";
        for (const char* p : {"x", "y", "z"}) out << "property float " << p << "\n";
        out << "end_header\n";
        const float v[] = {0, 0, 0};
        out.write(reinterpret_cast<const char*>(v), sizeof(v));
    }
    try {
        load_scene(path.string());
        FAIL("expected a parse error");
    } catch (const std::runtime_error& e) {
        CHECK(std::string(e.what()).find("f_dc_0") != std::string::npos);
    }
}
