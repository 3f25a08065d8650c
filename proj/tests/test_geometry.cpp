#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "gsrec/camera_io.hpp"
#include "gsrec/geometry.hpp"
#include "gsrec/rng.hpp"
#include "support/oracles.hpp"

using namespace gsrec;

namespace {

Intrinsics test_intrinsics(int size = 128) {
    Intrinsics intr;
    intr.width = intr.height = size;
    intr.fx = intr.fy = 100.0;
    intr.cx = intr.cy = 0.5 * (size - 1);
    return intr;
}

RigidPose random_pose(Rng& rng) {
    Vec6 twist;
    for (int i = 0; i < 3; ++i) twist[i] = rng.uniform(-1.5, 1.5);
    for (int i = 3; i < 6; ++i) twist[i] = rng.uniform(-2.0, 2.0);
    return se3_exp(twist);
}

}  // namespace

TEST_CASE("orbit camera at azimuth zero sits on the +z axis looking at the target") {
    OrbitPose orbit;
    orbit.radius = 2.0;
    const Camera cam = camera_from_orbit(orbit, test_intrinsics());
    CHECK((cam.center() - Vec3(0, 0, 2)).norm() < 1e-12);
    const auto proj = project(Vec3::Zero(), cam);
    CHECK(!proj.behind_camera);
    CHECK(proj.pixel.x() == doctest::Approx(cam.intrinsics.cx).epsilon(1e-12));
    CHECK(proj.pixel.y() == doctest::Approx(cam.intrinsics.cy).epsilon(1e-12));
    CHECK(proj.depth == doctest::Approx(2.0));
}

TEST_CASE("half-turn azimuth reverses the optical axis") {
    OrbitPose orbit;
    orbit.radius = 2.0;
    orbit.azimuth = M_PI;
    const Camera cam = camera_from_orbit(orbit, test_intrinsics());
    CHECK((cam.center() - Vec3(0, 0, -2)).norm() < 1e-9);
    // Forward axis (camera +z in world coordinates) points toward the target.
    const Vec3 forward = cam.world_to_camera.rotation.row(2).transpose();
    CHECK((forward - Vec3(0, 0, 1)).norm() < 1e-9);
}

TEST_CASE("oblique orbit matches the spherical-coordinate oracle") {
    OrbitPose orbit;
    orbit.azimuth = M_PI / 3.0;
    orbit.elevation = M_PI / 6.0;
    orbit.radius = 1.5;
    const Camera cam = camera_from_orbit(orbit, test_intrinsics());

    // Oracle: direct spherical-to-Cartesian point.
    const Vec3 expected(1.5 * std::cos(M_PI / 6) * std::sin(M_PI / 3), 1.5 * std::sin(M_PI / 6),
                        1.5 * std::cos(M_PI / 6) * std::cos(M_PI / 3));
    CHECK((cam.center() - expected).norm() < 1e-12);
    CHECK(std::abs((cam.center() - orbit.target).norm() - 1.5) < 1e-12);
    // Look-at constraint: the target projects to the principal point.
    const auto proj = project(orbit.target, cam);
    CHECK((proj.pixel - Vec2(cam.intrinsics.cx, cam.intrinsics.cy)).norm() < 1e-9);
    cam.validate();
}

TEST_CASE("evenly spaced azimuths give equal angular spacing about the up-axis") {
    const int n = 16;
    std::vector<Camera> cams;
    for (int i = 0; i < n; ++i) {
        OrbitPose orbit;
        orbit.azimuth = 2.0 * M_PI * i / n;
        orbit.radius = 2.0;
        cams.push_back(camera_from_orbit(orbit, test_intrinsics()));
    }
    for (int i = 0; i < n; ++i) {
        const Vec3 a = cams[i].center();
        const Vec3 b = cams[(i + 1) % n].center();
        const double ang =
            std::atan2(a.x(), a.z()) - std::atan2(b.x(), b.z());
        const double wrapped = std::abs(std::remainder(ang, 2.0 * M_PI));
        CHECK(wrapped == doctest::Approx(2.0 * M_PI / n).epsilon(1e-9));
    }
}

TEST_CASE("orbit rejects non-positive radius") {
    OrbitPose orbit;
    orbit.radius = 0.0;
    CHECK_THROWS_AS(camera_from_orbit(orbit, test_intrinsics()), std::invalid_argument);
}

TEST_CASE("projection of the canonical camera-frame point recovers the pixel") {
    Camera cam;
    cam.intrinsics = test_intrinsics();
    cam.world_to_camera = RigidPose::identity();  // world == camera frame
    const double d = 3.2, px = 17.0, py = 90.5;
    const Vec3 p(d * (px - cam.intrinsics.cx) / cam.intrinsics.fx,
                 d * (py - cam.intrinsics.cy) / cam.intrinsics.fy, d);
    const auto proj = project(p, cam);
    CHECK(proj.pixel.x() == doctest::Approx(px).epsilon(1e-12));
    CHECK(proj.pixel.y() == doctest::Approx(py).epsilon(1e-12));
    CHECK(proj.depth == doctest::Approx(d));
}

TEST_CASE("points behind the camera come back flagged, not thrown") {
    Camera cam;
    cam.intrinsics = test_intrinsics();
    const auto proj = project(Vec3(0, 0, -1), cam);
    CHECK(proj.behind_camera);
}

TEST_CASE("project and unproject round trip under random poses") {
    Rng rng(42);
    for (int trial = 0; trial < 50; ++trial) {
        Camera cam;
        cam.intrinsics = test_intrinsics();
        cam.world_to_camera = random_pose(rng);
        const Vec3 world(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
        const auto proj = project(world, cam);
        if (proj.behind_camera) continue;
        const Vec3 back = unproject(proj.pixel, proj.depth, cam);
        CHECK((back - world).norm() < 1e-9);
        const auto again = project(back, cam);
        CHECK((again.pixel - proj.pixel).norm() < 1e-6);
    }
}

TEST_CASE("zero pose delta is the exact identity") {
    Rng rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        const RigidPose pose = random_pose(rng);
        const RigidPose same = apply_pose_delta(pose, PoseDelta{});
        CHECK(same.rotation == pose.rotation);
        CHECK(same.translation == pose.translation);
    }
}

TEST_CASE("single-axis twist rotates by the twist angle") {
    PoseDelta delta;
    delta.twist << 0.0, 0.0, 0.7, 0.0, 0.0, 0.0;
    const RigidPose pose = apply_pose_delta(RigidPose::identity(), delta);
    CHECK(geodesic_angle(pose.rotation, Mat3::Identity()) == doctest::Approx(0.7).epsilon(1e-9));
    CHECK(pose.translation.norm() < 1e-12);
    // Rotation about z leaves z fixed.
    CHECK((pose.rotation * Vec3::UnitZ() - Vec3::UnitZ()).norm() < 1e-9);
}

TEST_CASE("pose delta is first-order consistent with its finite-difference jacobian") {
    Rng rng(19);
    const RigidPose pose = random_pose(rng);
    // J: columns are d(flattened pose)/d(twist_k) at zero, by central differences.
    auto flatten = [](const RigidPose& p) {
        Eigen::Matrix<double, 12, 1> v;
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) v[r * 3 + c] = p.rotation(r, c);
        v.tail<3>() = p.translation;
        return v;
    };
    const double h = 1e-6;
    Eigen::Matrix<double, 12, 6> jac;
    for (int k = 0; k < 6; ++k) {
        PoseDelta plus, minus;
        plus.twist[k] = h;
        minus.twist[k] = -h;
        jac.col(k) =
            (flatten(apply_pose_delta(pose, plus)) - flatten(apply_pose_delta(pose, minus))) /
            (2.0 * h);
    }
    for (int trial = 0; trial < 10; ++trial) {
        PoseDelta delta;
        for (int k = 0; k < 6; ++k) delta.twist[k] = 1e-3 * rng.normal();
        const Eigen::Matrix<double, 12, 1> exact = flatten(apply_pose_delta(pose, delta));
        const Eigen::Matrix<double, 12, 1> linear = flatten(pose) + jac * delta.twist;
        // Second-order remainder only.
        CHECK((exact - linear).norm() < 10.0 * delta.twist.squaredNorm());
    }
}

TEST_CASE("projection jacobian matches central finite differences") {
    Rng rng(23);
    for (int trial = 0; trial < 20; ++trial) {
        Camera cam;
        cam.intrinsics = test_intrinsics();
        cam.world_to_camera = random_pose(rng);
        Vec3 world(rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5));
        auto proj0 = project(world, cam);
        if (proj0.behind_camera || proj0.depth < 0.1) continue;

        // Analytic: dpix/dworld = J_proj * R.
        const Vec3 p = cam.world_to_camera.apply(world);
        Mat23 jproj;
        jproj << cam.intrinsics.fx / p.z(), 0, -cam.intrinsics.fx * p.x() / (p.z() * p.z()), 0,
            cam.intrinsics.fy / p.z(), -cam.intrinsics.fy * p.y() / (p.z() * p.z());
        const Mat23 analytic = jproj * cam.world_to_camera.rotation;

        const double h = 1e-6;
        for (int a = 0; a < 3; ++a) {
            Vec3 wp = world, wm = world;
            wp[a] += h;
            wm[a] -= h;
            const Vec2 fd = (project(wp, cam).pixel - project(wm, cam).pixel) / (2.0 * h);
            for (int r = 0; r < 2; ++r)
                CHECK(oracles::grad_error(analytic(r, a), fd[r]) < 1e-4);
        }
    }
}

TEST_CASE("rigid pose inverse composes to the identity") {
    Rng rng(5);
    const RigidPose pose = random_pose(rng);
    const RigidPose id = pose.compose(pose.inverse());
    CHECK((id.rotation - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-9);
    CHECK(id.translation.norm() < 1e-9);
}

TEST_CASE("camera json round trip preserves pose, intrinsics, and orbit") {
    OrbitPose orbit;
    orbit.azimuth = 1.25;
    orbit.elevation = 0.3;
    orbit.radius = 2.5;
    orbit.target = Vec3(0.1, -0.2, 0.05);
    const Camera cam = camera_from_orbit(orbit, test_intrinsics(96));
    const Camera back = camera_from_json_string(camera_to_json_string(cam));
    CHECK((back.world_to_camera.rotation - cam.world_to_camera.rotation).cwiseAbs().maxCoeff() <
          1e-12);
    CHECK((back.world_to_camera.translation - cam.world_to_camera.translation).norm() < 1e-12);
    CHECK(back.intrinsics.fx == cam.intrinsics.fx);
    REQUIRE(back.orbit.has_value());
    CHECK(back.orbit->azimuth == doctest::Approx(orbit.azimuth));
    CHECK(back.orbit->radius == doctest::Approx(orbit.radius));
}

TEST_CASE("so3 exp/log round trip recovers the rotation") {
    Rng rng(11);
    for (int trial = 0; trial < 30; ++trial) {
        const Vec3 omega(rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2));
        const Mat3 rot = so3_exp(omega);
        // Angles beyond pi alias, so compare rotations rather than vectors.
        CHECK((so3_exp(so3_log(rot)) - rot).cwiseAbs().maxCoeff() < 1e-8);
        if (omega.norm() < M_PI) CHECK((so3_log(rot) - omega).norm() < 1e-8);
    }
}
