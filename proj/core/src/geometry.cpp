#include "gsrec/geometry.hpp"

#include <cmath>

namespace gsrec {

double normalize_azimuth(double azimuth) {
    const double two_pi = 2.0 * M_PI;
    double a = std::fmod(azimuth, two_pi);
    if (a < 0.0) a += two_pi;
    return a;
}

Camera camera_from_orbit(const OrbitPose& orbit, const Intrinsics& intr) {
    orbit.validate();
    intr.validate();

    const Vec3 center = orbit.center();
    const Vec3 forward = (orbit.target - center).normalized();  // camera +z in world
    const Vec3 up_world(0.0, 1.0, 0.0);
    // Camera y points down in the image; remove the forward component of -up.
    Vec3 down = -up_world + up_world.dot(forward) * forward;
    GSREC_CHECK_ARG(down.norm() > 1e-9, "orbit looks along the up-axis; elevation degenerate");
    down.normalize();
    const Vec3 right = down.cross(forward);

    Mat3 cam_to_world;
    cam_to_world.col(0) = right;
    cam_to_world.col(1) = down;
    cam_to_world.col(2) = forward;

    Camera cam;
    cam.intrinsics = intr;
    cam.world_to_camera.rotation = cam_to_world.transpose();
    cam.world_to_camera.translation = -(cam_to_world.transpose() * center);
    OrbitPose normalized = orbit;
    normalized.azimuth = normalize_azimuth(orbit.azimuth);
    cam.orbit = normalized;
    return cam;
}

Projection project(const Vec3& point_world, const Camera& cam) {
    const Vec3 p = cam.world_to_camera.apply(point_world);
    Projection out;
    out.depth = p.z();
    if (p.z() <= 0.0) {
        out.behind_camera = true;
        return out;
    }
    out.pixel.x() = cam.intrinsics.cx + cam.intrinsics.fx * p.x() / p.z();
    out.pixel.y() = cam.intrinsics.cy + cam.intrinsics.fy * p.y() / p.z();
    return out;
}

Vec3 unproject(const Vec2& pixel, double depth, const Camera& cam) {
    GSREC_CHECK_ARG(depth > 0.0, "unproject needs positive depth, got ", depth);
    const Vec3 p_cam((pixel.x() - cam.intrinsics.cx) * depth / cam.intrinsics.fx,
                     (pixel.y() - cam.intrinsics.cy) * depth / cam.intrinsics.fy, depth);
    return cam.world_to_camera.inverse().apply(p_cam);
}

Mat3 skew(const Vec3& v) {
    Mat3 m;
    m << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
    return m;
}

Mat3 so3_exp(const Vec3& omega) {
    const double theta = omega.norm();
    const Mat3 k = skew(omega);
    if (theta < 1e-12) {
        return Mat3::Identity() + k + 0.5 * k * k;
    }
    const double a = std::sin(theta) / theta;
    const double b = (1.0 - std::cos(theta)) / (theta * theta);
    return Mat3::Identity() + a * k + b * k * k;
}

Vec3 so3_log(const Mat3& rotation) {
    const double cos_theta = std::clamp((rotation.trace() - 1.0) * 0.5, -1.0, 1.0);
    const double theta = std::acos(cos_theta);
    Vec3 axis(rotation(2, 1) - rotation(1, 2), rotation(0, 2) - rotation(2, 0),
              rotation(1, 0) - rotation(0, 1));
    if (theta < 1e-9) return 0.5 * axis;
    if (theta > M_PI - 1e-6) {
        // Near pi the off-diagonal form degenerates; recover the axis from R + I.
        Mat3 m = 0.5 * (rotation + Mat3::Identity());
        Vec3 ax(std::sqrt(std::max(0.0, m(0, 0))), std::sqrt(std::max(0.0, m(1, 1))),
                std::sqrt(std::max(0.0, m(2, 2))));
        int k = 0;
        if (ax.y() > ax.x()) k = 1;
        if (ax.z() > ax[k]) k = 2;
        if (ax[k] < 1e-12) return Vec3::Zero();
        if (k == 0) {
            ax.y() = m(0, 1) / ax.x();
            ax.z() = m(0, 2) / ax.x();
        } else if (k == 1) {
            ax.x() = m(0, 1) / ax.y();
            ax.z() = m(1, 2) / ax.y();
        } else {
            ax.x() = m(0, 2) / ax.z();
            ax.y() = m(1, 2) / ax.z();
        }
        ax.normalize();
        if (axis.dot(ax) < 0.0) ax = -ax;
        return theta * ax;
    }
    return (theta / (2.0 * std::sin(theta))) * axis;
}

RigidPose se3_exp(const Vec6& twist) {
    const Vec3 omega = twist.head<3>();
    const Vec3 v = twist.tail<3>();
    const double theta = omega.norm();
    const Mat3 k = skew(omega);

    RigidPose out;
    out.rotation = so3_exp(omega);
    Mat3 jac;
    if (theta < 1e-12) {
        jac = Mat3::Identity() + 0.5 * k;
    } else {
        const double b = (1.0 - std::cos(theta)) / (theta * theta);
        const double c = (theta - std::sin(theta)) / (theta * theta * theta);
        jac = Mat3::Identity() + b * k + c * k * k;
    }
    out.translation = jac * v;
    return out;
}

RigidPose apply_pose_delta(const RigidPose& pose, const PoseDelta& delta) {
    if (delta.twist.isZero(0.0)) return pose;
    return se3_exp(delta.twist).compose(pose).orthonormalized();
}

double geodesic_angle(const Mat3& a, const Mat3& b) {
    const double cos_theta = std::clamp(((a.transpose() * b).trace() - 1.0) * 0.5, -1.0, 1.0);
    return std::acos(cos_theta);
}

}  // namespace gsrec
