#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <optional>

#include "gsrec/common.hpp"

namespace gsrec {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;
using Mat23 = Eigen::Matrix<double, 2, 3>;

/// Pinhole intrinsics in pixel units. Never optimized.
struct Intrinsics {
    double fx = 0.0;
    double fy = 0.0;
    double cx = 0.0;
    double cy = 0.0;
    int width = 0;
    int height = 0;

    void validate() const {
        GSREC_CHECK_ARG(fx > 0.0 && fy > 0.0, "focal lengths must be positive, got fx=", fx,
                        " fy=", fy);
        GSREC_CHECK_ARG(cx >= 0.0 && cx < width, "principal point cx=", cx,
                        " outside [0,", width, ")");
        GSREC_CHECK_ARG(cy >= 0.0 && cy < height, "principal point cy=", cy,
                        " outside [0,", height, ")");
    }

    Mat3 matrix() const {
        Mat3 k = Mat3::Identity();
        k(0, 0) = fx;
        k(1, 1) = fy;
        k(0, 2) = cx;
        k(1, 2) = cy;
        return k;
    }
};

/// Rigid transform y = R x + t. Camera extrinsics store world-to-camera.
struct RigidPose {
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();

    static RigidPose identity() { return {}; }

    Vec3 apply(const Vec3& p) const { return rotation * p + translation; }

    RigidPose inverse() const {
        RigidPose inv;
        inv.rotation = rotation.transpose();
        inv.translation = -(rotation.transpose() * translation);
        return inv;
    }

    /// this ∘ other: applies other first.
    RigidPose compose(const RigidPose& other) const {
        RigidPose out;
        out.rotation = rotation * other.rotation;
        out.translation = rotation * other.translation + translation;
        return out;
    }

    double orthonormality_error() const {
        return (rotation.transpose() * rotation - Mat3::Identity()).cwiseAbs().maxCoeff();
    }

    void validate() const {
        GSREC_CHECK_ARG(orthonormality_error() < 1e-6, "rotation not orthonormal, |R'R-I|=",
                        orthonormality_error());
        GSREC_CHECK_ARG(rotation.determinant() > 0.0, "rotation has negative determinant");
    }

    /// Snaps the rotation back onto SO(3) via the quaternion round trip.
    RigidPose orthonormalized() const {
        RigidPose out = *this;
        Eigen::Quaterniond q(rotation);
        q.normalize();
        out.rotation = q.toRotationMatrix();
        return out;
    }
};

/// Look-at orbit around a target point. World is right-handed, y-up;
/// azimuth 0 places the camera on the +z axis, increasing azimuth rotates
/// about +y. Elevation raises the camera toward +y.
struct OrbitPose {
    double azimuth = 0.0;    // radians, normalized to [0, 2*pi)
    double elevation = 0.0;  // radians, |elevation| < pi/2
    double radius = 1.0;     // world units
    Vec3 target = Vec3::Zero();

    void validate() const {
        GSREC_CHECK_ARG(radius > 0.0, "orbit radius must be positive, got ", radius);
        GSREC_CHECK_ARG(std::abs(elevation) < 1.5533430342749532,  // 89 degrees
                        "orbit elevation too close to the pole: ", elevation);
    }

    Vec3 center() const {
        return target + radius * Vec3(std::cos(elevation) * std::sin(azimuth),
                                      std::sin(elevation),
                                      std::cos(elevation) * std::cos(azimuth));
    }
};

double normalize_azimuth(double azimuth);

/// 6-vector twist: (rotation xyz, translation xyz). Applied as a local
/// left-multiplied increment, so the optimization chart stays centered
/// at the current pose.
struct PoseDelta {
    Vec6 twist = Vec6::Zero();

    Vec3 rotation_part() const { return twist.head<3>(); }
    Vec3 translation_part() const { return twist.tail<3>(); }
};

struct Camera {
    Intrinsics intrinsics;
    RigidPose world_to_camera;
    std::optional<OrbitPose> orbit;  // present for orbit-constructed cameras

    Vec3 center() const { return world_to_camera.inverse().translation; }

    void validate() const {
        intrinsics.validate();
        world_to_camera.validate();
        if (orbit) orbit->validate();
    }
};

struct Projection {
    Vec2 pixel = Vec2::Zero();
    double depth = 0.0;       // camera-frame z
    bool behind_camera = false;
};

/// Places a camera on the orbit looking at the target. The camera frame is
/// x-right, y-down, z-forward; image rows grow downward so world +y appears
/// up in the image.
Camera camera_from_orbit(const OrbitPose& orbit, const Intrinsics& intr);

/// Perspective projection of a world point. Points at or behind the camera
/// plane come back flagged rather than throwing; callers filter.
Projection project(const Vec3& point_world, const Camera& cam);

/// Inverse of project for a pixel at the given camera-frame depth.
Vec3 unproject(const Vec2& pixel, double depth, const Camera& cam);

Mat3 skew(const Vec3& v);
Mat3 so3_exp(const Vec3& omega);
Vec3 so3_log(const Mat3& rotation);
RigidPose se3_exp(const Vec6& twist);

/// exp(delta) ∘ pose, re-orthonormalized. Zero twist is the exact identity.
RigidPose apply_pose_delta(const RigidPose& pose, const PoseDelta& delta);

/// Rotation angle in radians between two rotations.
double geodesic_angle(const Mat3& a, const Mat3& b);

}  // namespace gsrec
