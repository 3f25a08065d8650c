#pragma once

#include <string>
#include <vector>

#include "gsrec/face.hpp"
#include "gsrec/gaussians.hpp"
#include "gsrec/view_bundle.hpp"

namespace gsrec {

/// Primitive assembly standing in for generated subjects. Colors stay below
/// the white background so silhouettes are recoverable.
struct SceneSpec {
    struct Primitive {
        enum class Type { Plane, Sphere, Capsule, Head };
        Type type = Type::Sphere;
        Vec3 center = Vec3::Zero();
        Vec3 axis = Vec3::UnitZ();   // plane normal / capsule axis
        double radius = 0.2;         // sphere/capsule radius; head scale factor
        double half_length = 0.3;    // capsule: distance between cap centers / 2
        Vec2 half_extent = Vec2(0.5, 0.5);  // plane half extents
        uint64_t texture_seed = 1;
        double texture_scale = 6.0;  // procedural color frequency (1/world units)
        double albedo_min = 0.15;
        double albedo_max = 0.9;
    };

    std::vector<Primitive> primitives;
    double gaussian_spacing = 0.02;  // surface sampling step, world units
    uint64_t seed = 1;

    void validate() const {
        GSREC_CHECK_ARG(!primitives.empty(), "scene spec has no primitives");
        GSREC_CHECK_ARG(gaussian_spacing > 0.0, "gaussian spacing must be positive");
        for (const auto& p : primitives) {
            GSREC_CHECK_ARG(p.radius > 0.0, "primitive radius must be positive");
            GSREC_CHECK_ARG(p.albedo_min < p.albedo_max && p.albedo_max <= 0.95,
                            "albedo range must stay below the background");
        }
    }

    std::string hash() const;
};

struct TestScene {
    GaussianScene scene;
    bool has_head = false;
    MorphableFaceModel head_model;
    FaceFitParams head_pose;  // model-to-world placement of the head fixture

    // Plane-only scenes also carry an exact textured mesh; bundles render it
    // with the z-buffer rasterizer so stereo fixtures have bias-free geometry
    // (splat sheets shift their apparent pattern slightly between views).
    bool mesh_only = false;
    Eigen::MatrixXd mesh_vertices;
    Eigen::MatrixXi mesh_triangles;
    Eigen::VectorXd mesh_albedo;
};

/// Deterministic for a fixed spec and seed.
TestScene make_test_scene(const SceneSpec& spec);

/// n_views ground-truth cameras evenly spaced in azimuth (view 0 at azimuth 0,
/// the reference), images rendered from the ground truth, nominal == truth.
/// Head fixtures also emit per-view face masks and ideal landmark projections.
ViewBundle make_view_bundle(const TestScene& scene, const SceneSpec& spec, int n_views,
                            double elevation, double radius, int image_size, uint64_t seed);

/// Composes every non-reference nominal pose with a Gaussian twist
/// (rot_sigma_deg per axis, trans_sigma_frac of the orbit radius).
ViewBundle perturb_cameras(const ViewBundle& bundle, double rot_sigma_deg,
                           double trans_sigma_frac, uint64_t seed);

/// Seeded smooth warps plus blur inside the face masks of non-reference
/// views; pre-distortion images are retained for scoring.
ViewBundle distort_faces(const ViewBundle& bundle, double severity, uint64_t seed);

/// Capsule body plus head fixture, the standard subject for pipeline tests.
SceneSpec human_standin_spec(uint64_t seed = 11);

/// Single textured plane orthogonal to +z at the given z, for stereo tests.
SceneSpec textured_plane_spec(double plane_z, double half_extent, uint64_t seed = 13);

}  // namespace gsrec
