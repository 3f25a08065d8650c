#pragma once

#include <string>
#include <vector>

#include "gsrec/geometry.hpp"
#include "gsrec/image.hpp"
#include "gsrec/mvs.hpp"

namespace gsrec {

/// PCA-style head mesh: mean vertices plus orthonormal deformation modes with
/// per-mode standard deviations, a triangle list, tagged landmark vertices,
/// and grayscale per-vertex albedo. The stand-in model shipped with the repo
/// is procedurally generated; externally supplied bases load the same way.
struct MorphableFaceModel {
    Eigen::MatrixXd mean_vertices;              // V x 3, model space (face toward +z)
    std::vector<Eigen::MatrixXd> shape_basis;   // B entries of V x 3, orthonormal stacked
    Eigen::VectorXd mode_sigmas;                // B
    Eigen::MatrixXi triangles;                  // F x 3
    std::vector<int> landmark_indices;          // L >= 6
    Eigen::VectorXd albedo;                     // V, grayscale in [0,1]

    int vertex_count() const { return static_cast<int>(mean_vertices.rows()); }
    int basis_count() const { return static_cast<int>(shape_basis.size()); }
    int landmark_count() const { return static_cast<int>(landmark_indices.size()); }

    /// mean + sum_b coeff_b * sigma_b * mode_b; coefficients are in sigma units.
    Eigen::MatrixXd vertices_for(const Eigen::VectorXd& coeffs) const;

    void validate() const;
};

/// Ellipsoid-based stand-in head (~2k vertices, 8 modes, 12 landmarks).
MorphableFaceModel make_standin_face_model(uint64_t seed = 7);

/// Binary container: uint32 header length + JSON header + float32/int32 arrays.
void save_face_model(const MorphableFaceModel& model, const std::string& path);
MorphableFaceModel load_face_model(const std::string& path);

struct FaceFitParams {
    Eigen::VectorXd shape_coeffs;  // B, sigma units
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();
    double scale = 1.0;

    /// Model-to-world map w = scale * R * v + t applied to all rows.
    Eigen::MatrixXd to_world(const Eigen::MatrixXd& vertices_model) const;

    void validate() const {
        GSREC_CHECK_ARG(scale > 0.0, "face scale must be positive, got ", scale);
        GSREC_CHECK_ARG(shape_coeffs.allFinite(), "shape coefficients not finite");
    }
};

struct FaceObservation {
    int view_id = -1;
    int crop_x0 = 0, crop_y0 = 0, crop_x1 = 0, crop_y1 = 0;  // face rectangle, exclusive max
    Image image;                  // full view, 3 channels
    Image mask;                   // full-view face mask, 1 channel
    std::vector<Vec2> landmarks;  // pixel coordinates, one per model landmark
    Camera camera;                // aligned pose
};

struct FaceFitWeights {
    double img = 1.0;
    double lm = 10.0;
    double reg = 0.1;
};

struct FaceFitConfig {
    FaceFitWeights weights;
    int warmup_steps = 200;  // landmark-only basin capture
    int main_steps = 400;
    double lr = 0.03;
    double lr_decay = 0.1;  // applied log-linearly over the main phase
};

/// Multi-view fit of shape coefficients plus rigid placement and scale,
/// minimizing masked photometric error, landmark reprojection, and the
/// coefficient prior over all observations.
FaceFitParams fit_3dmm_multiview(const std::vector<FaceObservation>& observations,
                                 const MorphableFaceModel& model, const FaceFitConfig& cfg,
                                 const FaceFitParams& init);

/// The fit objective at a given parameter vector (no gradients).
double face_fit_objective(const std::vector<FaceObservation>& observations,
                          const MorphableFaceModel& model, const FaceFitWeights& weights,
                          const FaceFitParams& params);

/// Z-buffered rasterization of the posed mesh; depth is camera-frame z.
DepthMap render_face_depth(const FaceFitParams& params, const MorphableFaceModel& model,
                           const Camera& cam);

// --- mesh rasterization (shared with synthetic fixtures) ---

struct MeshRaster {
    Image depth;    // camera z, 0 where uncovered
    Image gray;     // interpolated per-vertex albedo
    Image mask;     // coverage
    std::vector<int> triangle_id;          // per pixel, -1 uncovered
    std::vector<Eigen::Vector3d> barycentric;  // per pixel, perspective-correct
};

MeshRaster rasterize_mesh(const Eigen::MatrixXd& vertices_world, const Eigen::MatrixXi& tris,
                          const Eigen::VectorXd& albedo, const Camera& cam,
                          double near_plane = 0.01);

// --- forward warping and inpainting ---

struct ForwardWarpResult {
    Image image;     // target-frame pixels carried from the reference
    Image coverage;  // 1 where a source pixel landed
    Image depth;     // transformed depth kept by the z-buffer
};

/// Depth-guided forward warp: unproject each valid reference pixel with K0,
/// transform by T, reproject through K, splat to the nearest integer pixel
/// with a z-buffer.
ForwardWarpResult forward_warp(const Image& ref_face, const DepthMap& ref_depth,
                               const Intrinsics& k0, const Intrinsics& k, const RigidPose& t);

/// Pastes each warp into its view inside the coverage mask. A 2-pixel feather
/// band blends toward the surrounding (outside-coverage) colors, which keeps
/// the operation idempotent for fixed warps.
std::vector<Image> inpaint_faces(const std::vector<Image>& generated_views,
                                 const std::vector<ForwardWarpResult>& warps);

}  // namespace gsrec
