#pragma once

#include <memory>
#include <optional>
#include <vector>

#include "gsrec/gaussians.hpp"
#include "gsrec/image.hpp"

namespace gsrec {

struct RenderConfig {
    int tile_size = 16;
    double near_plane = 0.01;
    double far_plane = 100.0;

    Vec3 background = Vec3::Ones();
    bool random_background = false;   // draw the background from background_seed
    uint64_t background_seed = 0;

    /// Screen-space band-limiting: cov2d += mip2d_variance * I with the
    /// opacity rescaled by sqrt(det(cov2d)/det(cov2d + mI)), replacing the
    /// fixed dilation used by earlier splatting rasterizers.
    double mip2d_variance = 0.1;  // px^2

    /// World-space band-limiting. Each Gaussian gets an isotropic covariance
    /// floor of (smooth3d_scale / s_hat)^2 where s_hat is its maximal sampling
    /// rate max_i(f_i / depth_i) over smooth3d_cameras (the training cameras,
    /// captured once and frozen; see docs).
    bool smooth3d_enabled = false;
    double smooth3d_scale = 0.2;
    std::shared_ptr<const std::vector<Camera>> smooth3d_cameras;

    int sh_degree_active = -1;  // -1 renders the scene's full degree
    int threads = 0;            // 0 = process default

    void validate() const {
        GSREC_CHECK_ARG(tile_size >= 4, "tile size must be >= 4, got ", tile_size);
        GSREC_CHECK_ARG(near_plane < far_plane, "near plane ", near_plane,
                        " must be below far plane ", far_plane);
    }

    Vec3 resolve_background() const;
};

/// Screen-space footprint of one Gaussian under a camera.
struct ProjectedGaussian {
    Vec2 mean2d = Vec2::Zero();
    Mat2 cov2d = Mat2::Identity();  // px^2, after filtering
    double depth = 0.0;             // camera-frame z
    double opacity = 0.0;           // after filter energy compensation
    Vec3 rgb = Vec3::Zero();        // sh evaluated toward the camera
    int id = -1;
};

struct RenderOutput {
    Image color;         // H x W x 3
    Image alpha;         // H x W, sum of compositing weights
    Image depth;         // H x W, alpha-weighted expected depth
    Image contributors;  // H x W, composited splat count
    Vec3 background_used = Vec3::Ones();
};

/// Projects one Gaussian; nullopt when culled (behind the near plane, outside
/// the frustum with margin, or screen-degenerate).
std::optional<ProjectedGaussian> project_gaussian(const Gaussian3D& g, int id,
                                                  const Camera& cam, const RenderConfig& cfg);

/// Tile-based forward splatting with front-to-back alpha compositing.
/// Deterministic for fixed inputs and seed, independent of thread count.
RenderOutput render(const GaussianScene& scene, const Camera& cam, const RenderConfig& cfg);

struct GaussianGrads {
    Vec3 mean = Vec3::Zero();
    Vec4 rotation = Vec4::Zero();
    Vec3 log_scale = Vec3::Zero();
    double opacity_logit = 0.0;
    std::vector<double> sh;  // 3 * coeffs, zero for culled Gaussians

    bool visible = false;      // survived culling in this render
    double mean2d_norm = 0.0;  // |dL/d(screen mean)|, the densification statistic
};

struct SceneGrads {
    std::vector<GaussianGrads> gaussians;
    Vec6 camera_twist = Vec6::Zero();  // dL/d(left-multiplied world-to-camera twist)
};

/// Reverse-mode derivative of render() with respect to every Gaussian
/// parameter and the camera extrinsics. grad_color is dL/d(color image).
/// Forward state is recomputed rather than stored.
SceneGrads render_backward(const GaussianScene& scene, const Camera& cam,
                           const RenderConfig& cfg, const Image& grad_color);

}  // namespace gsrec
