#pragma once

#include <array>
#include <optional>
#include <vector>

#include "gsrec/rasterizer.hpp"

namespace gsrec::detail {

// Per-pixel contributions fade smoothly to zero between these alpha levels
// (smoothstep in log-alpha). Above the ceiling the stated alpha formula holds
// exactly; below the floor splats contribute nothing and receive structurally
// zero gradients. A hard cutoff would either leak vanishing-but-consistent
// gradients into the moment estimates or put jumps into the render; the ramp
// keeps the image C1 in every parameter while invisible splats stay inert.
constexpr double kSupportFloor = 1.0 / 512.0;
constexpr double kSupportCeiling = 1.0 / 255.0;
constexpr double kMaxAlpha = 0.999;
constexpr double kTransmittanceCutoff = 1e-4;
constexpr double kMinDet = 1e-14;

/// alpha(u) for raw per-pixel opacity u, plus d(alpha)/du.
inline double support_windowed_alpha(double u, double& dalpha_du) {
    if (u >= kSupportCeiling) {
        dalpha_du = 1.0;
        return u;
    }
    if (u <= kSupportFloor) {
        dalpha_du = 0.0;
        return 0.0;
    }
    const double log_span = std::log(kSupportCeiling / kSupportFloor);
    const double s = std::log(u / kSupportFloor) / log_span;
    const double ramp = s * s * (3.0 - 2.0 * s);
    dalpha_du = ramp + 6.0 * s * (1.0 - s) / log_span;
    return u * ramp;
}

// Real spherical harmonic constants, bands 0..3.
constexpr double kSH1 = 0.4886025119029199;
constexpr std::array<double, 5> kSH2 = {1.0925484305920792, -1.0925484305920792,
                                        0.31539156525252005, -1.0925484305920792,
                                        0.5462742152960396};
constexpr std::array<double, 7> kSH3 = {-0.5900435899266435, 2.890611442640554,
                                        -0.4570457994644658, 0.3731763325901154,
                                        -0.4570457994644658, 1.445305721320277,
                                        -0.5900435899266435};

/// Basis values for a unit direction, flattened band-major; n = (deg+1)^2.
void sh_basis(const Vec3& dir, int degree, double* out);

/// d(basis_k)/d(dir) for each k; out_grad has n columns.
void sh_basis_gradient(const Vec3& dir, int degree, Eigen::Matrix<double, 3, 16>& out_grad);

struct PreparedGaussian {
    int id = -1;
    bool visible = false;

    Vec3 p_cam = Vec3::Zero();
    Vec2 mean2d = Vec2::Zero();
    double depth = 0.0;

    Mat3 sigma_world = Mat3::Zero();  // before 3D smoothing
    Mat3 sigma_eff = Mat3::Zero();    // after 3D smoothing
    Mat23 jproj = Mat23::Zero();
    Mat2 cov2d_raw = Mat2::Zero();
    Mat2 cov2d = Mat2::Zero();
    Mat2 conic = Mat2::Zero();

    double c2d = 1.0;           // mip filter energy compensation
    double c3d = 1.0;           // 3D smoothing energy compensation
    double smooth3d_var = 0.0;  // s2 term added to sigma_world
    int smooth3d_cam = -1;      // camera index realizing the max sampling rate

    double alpha = 0.0;  // sigmoid(logit) * c2d * c3d
    Vec3 rgb = Vec3::Zero();
    std::array<bool, 3> rgb_clamped = {false, false, false};
    Vec3 view_dir = Vec3::Zero();
    double view_dist = 0.0;

    double radius_px = 0.0;
    int tile_x0 = 0, tile_x1 = 0, tile_y0 = 0, tile_y1 = 0;
};

/// Projects every Gaussian; entries stay invisible when culled.
std::vector<PreparedGaussian> prepare_gaussians(const GaussianScene& scene, const Camera& cam,
                                                const RenderConfig& cfg);

/// Indices of visible Gaussians sorted by (depth, id).
std::vector<int> depth_order(const std::vector<PreparedGaussian>& prepared);

struct TileGrid {
    int tiles_x = 0;
    int tiles_y = 0;
    // Per tile, prepared-array indices in front-to-back order.
    std::vector<std::vector<int>> lists;
};

TileGrid build_tile_lists(const std::vector<PreparedGaussian>& prepared,
                          const std::vector<int>& order, int width, int height, int tile_size);

}  // namespace gsrec::detail
