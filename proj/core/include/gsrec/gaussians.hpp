#pragma once

#include <string>
#include <vector>

#include "gsrec/geometry.hpp"

namespace gsrec {

/// Spherical-harmonic channel coefficients are stored channel-major:
/// sh[c * coeff_count + k] for channel c and band-flattened index k.
inline int sh_coeff_count(int degree) { return (degree + 1) * (degree + 1); }
constexpr int kMaxShDegree = 3;
constexpr double kShC0 = 0.28209479177387814;

struct Gaussian3D {
    Vec3 mean = Vec3::Zero();
    Vec4 rotation = Vec4(1.0, 0.0, 0.0, 0.0);  // quaternion (w, x, y, z)
    Vec3 log_scale = Vec3::Zero();             // log standard deviation per axis
    double opacity_logit = 0.0;                // alpha = sigmoid(opacity_logit)
    std::vector<double> sh;                    // 3 * sh_coeff_count(degree)

    double opacity() const { return 1.0 / (1.0 + std::exp(-opacity_logit)); }
    Vec3 scale() const { return log_scale.array().exp(); }

    void validate() const;

    /// RGB implied by the DC coefficients alone.
    Vec3 dc_color() const;
    void set_dc_color(const Vec3& rgb, int sh_degree);
};

/// Rotation matrix of the (normalized) quaternion.
Mat3 quat_to_rotation(const Vec4& q);

/// Omega = R S S' R' with S = diag(exp(log_scale)).
Mat3 covariance(const Gaussian3D& g);

struct ColoredPoint {
    Vec3 position = Vec3::Zero();
    Vec3 color = Vec3::Zero();  // RGB in [0,1]
};

struct ColoredPointCloud {
    std::vector<ColoredPoint> points;

    void validate() const;
};

class GaussianScene {
public:
    GaussianScene() = default;
    explicit GaussianScene(int sh_degree) : sh_degree_(sh_degree) {
        GSREC_CHECK_ARG(sh_degree >= 0 && sh_degree <= kMaxShDegree,
                        "sh degree out of range: ", sh_degree);
    }

    int sh_degree() const { return sh_degree_; }
    int sh_coeffs_per_channel() const { return sh_coeff_count(sh_degree_); }
    size_t size() const { return gaussians_.size(); }
    bool empty() const { return gaussians_.empty(); }

    Gaussian3D& operator[](size_t i) { dirty_ = true; return gaussians_[i]; }
    const Gaussian3D& operator[](size_t i) const { return gaussians_[i]; }
    std::vector<Gaussian3D>& mutable_gaussians() { dirty_ = true; return gaussians_; }
    const std::vector<Gaussian3D>& gaussians() const { return gaussians_; }

    void add(Gaussian3D g);
    void remove_indices(const std::vector<size_t>& sorted_indices);

    /// Axis-aligned bounds over means; cached until the scene mutates.
    void bounding_box(Vec3& lo, Vec3& hi) const;
    double extent() const;  // bounding box diagonal

    void validate() const;

private:
    std::vector<Gaussian3D> gaussians_;
    int sh_degree_ = 2;
    mutable bool dirty_ = true;
    mutable Vec3 bbox_lo_ = Vec3::Zero();
    mutable Vec3 bbox_hi_ = Vec3::Zero();
};

struct InitFromPointsConfig {
    int knn = 3;                    // neighbors for the isotropic scale estimate
    double initial_opacity = 0.1;   // paper gives no constant; see docs
    double min_scale = 1e-4;
    double fallback_scale = 0.05;   // single-point clouds have no neighbors
    int sh_degree = 2;
};

/// One Gaussian per point: mean at the point, DC color matching the point
/// color, isotropic scale from the mean k-NN distance clamped to
/// [min_scale, extent/2].
GaussianScene init_from_points(const ColoredPointCloud& pc, const InitFromPointsConfig& config);

/// Splat-layout binary PLY (x,y,z,nx,ny,nz,f_dc_*,f_rest_*,opacity,scale_*,rot_*),
/// little endian, matching the layout common splat viewers read.
void save_scene(const GaussianScene& scene, const std::string& path);
GaussianScene load_scene(const std::string& path);

}  // namespace gsrec
