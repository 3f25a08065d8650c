#include "gsrec/gaussians.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace gsrec {

void Gaussian3D::validate() const {
    GSREC_CHECK_ARG(std::abs(rotation.norm() - 1.0) < 1e-6, "quaternion not unit, |q|=",
                    rotation.norm());
    for (int i = 0; i < 3; ++i) {
        const double s = std::exp(log_scale[i]);
        GSREC_CHECK_ARG(std::isfinite(s) && s > 0.0, "scale not positive-finite on axis ", i);
    }
    GSREC_CHECK_ARG(std::isfinite(opacity_logit), "opacity logit not finite");
    GSREC_CHECK_ARG(sh.size() % 3 == 0 && !sh.empty(), "sh coefficient count ", sh.size(),
                    " not a positive multiple of 3");
}

Vec3 Gaussian3D::dc_color() const {
    const int k = static_cast<int>(sh.size()) / 3;
    return Vec3(0.5 + kShC0 * sh[0], 0.5 + kShC0 * sh[k], 0.5 + kShC0 * sh[2 * k]);
}

void Gaussian3D::set_dc_color(const Vec3& rgb, int sh_degree) {
    const int k = sh_coeff_count(sh_degree);
    sh.assign(static_cast<size_t>(3) * k, 0.0);
    for (int c = 0; c < 3; ++c) sh[static_cast<size_t>(c) * k] = (rgb[c] - 0.5) / kShC0;
}

Mat3 quat_to_rotation(const Vec4& q) {
    const Vec4 u = q / q.norm();
    const double w = u[0], x = u[1], y = u[2], z = u[3];
    Mat3 r;
    r << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
         2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
         2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
    return r;
}

Mat3 covariance(const Gaussian3D& g) {
    const Mat3 r = quat_to_rotation(g.rotation);
    const Vec3 s = g.scale();
    const Mat3 m = r * s.asDiagonal();
    return m * m.transpose();
}

void ColoredPointCloud::validate() const {
    for (size_t i = 0; i < points.size(); ++i) {
        const auto& p = points[i];
        GSREC_CHECK_ARG(p.position.allFinite(), "point ", i, " has non-finite coordinates");
        for (int c = 0; c < 3; ++c)
            GSREC_CHECK_ARG(p.color[c] >= 0.0 && p.color[c] <= 1.0, "point ", i,
                            " color channel ", c, " out of [0,1]: ", p.color[c]);
    }
}

void GaussianScene::add(Gaussian3D g) {
    dirty_ = true;
    gaussians_.push_back(std::move(g));
}

void GaussianScene::remove_indices(const std::vector<size_t>& sorted_indices) {
    if (sorted_indices.empty()) return;
    dirty_ = true;
    std::vector<Gaussian3D> kept;
    kept.reserve(gaussians_.size() - sorted_indices.size());
    size_t next = 0;
    for (size_t i = 0; i < gaussians_.size(); ++i) {
        if (next < sorted_indices.size() && sorted_indices[next] == i) {
            ++next;
            continue;
        }
        kept.push_back(std::move(gaussians_[i]));
    }
    gaussians_ = std::move(kept);
}

void GaussianScene::bounding_box(Vec3& lo, Vec3& hi) const {
    if (dirty_) {
        bbox_lo_ = Vec3::Constant(std::numeric_limits<double>::max());
        bbox_hi_ = Vec3::Constant(std::numeric_limits<double>::lowest());
        for (const auto& g : gaussians_) {
            bbox_lo_ = bbox_lo_.cwiseMin(g.mean);
            bbox_hi_ = bbox_hi_.cwiseMax(g.mean);
        }
        if (gaussians_.empty()) {
            bbox_lo_ = Vec3::Zero();
            bbox_hi_ = Vec3::Zero();
        }
        dirty_ = false;
    }
    lo = bbox_lo_;
    hi = bbox_hi_;
}

double GaussianScene::extent() const {
    Vec3 lo, hi;
    bounding_box(lo, hi);
    return (hi - lo).norm();
}

void GaussianScene::validate() const {
    GSREC_CHECK_ARG(!gaussians_.empty(), "scene is empty");
    const size_t expected = static_cast<size_t>(3) * sh_coeff_count(sh_degree_);
    for (size_t i = 0; i < gaussians_.size(); ++i) {
        gaussians_[i].validate();
        GSREC_CHECK_ARG(gaussians_[i].sh.size() == expected, "gaussian ", i, " has ",
                        gaussians_[i].sh.size(), " sh values, scene expects ", expected);
    }
}

GaussianScene init_from_points(const ColoredPointCloud& pc, const InitFromPointsConfig& config) {
    GSREC_CHECK_ARG(!pc.points.empty(), "cannot initialize from an empty point cloud");
    pc.validate();
    const size_t n = pc.points.size();

    Vec3 lo = Vec3::Constant(std::numeric_limits<double>::max());
    Vec3 hi = Vec3::Constant(std::numeric_limits<double>::lowest());
    for (const auto& p : pc.points) {
        lo = lo.cwiseMin(p.position);
        hi = hi.cwiseMax(p.position);
    }
    const double extent = (hi - lo).norm();
    // The upper clamp guards against huge initial splats; clouds of fewer
    // than 3 points carry no such risk and keep their raw neighbor distance.
    const double max_scale = (n >= 3 && extent > 0.0) ? extent * 0.5
                                                      : std::numeric_limits<double>::max();

    // Mean distance to the k nearest neighbors, exhaustive scan. Desk-scale
    // clouds stay small enough that O(n^2) beats maintaining a spatial index.
    const int k = std::min<int>(config.knn, static_cast<int>(n) - 1);
    std::vector<double> mean_dist(n, config.fallback_scale);
    if (k >= 1) {
        std::vector<double> best(k);
        for (size_t i = 0; i < n; ++i) {
            std::fill(best.begin(), best.end(), std::numeric_limits<double>::max());
            for (size_t j = 0; j < n; ++j) {
                if (j == i) continue;
                const double d2 = (pc.points[i].position - pc.points[j].position).squaredNorm();
                if (d2 < best[k - 1]) {
                    best[k - 1] = d2;
                    for (int b = k - 1; b > 0 && best[b] < best[b - 1]; --b)
                        std::swap(best[b], best[b - 1]);
                }
            }
            double acc = 0.0;
            for (int b = 0; b < k; ++b) acc += std::sqrt(best[b]);
            mean_dist[i] = acc / k;
        }
    }

    GaussianScene scene(config.sh_degree);
    const double opacity_logit =
        std::log(config.initial_opacity / (1.0 - config.initial_opacity));
    for (size_t i = 0; i < n; ++i) {
        Gaussian3D g;
        g.mean = pc.points[i].position;
        g.rotation = Vec4(1.0, 0.0, 0.0, 0.0);
        const double s = std::clamp(mean_dist[i], config.min_scale, max_scale);
        g.log_scale = Vec3::Constant(std::log(s));
        g.opacity_logit = opacity_logit;
        g.set_dc_color(pc.points[i].color, config.sh_degree);
        scene.add(std::move(g));
    }
    return scene;
}

}  // namespace gsrec
