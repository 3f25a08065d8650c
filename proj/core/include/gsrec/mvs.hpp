#pragma once

#include <string>
#include <vector>

#include "gsrec/gaussians.hpp"
#include "gsrec/geometry.hpp"
#include "gsrec/image.hpp"

namespace gsrec {

struct DepthMap {
    Image depth;       // camera-frame z, world units
    Image confidence;  // [0,1], best matching score remapped
    Image valid;       // {0,1}
    int camera_id = -1;
};

struct SweepConfig {
    double depth_min = 0.5;
    double depth_max = 8.0;
    int num_hypotheses = 64;
    int window = 7;  // odd
    double photometric_threshold = 0.6;       // raw mean ZNCC in [-1,1]
    double geometric_reproj_threshold = 1.0;  // pixels
    double geometric_depth_threshold = 0.01;  // relative depth agreement
    int min_consistent_views = 1;
    int min_window_samples = 25;  // valid warped samples a window needs to score

    void validate() const {
        GSREC_CHECK_ARG(depth_min > 0.0 && depth_min < depth_max, "bad depth range [",
                        depth_min, ",", depth_max, "]");
        GSREC_CHECK_ARG(num_hypotheses >= 2, "need at least 2 hypotheses");
        GSREC_CHECK_ARG(window >= 3 && window % 2 == 1, "window must be odd and >= 3");
        GSREC_CHECK_ARG(min_consistent_views >= 1, "min consistent views must be >= 1");
    }
};

/// Hypothesis depths, uniform in inverse depth, ascending.
std::vector<double> depth_hypotheses(const SweepConfig& cfg);

/// Winner-take-all plane sweep: per pixel, the hypothesis with the best mean
/// zero-normalized cross-correlation against the homography-warped sources.
/// Ties keep the lowest depth.
DepthMap plane_sweep_depth(const Image& ref_image, const Camera& ref_cam,
                           const std::vector<Image>& src_images,
                           const std::vector<Camera>& src_cams, const SweepConfig& cfg);

/// Marks pixels invalid unless they pass the photometric threshold and agree
/// geometrically with at least min_consistent_views other views. Cross-view
/// checks consult raw depth values, so the pass is idempotent.
std::vector<DepthMap> filter_depths(const std::vector<DepthMap>& depths,
                                    const std::vector<Camera>& cameras,
                                    const SweepConfig& cfg);

/// Unprojects surviving pixels (stride-subsampled) and merges duplicates
/// within a voxel by averaging; the merge order is globally sorted, so the
/// result does not depend on view order.
ColoredPointCloud fuse_points(const std::vector<DepthMap>& depths,
                              const std::vector<Image>& images,
                              const std::vector<Camera>& cameras, int stride,
                              double voxel_size = 0.01);

/// Raw float32 depth plus a JSON sidecar (dims, range, camera id).
void save_depth_map(const DepthMap& dm, const std::string& path_raw,
                    const std::string& path_json);
DepthMap load_depth_map(const std::string& path_raw, const std::string& path_json);

/// ASCII PLY with x,y,z and 8-bit RGB.
void save_point_cloud_ply(const ColoredPointCloud& pc, const std::string& path);
ColoredPointCloud load_point_cloud_ply(const std::string& path);

}  // namespace gsrec
