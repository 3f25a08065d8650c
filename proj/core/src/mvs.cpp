#include "gsrec/mvs.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <tuple>

#include "gsrec/image_io.hpp"
#include "gsrec/parallel.hpp"
#include "json.hpp"

namespace gsrec {

namespace {

// Plane-induced homography for the fronto-parallel plane z = d in the
// reference camera frame: x_src ~ K_s (R_rel + t_rel n' / d) K_r^{-1} x_ref.
Mat3 plane_homography(const Camera& ref, const Camera& src, double depth) {
    const RigidPose rel = src.world_to_camera.compose(ref.world_to_camera.inverse());
    Mat3 h = rel.rotation;
    h.col(2) += rel.translation / depth;
    return src.intrinsics.matrix() * h * ref.intrinsics.matrix().inverse();
}

struct WarpedPlane {
    Image lum;    // source luminance warped into the reference grid
    Image valid;  // 1 when the source sample landed in bounds
};

WarpedPlane warp_source(const Image& src_lum, const Camera& ref, const Camera& src,
                        double depth) {
    const Mat3 h = plane_homography(ref, src, depth);
    const int w = ref.intrinsics.width, hgt = ref.intrinsics.height;
    WarpedPlane out{Image(w, hgt, 1), Image(w, hgt, 1)};
    for (int y = 0; y < hgt; ++y) {
        for (int x = 0; x < w; ++x) {
            const Vec3 q = h * Vec3(x, y, 1.0);
            if (q.z() <= 1e-12) continue;
            const double sx = q.x() / q.z();
            const double sy = q.y() / q.z();
            if (sx < 0.0 || sx > src_lum.width() - 1.0 || sy < 0.0 ||
                sy > src_lum.height() - 1.0)
                continue;
            out.lum.at(x, y) = src_lum.sample_bilinear(sx, sy);
            out.valid.at(x, y) = 1.0;
        }
    }
    return out;
}

// Summed-area table with one guard row/column of zeros.
struct Sat {
    int w, h;
    std::vector<double> s;
    explicit Sat(const Image& img, const Image* weight = nullptr)
        : w(img.width()), h(img.height()), s(static_cast<size_t>(w + 1) * (h + 1), 0.0) {
        for (int y = 0; y < h; ++y) {
            double row = 0.0;
            for (int x = 0; x < w; ++x) {
                row += weight ? img.at(x, y) * weight->at(x, y) : img.at(x, y);
                s[(y + 1) * static_cast<size_t>(w + 1) + (x + 1)] =
                    s[y * static_cast<size_t>(w + 1) + (x + 1)] + row;
            }
        }
    }
    double box(int x0, int y0, int x1, int y1) const {  // inclusive corners
        x0 = std::max(x0, 0);
        y0 = std::max(y0, 0);
        x1 = std::min(x1, w - 1);
        y1 = std::min(y1, h - 1);
        if (x0 > x1 || y0 > y1) return 0.0;
        const size_t stride = w + 1;
        return s[(y1 + 1) * stride + (x1 + 1)] - s[y0 * stride + (x1 + 1)] -
               s[(y1 + 1) * stride + x0] + s[y0 * stride + x0];
    }
};

Image product_image(const Image& a, const Image& b) {
    Image out = Image::zeros_like(a);
    for (size_t i = 0; i < a.size(); ++i) out.raw()[i] = a.raw()[i] * b.raw()[i];
    return out;
}

}  // namespace

std::vector<double> depth_hypotheses(const SweepConfig& cfg) {
    cfg.validate();
    std::vector<double> out(cfg.num_hypotheses);
    const double inv_lo = 1.0 / cfg.depth_min;
    const double inv_hi = 1.0 / cfg.depth_max;
    for (int k = 0; k < cfg.num_hypotheses; ++k) {
        const double t = static_cast<double>(k) / (cfg.num_hypotheses - 1);
        out[k] = 1.0 / (inv_lo + t * (inv_hi - inv_lo));
    }
    return out;
}

DepthMap plane_sweep_depth(const Image& ref_image, const Camera& ref_cam,
                           const std::vector<Image>& src_images,
                           const std::vector<Camera>& src_cams, const SweepConfig& cfg) {
    cfg.validate();
    GSREC_CHECK_ARG(!src_images.empty(), "plane sweep needs at least one source view");
    GSREC_CHECK_ARG(src_images.size() == src_cams.size(), "source image/camera count mismatch");

    const int w = ref_cam.intrinsics.width, h = ref_cam.intrinsics.height;
    GSREC_CHECK_ARG(ref_image.width() == w && ref_image.height() == h,
                    "reference image does not match its camera");

    const Image ref_lum = luminance(ref_image);
    std::vector<Image> src_lum;
    src_lum.reserve(src_images.size());
    for (const auto& img : src_images) src_lum.push_back(luminance(img));

    const auto hyps = depth_hypotheses(cfg);
    const int r = cfg.window / 2;

    DepthMap out;
    out.depth = Image(w, h, 1);
    out.confidence = Image(w, h, 1);
    out.valid = Image(w, h, 1);
    std::vector<double> best_score(static_cast<size_t>(w) * h,
                                   -std::numeric_limits<double>::infinity());
    std::vector<int> best_k(static_cast<size_t>(w) * h, -1);

    const Image ref_sq = product_image(ref_lum, ref_lum);

    for (size_t k = 0; k < hyps.size(); ++k) {
        // Sum of mean ZNCC over sources for this hypothesis.
        std::vector<double> score_sum(static_cast<size_t>(w) * h, 0.0);
        std::vector<int> score_cnt(static_cast<size_t>(w) * h, 0);
        for (size_t s = 0; s < src_lum.size(); ++s) {
            const WarpedPlane wp = warp_source(src_lum[s], ref_cam, src_cams[s], hyps[k]);
            const Sat sat_valid(wp.valid);
            const Sat sat_s(wp.lum, &wp.valid);
            const Sat sat_ss(product_image(wp.lum, wp.lum), &wp.valid);
            const Sat sat_r(ref_lum, &wp.valid);
            const Sat sat_rr(ref_sq, &wp.valid);
            const Sat sat_rs(product_image(ref_lum, wp.lum), &wp.valid);

            parallel_for(0, h, [&](int64_t ylo, int64_t yhi) {
                for (int y = static_cast<int>(ylo); y < yhi; ++y) {
                    for (int x = 0; x < w; ++x) {
                        const double n = sat_valid.box(x - r, y - r, x + r, y + r);
                        if (n < cfg.min_window_samples) continue;
                        const double sr = sat_r.box(x - r, y - r, x + r, y + r);
                        const double ss = sat_s.box(x - r, y - r, x + r, y + r);
                        const double srr = sat_rr.box(x - r, y - r, x + r, y + r);
                        const double sss = sat_ss.box(x - r, y - r, x + r, y + r);
                        const double srs = sat_rs.box(x - r, y - r, x + r, y + r);
                        const double var_r = srr - sr * sr / n;
                        const double var_s = sss - ss * ss / n;
                        const double cov = srs - sr * ss / n;
                        const double denom = std::sqrt(std::max(var_r, 0.0)) *
                                             std::sqrt(std::max(var_s, 0.0));
                        const double zncc = denom > 1e-12 ? cov / denom : 0.0;
                        const size_t idx = static_cast<size_t>(y) * w + x;
                        score_sum[idx] += std::clamp(zncc, -1.0, 1.0);
                        score_cnt[idx] += 1;
                    }
                }
            });
        }
        for (size_t idx = 0; idx < score_sum.size(); ++idx) {
            if (score_cnt[idx] == 0) continue;
            const double score = score_sum[idx] / score_cnt[idx];
            if (score > best_score[idx]) {  // strict: ties keep the lowest depth
                best_score[idx] = score;
                best_k[idx] = static_cast<int>(k);
            }
        }
    }

    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const size_t idx = static_cast<size_t>(y) * w + x;
            if (best_k[idx] < 0) continue;
            out.depth.at(x, y) = hyps[static_cast<size_t>(best_k[idx])];
            out.confidence.at(x, y) = std::clamp(0.5 * (best_score[idx] + 1.0), 0.0, 1.0);
            out.valid.at(x, y) = 1.0;
        }
    }
    return out;
}

std::vector<DepthMap> filter_depths(const std::vector<DepthMap>& depths,
                                    const std::vector<Camera>& cameras,
                                    const SweepConfig& cfg) {
    cfg.validate();
    GSREC_CHECK_ARG(depths.size() == cameras.size(), "need one depth map per camera");
    std::vector<DepthMap> out = depths;
    const size_t n = depths.size();

    for (size_t i = 0; i < n; ++i) {
        const auto& dm = depths[i];
        const int w = dm.depth.width(), h = dm.depth.height();
        parallel_for(0, h, [&](int64_t ylo, int64_t yhi) {
            for (int y = static_cast<int>(ylo); y < yhi; ++y) {
                for (int x = 0; x < w; ++x) {
                    if (dm.valid.at(x, y) <= 0.5) {
                        out[i].valid.at(x, y) = 0.0;
                        continue;
                    }
                    const double zncc = 2.0 * dm.confidence.at(x, y) - 1.0;
                    if (zncc < cfg.photometric_threshold) {
                        out[i].valid.at(x, y) = 0.0;
                        continue;
                    }
                    const double d = dm.depth.at(x, y);
                    const Vec3 world = unproject(Vec2(x, y), d, cameras[i]);
                    int consistent = 0;
                    for (size_t j = 0; j < n && consistent < cfg.min_consistent_views; ++j) {
                        if (j == i) continue;
                        const Projection pj = project(world, cameras[j]);
                        if (pj.behind_camera) continue;
                        const int jx = static_cast<int>(std::lround(pj.pixel.x()));
                        const int jy = static_cast<int>(std::lround(pj.pixel.y()));
                        if (!depths[j].depth.contains(jx, jy)) continue;
                        const double dj = depths[j].depth.at(jx, jy);
                        if (!(dj > 0.0) || !std::isfinite(dj)) continue;
                        // Round-trip: the other view's surface point must land
                        // back on this pixel at an agreeing depth.
                        const Vec3 back = unproject(Vec2(jx, jy), dj, cameras[j]);
                        const Projection pi = project(back, cameras[i]);
                        if (pi.behind_camera) continue;
                        if ((pi.pixel - Vec2(x, y)).norm() > cfg.geometric_reproj_threshold)
                            continue;
                        if (std::abs(pi.depth - d) / d > cfg.geometric_depth_threshold)
                            continue;
                        ++consistent;
                    }
                    out[i].valid.at(x, y) = consistent >= cfg.min_consistent_views ? 1.0 : 0.0;
                }
            }
        });
    }
    return out;
}

ColoredPointCloud fuse_points(const std::vector<DepthMap>& depths,
                              const std::vector<Image>& images,
                              const std::vector<Camera>& cameras, int stride,
                              double voxel_size) {
    GSREC_CHECK_ARG(stride >= 1, "stride must be >= 1");
    GSREC_CHECK_ARG(voxel_size > 0.0, "voxel size must be positive");
    GSREC_CHECK_ARG(depths.size() == images.size() && depths.size() == cameras.size(),
                    "fuse inputs disagree on view count");

    struct Entry {
        std::tuple<int64_t, int64_t, int64_t> key;
        Vec3 pos;
        Vec3 color;
        bool operator<(const Entry& o) const {
            if (key != o.key) return key < o.key;
            for (int a = 0; a < 3; ++a)
                if (pos[a] != o.pos[a]) return pos[a] < o.pos[a];
            for (int a = 0; a < 3; ++a)
                if (color[a] != o.color[a]) return color[a] < o.color[a];
            return false;
        }
    };
    std::vector<Entry> entries;
    for (size_t i = 0; i < depths.size(); ++i) {
        const auto& dm = depths[i];
        for (int y = 0; y < dm.depth.height(); y += stride) {
            for (int x = 0; x < dm.depth.width(); x += stride) {
                if (dm.valid.at(x, y) <= 0.5) continue;
                const Vec3 world = unproject(Vec2(x, y), dm.depth.at(x, y), cameras[i]);
                Vec3 color(images[i].at(x, y, 0), images[i].at(x, y, 1), images[i].at(x, y, 2));
                Entry e;
                e.key = {static_cast<int64_t>(std::floor(world.x() / voxel_size)),
                         static_cast<int64_t>(std::floor(world.y() / voxel_size)),
                         static_cast<int64_t>(std::floor(world.z() / voxel_size))};
                e.pos = world;
                e.color = color;
                entries.push_back(std::move(e));
            }
        }
    }
    GSREC_CHECK_RUNTIME(!entries.empty(),
                        "fusion produced an empty cloud; no pixels survived filtering");

    std::sort(entries.begin(), entries.end());
    ColoredPointCloud pc;
    size_t i = 0;
    while (i < entries.size()) {
        size_t j = i;
        Vec3 pos = Vec3::Zero(), color = Vec3::Zero();
        while (j < entries.size() && entries[j].key == entries[i].key) {
            pos += entries[j].pos;
            color += entries[j].color;
            ++j;
        }
        const double cnt = static_cast<double>(j - i);
        pc.points.push_back({pos / cnt, (color / cnt).cwiseMin(1.0).cwiseMax(0.0)});
        i = j;
    }
    return pc;
}

void save_depth_map(const DepthMap& dm, const std::string& path_raw,
                    const std::string& path_json) {
    Image packed(dm.depth.width(), dm.depth.height(), 2);
    double dmin = std::numeric_limits<double>::max(), dmax = 0.0;
    for (int y = 0; y < dm.depth.height(); ++y) {
        for (int x = 0; x < dm.depth.width(); ++x) {
            const bool ok = dm.valid.at(x, y) > 0.5;
            packed.at(x, y, 0) = ok ? dm.depth.at(x, y) : 0.0;
            packed.at(x, y, 1) = dm.confidence.at(x, y);
            if (ok) {
                dmin = std::min(dmin, dm.depth.at(x, y));
                dmax = std::max(dmax, dm.depth.at(x, y));
            }
        }
    }
    save_float_raw(packed, path_raw);
    nlohmann::ordered_json j;
    j["width"] = dm.depth.width();
    j["height"] = dm.depth.height();
    j["channels"] = 2;
    j["depth_min"] = dmin == std::numeric_limits<double>::max() ? 0.0 : dmin;
    j["depth_max"] = dmax;
    j["camera_id"] = dm.camera_id;
    std::ofstream out(path_json);
    GSREC_CHECK_RUNTIME(out.good(), "cannot write sidecar: ", path_json);
    out << j.dump(2) << "\n";
}

DepthMap load_depth_map(const std::string& path_raw, const std::string& path_json) {
    std::ifstream in(path_json);
    GSREC_CHECK_RUNTIME(in.good(), "cannot open sidecar: ", path_json);
    auto j = nlohmann::ordered_json::parse(in);
    const int w = j.at("width").get<int>();
    const int h = j.at("height").get<int>();
    const Image packed = load_float_raw(path_raw, w, h, 2);
    DepthMap dm;
    dm.depth = Image(w, h, 1);
    dm.confidence = Image(w, h, 1);
    dm.valid = Image(w, h, 1);
    dm.camera_id = j.value("camera_id", -1);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            dm.depth.at(x, y) = packed.at(x, y, 0);
            dm.confidence.at(x, y) = packed.at(x, y, 1);
            dm.valid.at(x, y) = packed.at(x, y, 0) > 0.0 ? 1.0 : 0.0;
        }
    }
    return dm;
}

void save_point_cloud_ply(const ColoredPointCloud& pc, const std::string& path) {
    std::ofstream out(path);
    GSREC_CHECK_RUNTIME(out.good(), "cannot open PLY for writing: ", path);
    out << "ply\nformat ascii 1.0\nelement vertex " << pc.points.size() << "\n";
    out << "property float x\nproperty float y\nproperty float z\n";
    out << "property uchar red\nproperty uchar green\nproperty uchar blue\nend_header\n";
    for (const auto& p : pc.points) {
        out << static_cast<float>(p.position.x()) << " " << static_cast<float>(p.position.y())
            << " " << static_cast<float>(p.position.z());
        for (int c = 0; c < 3; ++c)
            out << " " << std::lround(std::clamp(p.color[c], 0.0, 1.0) * 255.0);
        out << "\n";
    }
}

ColoredPointCloud load_point_cloud_ply(const std::string& path) {
    std::ifstream in(path);
    GSREC_CHECK_RUNTIME(in.good(), "cannot open PLY: ", path);
    std::string line;
    size_t count = 0;
    bool header_done = false;
    while (std::getline(in, line)) {
        if (line.rfind("element vertex", 0) == 0) {
            std::istringstream ls(line);
            std::string a, b;
            ls >> a >> b >> count;
        }
        if (line == "end_header") {
            header_done = true;
            break;
        }
    }
    GSREC_CHECK_RUNTIME(header_done, path, ": missing end_header");
    ColoredPointCloud pc;
    for (size_t i = 0; i < count; ++i) {
        double x, y, z;
        int r, g, b;
        in >> x >> y >> z >> r >> g >> b;
        GSREC_CHECK_RUNTIME(static_cast<bool>(in), path, ": truncated at vertex ", i);
        pc.points.push_back({Vec3(x, y, z), Vec3(r / 255.0, g / 255.0, b / 255.0)});
    }
    return pc;
}

}  // namespace gsrec
