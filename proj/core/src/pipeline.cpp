#include "gsrec/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "gsrec/camera_io.hpp"
#include "gsrec/image_io.hpp"
#include "gsrec/metrics.hpp"
#include "gsrec/parallel.hpp"
#include "gsrec/rng.hpp"
#include "json.hpp"

namespace gsrec {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

std::string view_png(size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%03zu.png", i);
    return buf;
}

json schedule_to_json(const OptimSchedule& s) {
    return json{{"total_steps", s.total_steps},
                {"lr_means", s.lr_means},
                {"lr_rotations", s.lr_rotations},
                {"lr_scales", s.lr_scales},
                {"lr_opacities", s.lr_opacities},
                {"lr_sh", s.lr_sh},
                {"lr_pose", s.lr_pose},
                {"pose_lr_decay", s.pose_lr_decay},
                {"means_lr_decay", s.means_lr_decay},
                {"densify_enabled", s.densify_enabled},
                {"densify_interval", s.densify_interval},
                {"densify_start", s.densify_start},
                {"densify_until", s.densify_until},
                {"densify_grad_threshold", s.densify_grad_threshold},
                {"densify_size_fraction", s.densify_size_fraction},
                {"prune_opacity_threshold", s.prune_opacity_threshold},
                {"opacity_reset_enabled", s.opacity_reset_enabled},
                {"opacity_reset_interval", s.opacity_reset_interval},
                {"sh_unlock_interval", s.sh_unlock_interval},
                {"max_gaussians", s.max_gaussians},
                {"random_background", s.random_background}};
}

void schedule_from_json(const json& j, OptimSchedule& s) {
    s.total_steps = j.value("total_steps", s.total_steps);
    s.lr_means = j.value("lr_means", s.lr_means);
    s.lr_rotations = j.value("lr_rotations", s.lr_rotations);
    s.lr_scales = j.value("lr_scales", s.lr_scales);
    s.lr_opacities = j.value("lr_opacities", s.lr_opacities);
    s.lr_sh = j.value("lr_sh", s.lr_sh);
    s.lr_pose = j.value("lr_pose", s.lr_pose);
    s.pose_lr_decay = j.value("pose_lr_decay", s.pose_lr_decay);
    s.means_lr_decay = j.value("means_lr_decay", s.means_lr_decay);
    s.densify_enabled = j.value("densify_enabled", s.densify_enabled);
    s.densify_interval = j.value("densify_interval", s.densify_interval);
    s.densify_start = j.value("densify_start", s.densify_start);
    s.densify_until = j.value("densify_until", s.densify_until);
    s.densify_grad_threshold = j.value("densify_grad_threshold", s.densify_grad_threshold);
    s.densify_size_fraction = j.value("densify_size_fraction", s.densify_size_fraction);
    s.prune_opacity_threshold = j.value("prune_opacity_threshold", s.prune_opacity_threshold);
    s.opacity_reset_enabled = j.value("opacity_reset_enabled", s.opacity_reset_enabled);
    s.opacity_reset_interval = j.value("opacity_reset_interval", s.opacity_reset_interval);
    s.sh_unlock_interval = j.value("sh_unlock_interval", s.sh_unlock_interval);
    s.max_gaussians = j.value("max_gaussians", s.max_gaussians);
    s.random_background = j.value("random_background", s.random_background);
}

}  // namespace

PipelineConfig default_pipeline_config() {
    PipelineConfig cfg;
    cfg.align_schedule.total_steps = 1200;
    cfg.align_schedule.densify_enabled = false;
    cfg.align_schedule.random_background = false;
    cfg.align_schedule.sh_unlock_interval = 400;

    cfg.recon_schedule.total_steps = 2500;
    cfg.recon_schedule.densify_enabled = true;
    cfg.recon_schedule.densify_interval = 150;
    cfg.recon_schedule.densify_start = 200;
    cfg.recon_schedule.random_background = true;
    return cfg;
}

PipelineConfig pipeline_config_from_json(const std::string& path) {
    std::ifstream in(path);
    GSREC_CHECK_RUNTIME(in.good(), "cannot open config: ", path);
    json j = json::parse(in);
    PipelineConfig cfg = default_pipeline_config();
    cfg.input_dir = j.value("input_dir", cfg.input_dir);
    cfg.output_dir = j.value("output_dir", cfg.output_dir);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.threads = j.value("threads", cfg.threads);
    if (j.contains("stages")) {
        const auto& s = j["stages"];
        cfg.stages.align = s.value("align", cfg.stages.align);
        cfg.stages.mvs_init = s.value("mvs_init", cfg.stages.mvs_init);
        cfg.stages.face_fix = s.value("face_fix", cfg.stages.face_fix);
        cfg.stages.reconstruct = s.value("reconstruct", cfg.stages.reconstruct);
    }
    if (j.contains("align")) schedule_from_json(j["align"], cfg.align_schedule);
    if (j.contains("reconstruct")) schedule_from_json(j["reconstruct"], cfg.recon_schedule);
    if (j.contains("loss")) {
        cfg.loss.lambda = j["loss"].value("lambda", cfg.loss.lambda);
        cfg.loss.ssim_window = j["loss"].value("ssim_window", cfg.loss.ssim_window);
        cfg.loss.ssim_sigma = j["loss"].value("ssim_sigma", cfg.loss.ssim_sigma);
    }
    if (j.contains("sweep")) {
        const auto& s = j["sweep"];
        cfg.sweep.depth_min = s.value("depth_min", cfg.sweep.depth_min);
        cfg.sweep.depth_max = s.value("depth_max", cfg.sweep.depth_max);
        cfg.sweep.num_hypotheses = s.value("num_hypotheses", cfg.sweep.num_hypotheses);
        cfg.sweep.window = s.value("window", cfg.sweep.window);
        cfg.sweep.photometric_threshold =
            s.value("photometric_threshold", cfg.sweep.photometric_threshold);
        cfg.sweep.geometric_reproj_threshold =
            s.value("geometric_reproj_threshold", cfg.sweep.geometric_reproj_threshold);
        cfg.sweep.geometric_depth_threshold =
            s.value("geometric_depth_threshold", cfg.sweep.geometric_depth_threshold);
        cfg.sweep.min_consistent_views =
            s.value("min_consistent_views", cfg.sweep.min_consistent_views);
        cfg.sweep_auto_range = s.value("auto_range", cfg.sweep_auto_range);
        cfg.mvs_num_sources = s.value("num_sources", cfg.mvs_num_sources);
        cfg.fuse_stride = s.value("fuse_stride", cfg.fuse_stride);
        cfg.fuse_voxel = s.value("fuse_voxel", cfg.fuse_voxel);
    }
    if (j.contains("face")) {
        const auto& f = j["face"];
        cfg.face_fit.weights.img = f.value("weight_img", cfg.face_fit.weights.img);
        cfg.face_fit.weights.lm = f.value("weight_lm", cfg.face_fit.weights.lm);
        cfg.face_fit.weights.reg = f.value("weight_reg", cfg.face_fit.weights.reg);
        cfg.face_fit.warmup_steps = f.value("warmup_steps", cfg.face_fit.warmup_steps);
        cfg.face_fit.main_steps = f.value("main_steps", cfg.face_fit.main_steps);
        cfg.face_fit.lr = f.value("lr", cfg.face_fit.lr);
        cfg.face_model_path = f.value("model_path", cfg.face_model_path);
    }
    if (j.contains("render")) {
        const auto& r = j["render"];
        cfg.render.tile_size = r.value("tile_size", cfg.render.tile_size);
        cfg.render.near_plane = r.value("near_plane", cfg.render.near_plane);
        cfg.render.far_plane = r.value("far_plane", cfg.render.far_plane);
        cfg.render.mip2d_variance = r.value("mip2d_variance", cfg.render.mip2d_variance);
        cfg.render.smooth3d_enabled = r.value("smooth3d_enabled", cfg.render.smooth3d_enabled);
        cfg.render.smooth3d_scale = r.value("smooth3d_scale", cfg.render.smooth3d_scale);
    }
    cfg.init_points = j.value("init_points", cfg.init_points);
    return cfg;
}

void save_pipeline_config(const PipelineConfig& cfg, const std::string& path) {
    json j;
    j["input_dir"] = cfg.input_dir;
    j["output_dir"] = cfg.output_dir;
    j["seed"] = cfg.seed;
    j["threads"] = cfg.threads;
    j["stages"] = {{"align", cfg.stages.align},
                   {"mvs_init", cfg.stages.mvs_init},
                   {"face_fix", cfg.stages.face_fix},
                   {"reconstruct", cfg.stages.reconstruct}};
    j["align"] = schedule_to_json(cfg.align_schedule);
    j["reconstruct"] = schedule_to_json(cfg.recon_schedule);
    j["loss"] = {{"lambda", cfg.loss.lambda},
                 {"ssim_window", cfg.loss.ssim_window},
                 {"ssim_sigma", cfg.loss.ssim_sigma}};
    j["sweep"] = {{"depth_min", cfg.sweep.depth_min},
                  {"depth_max", cfg.sweep.depth_max},
                  {"num_hypotheses", cfg.sweep.num_hypotheses},
                  {"window", cfg.sweep.window},
                  {"photometric_threshold", cfg.sweep.photometric_threshold},
                  {"geometric_reproj_threshold", cfg.sweep.geometric_reproj_threshold},
                  {"geometric_depth_threshold", cfg.sweep.geometric_depth_threshold},
                  {"min_consistent_views", cfg.sweep.min_consistent_views},
                  {"auto_range", cfg.sweep_auto_range},
                  {"num_sources", cfg.mvs_num_sources},
                  {"fuse_stride", cfg.fuse_stride},
                  {"fuse_voxel", cfg.fuse_voxel}};
    j["face"] = {{"weight_img", cfg.face_fit.weights.img},
                 {"weight_lm", cfg.face_fit.weights.lm},
                 {"weight_reg", cfg.face_fit.weights.reg},
                 {"warmup_steps", cfg.face_fit.warmup_steps},
                 {"main_steps", cfg.face_fit.main_steps},
                 {"lr", cfg.face_fit.lr},
                 {"model_path", cfg.face_model_path}};
    j["render"] = {{"tile_size", cfg.render.tile_size},
                   {"near_plane", cfg.render.near_plane},
                   {"far_plane", cfg.render.far_plane},
                   {"mip2d_variance", cfg.render.mip2d_variance},
                   {"smooth3d_enabled", cfg.render.smooth3d_enabled},
                   {"smooth3d_scale", cfg.render.smooth3d_scale}};
    j["init_points"] = cfg.init_points;
    std::ofstream out(path);
    GSREC_CHECK_RUNTIME(out.good(), "cannot write config: ", path);
    out << j.dump(2) << "\n";
}

namespace {

struct StagePaths {
    fs::path out;
    fs::path cameras_refined;
    fs::path align_dir, mvs_dir, face_dir, renders_dir, images_refined;
    fs::path scene_ply, report_json, report_csv, timings_json;

    explicit StagePaths(const std::string& output_dir) : out(output_dir) {
        cameras_refined = out / "cameras_refined.json";
        align_dir = out / "align";
        mvs_dir = out / "mvs";
        face_dir = out / "face";
        renders_dir = out / "renders";
        images_refined = out / "images_refined";
        scene_ply = out / "scene.ply";
        report_json = out / "report.json";
        report_csv = out / "report.csv";
        timings_json = out / "timings.json";
    }

    fs::path marker(const std::string& stage) const { return out / (".stage_" + stage + ".done"); }
};

void touch(const fs::path& p) { std::ofstream(p) << "done\n"; }

GaussianScene seeded_cloud_scene(const ViewBundle& bundle, int n_points, uint64_t seed) {
    // Fallback / alignment initialization: a seeded ball of gray points
    // around the rig's look-at center.
    Vec3 center = Vec3::Zero();
    for (const auto& cam : bundle.nominal_cameras) center += cam.center();
    center /= static_cast<double>(bundle.nominal_cameras.size());
    double mean_dist = 0.0;
    for (const auto& cam : bundle.nominal_cameras)
        mean_dist += (cam.center() - center).norm();
    mean_dist /= static_cast<double>(bundle.nominal_cameras.size());
    const double ball = 0.35 * std::max(mean_dist, 1e-3);

    Rng rng(mix_seed(seed, 404));
    ColoredPointCloud pc;
    pc.points.reserve(n_points);
    for (int i = 0; i < n_points; ++i) {
        Vec3 p(rng.normal(), rng.normal(), rng.normal());
        if (p.norm() > 1e-9) p = p / p.norm() * ball * std::cbrt(rng.uniform());
        pc.points.push_back({center + p, Vec3(0.5, 0.5, 0.5)});
    }
    InitFromPointsConfig init_cfg;
    return init_from_points(pc, init_cfg);
}

double stage_seconds(const std::chrono::steady_clock::time_point& t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void run_align(const PipelineConfig& cfg, const StagePaths& paths, const ViewBundle& bundle) {
    fs::create_directories(paths.align_dir);
    if (cfg.stages.align) {
        OptimSchedule sched = cfg.align_schedule;
        sched.seed = mix_seed(cfg.seed, 1);
        RenderConfig rcfg = cfg.render;
        rcfg.threads = cfg.threads;
        const GaussianScene init = seeded_cloud_scene(bundle, cfg.init_points, cfg.seed);
        AlignmentResult result = align_cameras(init, bundle, sched, cfg.loss, rcfg);
        save_cameras_json(result.refined_cameras, paths.cameras_refined.string());
        save_trace_csv(result.trace, (paths.align_dir / "trace.csv").string());
        save_scene(result.scene, (paths.align_dir / "scene_align.ply").string());
    } else {
        save_cameras_json(bundle.nominal_cameras, paths.cameras_refined.string());
    }
    touch(paths.marker("align"));
}

void run_mvs(const PipelineConfig& cfg, const StagePaths& paths, const ViewBundle& bundle) {
    fs::create_directories(paths.mvs_dir);
    const auto cams = load_cameras_json(paths.cameras_refined.string());
    if (cfg.stages.mvs_init) {
        SweepConfig sweep = cfg.sweep;
        if (cfg.sweep_auto_range) {
            Vec3 center = Vec3::Zero();
            for (const auto& c : cams) center += c.center();
            center /= static_cast<double>(cams.size());
            double mean_dist = 0.0;
            for (const auto& c : cams) mean_dist += (c.center() - center).norm();
            mean_dist /= static_cast<double>(cams.size());
            sweep.depth_min = 0.35 * mean_dist;
            sweep.depth_max = 1.8 * mean_dist;
        }

        const int n = static_cast<int>(bundle.view_count());
        std::vector<DepthMap> depths(n);
        for (int i = 0; i < n; ++i) {
            std::vector<Image> src_images;
            std::vector<Camera> src_cams;
            for (int off = 1; off <= cfg.mvs_num_sources; ++off) {
                for (int s : {(i + off) % n, (i - off + n) % n}) {
                    if (s == i) continue;
                    src_images.push_back(bundle.images[s]);
                    src_cams.push_back(cams[s]);
                }
            }
            depths[i] = plane_sweep_depth(bundle.images[i], cams[i], src_images, src_cams, sweep);
            depths[i].camera_id = i;
        }
        depths = filter_depths(depths, cams, sweep);
        for (int i = 0; i < n; ++i) {
            char raw[32], side[32];
            std::snprintf(raw, sizeof(raw), "depth_%03d.raw", i);
            std::snprintf(side, sizeof(side), "depth_%03d.json", i);
            save_depth_map(depths[i], (paths.mvs_dir / raw).string(),
                           (paths.mvs_dir / side).string());
        }
        ColoredPointCloud cloud;
        try {
            cloud = fuse_points(depths, bundle.images, cams, cfg.fuse_stride, cfg.fuse_voxel);
        } catch (const std::exception&) {
            // Documented fallback: random-in-bounds initialization.
            cloud.points.clear();
        }
        if (cloud.points.empty()) {
            const GaussianScene fallback =
                seeded_cloud_scene(bundle, cfg.init_points, cfg.seed);
            for (const auto& g : fallback.gaussians()) cloud.points.push_back({g.mean, g.dc_color()});
        }
        save_point_cloud_ply(cloud, (paths.mvs_dir / "pointcloud.ply").string());
    } else {
        const GaussianScene fallback = seeded_cloud_scene(bundle, cfg.init_points, cfg.seed);
        ColoredPointCloud cloud;
        for (const auto& g : fallback.gaussians()) cloud.points.push_back({g.mean, g.dc_color()});
        save_point_cloud_ply(cloud, (paths.mvs_dir / "pointcloud.ply").string());
    }
    touch(paths.marker("mvs-init"));
}

// The two generated views nearest the reference in azimuth join it for the
// multi-view fit.
std::vector<int> pick_fit_views(const ViewBundle& bundle, const std::vector<Camera>& cams) {
    std::vector<std::pair<double, int>> scored;
    for (size_t i = 1; i < bundle.view_count(); ++i) {
        if (!bundle.landmarks.empty() && bundle.landmarks[i].empty()) continue;
        const double d = (cams[i].center() - cams[0].center()).norm();
        scored.push_back({d, static_cast<int>(i)});
    }
    std::sort(scored.begin(), scored.end());
    std::vector<int> views = {0};
    for (size_t k = 0; k < scored.size() && views.size() < 3; ++k)
        views.push_back(scored[k].second);
    return views;
}

bool bundle_has_face_annotations(const ViewBundle& bundle) {
    return !bundle.face_masks.empty() && !bundle.landmarks.empty() &&
           !bundle.landmarks[0].empty();
}

MorphableFaceModel pipeline_face_model(const PipelineConfig& cfg) {
    return cfg.face_model_path.empty() ? make_standin_face_model()
                                       : load_face_model(cfg.face_model_path);
}

void run_face_fit(const PipelineConfig& cfg, const StagePaths& paths,
                  const ViewBundle& bundle) {
    fs::create_directories(paths.face_dir);
    if (!cfg.stages.face_fix || !bundle_has_face_annotations(bundle)) {
        touch(paths.marker("face-fit"));
        return;
    }
    const auto cams = load_cameras_json(paths.cameras_refined.string());
    const MorphableFaceModel model = pipeline_face_model(cfg);
    const auto fit_views = pick_fit_views(bundle, cams);
    GSREC_CHECK_RUNTIME(fit_views.size() >= 2, "not enough annotated views for the face fit");

    std::vector<FaceObservation> observations;
    for (int v : fit_views) {
        FaceObservation obs;
        obs.view_id = v;
        obs.image = bundle.images[v];
        obs.mask = bundle.face_masks[v];
        obs.landmarks = bundle.landmarks[v];
        obs.camera = cams[v];
        int x0 = obs.image.width(), y0 = obs.image.height(), x1 = 0, y1 = 0;
        for (int y = 0; y < obs.mask.height(); ++y)
            for (int x = 0; x < obs.mask.width(); ++x)
                if (obs.mask.at(x, y) > 0.5) {
                    x0 = std::min(x0, x);
                    y0 = std::min(y0, y);
                    x1 = std::max(x1, x + 1);
                    y1 = std::max(y1, y + 1);
                }
        obs.crop_x0 = x0;
        obs.crop_y0 = y0;
        obs.crop_x1 = x1;
        obs.crop_y1 = y1;
        observations.push_back(std::move(obs));
    }

    // Initialization: the mean reference landmark unprojected at the rig
    // radius, facing the reference camera.
    FaceFitParams init;
    init.shape_coeffs = Eigen::VectorXd::Zero(model.basis_count());
    Vec2 mean_lm = Vec2::Zero();
    for (const auto& p : observations[0].landmarks) mean_lm += p;
    mean_lm /= static_cast<double>(observations[0].landmarks.size());
    Vec3 rig_center = Vec3::Zero();
    for (const auto& c : cams) rig_center += c.center();
    rig_center /= static_cast<double>(cams.size());
    const double depth_guess = (cams[0].center() - rig_center).norm();
    init.translation = unproject(mean_lm, depth_guess, cams[0]);
    Vec3 to_ref = cams[0].center() - init.translation;
    to_ref.y() = 0.0;
    if (to_ref.norm() > 1e-9) {
        to_ref.normalize();
        const double yaw = std::atan2(to_ref.x(), to_ref.z());
        init.rotation = so3_exp(Vec3(0.0, yaw, 0.0));
    }
    init.scale = 1.0;

    const FaceFitParams fit = fit_3dmm_multiview(observations, model, cfg.face_fit, init);

    json fit_json;
    fit_json["scale"] = fit.scale;
    fit_json["translation"] = {fit.translation.x(), fit.translation.y(), fit.translation.z()};
    std::vector<double> rot(9);
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) rot[r * 3 + c] = fit.rotation(r, c);
    fit_json["rotation"] = rot;
    std::vector<double> coeffs(fit.shape_coeffs.data(),
                               fit.shape_coeffs.data() + fit.shape_coeffs.size());
    fit_json["shape_coeffs"] = coeffs;
    std::ofstream(paths.face_dir / "fit.json") << fit_json.dump(2) << "\n";
    touch(paths.marker("face-fit"));
}

FaceFitParams face_fit_from_json(const std::string& path) {
    std::ifstream in(path);
    GSREC_CHECK_RUNTIME(in.good(), "cannot open fit parameters: ", path);
    json j = json::parse(in);
    FaceFitParams fit;
    fit.scale = j.at("scale").get<double>();
    const auto t = j.at("translation").get<std::vector<double>>();
    fit.translation = Vec3(t[0], t[1], t[2]);
    const auto rot = j.at("rotation").get<std::vector<double>>();
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) fit.rotation(r, c) = rot[r * 3 + c];
    const auto coeffs = j.at("shape_coeffs").get<std::vector<double>>();
    fit.shape_coeffs = Eigen::Map<const Eigen::VectorXd>(coeffs.data(),
                                                         static_cast<int>(coeffs.size()));
    return fit;
}

void run_face_warp(const PipelineConfig& cfg, const StagePaths& paths,
                   const ViewBundle& bundle) {
    fs::create_directories(paths.images_refined);
    std::vector<Image> refined = bundle.images;

    const fs::path fit_path = paths.face_dir / "fit.json";
    if (cfg.stages.face_fix && bundle_has_face_annotations(bundle) && fs::exists(fit_path)) {
        const auto cams = load_cameras_json(paths.cameras_refined.string());
        const MorphableFaceModel model = pipeline_face_model(cfg);
        const FaceFitParams fit = face_fit_from_json(fit_path.string());

        // Reference facial depth, then depth-guided warps into every other
        // annotated view where the fitted face is front-facing.
        const DepthMap ref_depth = render_face_depth(fit, model, cams[0]);
        DepthMap masked_depth = ref_depth;
        for (int y = 0; y < masked_depth.valid.height(); ++y)
            for (int x = 0; x < masked_depth.valid.width(); ++x)
                if (bundle.face_masks[0].at(x, y) <= 0.5) masked_depth.valid.at(x, y) = 0.0;

        const Vec3 face_dir_world = (fit.rotation * Vec3::UnitZ()).normalized();
        std::vector<ForwardWarpResult> warps(bundle.view_count());
        for (size_t v = 1; v < bundle.view_count(); ++v) {
            bool has_mask = false;
            for (int y = 0; y < bundle.face_masks[v].height() && !has_mask; ++y)
                for (int x = 0; x < bundle.face_masks[v].width() && !has_mask; ++x)
                    if (bundle.face_masks[v].at(x, y) > 0.5) has_mask = true;
            if (!has_mask) continue;
            const Vec3 view_dir = (cams[v].center() - fit.translation).normalized();
            if (view_dir.dot(face_dir_world) < std::cos(80.0 * M_PI / 180.0)) continue;

            const RigidPose rel =
                cams[v].world_to_camera.compose(cams[0].world_to_camera.inverse());
            ForwardWarpResult warp = forward_warp(bundle.images[0], masked_depth,
                                                  cams[0].intrinsics, cams[v].intrinsics, rel);
            // Stay strictly inside the view's face mask so pixels outside it
            // are untouched by construction.
            for (int y = 0; y < warp.coverage.height(); ++y)
                for (int x = 0; x < warp.coverage.width(); ++x)
                    if (bundle.face_masks[v].at(x, y) <= 0.5) warp.coverage.at(x, y) = 0.0;
            char name[32];
            std::snprintf(name, sizeof(name), "warp_%03zu.png", v);
            save_png(warp.image, (paths.face_dir / name).string());
            std::snprintf(name, sizeof(name), "coverage_%03zu.png", v);
            save_mask_png(warp.coverage, (paths.face_dir / name).string());
            warps[v] = std::move(warp);
        }
        refined = inpaint_faces(bundle.images, warps);
    }

    for (size_t i = 0; i < refined.size(); ++i)
        save_png(refined[i], (paths.images_refined / view_png(i)).string());
    touch(paths.marker("face-warp"));
}

void run_reconstruct(const PipelineConfig& cfg, const StagePaths& paths,
                     const ViewBundle& bundle) {
    const auto cams = load_cameras_json(paths.cameras_refined.string());
    ViewBundle refined = bundle;
    refined.nominal_cameras = cams;
    for (size_t i = 0; i < refined.images.size(); ++i) {
        const fs::path p = paths.images_refined / view_png(i);
        if (fs::exists(p)) refined.images[i] = load_png(p.string());
    }

    GaussianScene init(2);
    const fs::path cloud_path = paths.mvs_dir / "pointcloud.ply";
    if (fs::exists(cloud_path)) {
        InitFromPointsConfig init_cfg;
        init = init_from_points(load_point_cloud_ply(cloud_path.string()), init_cfg);
    } else {
        init = seeded_cloud_scene(refined, cfg.init_points, cfg.seed);
    }

    OptimSchedule sched = cfg.recon_schedule;
    sched.seed = mix_seed(cfg.seed, 2);
    RenderConfig rcfg = cfg.render;
    rcfg.threads = cfg.threads;
    if (rcfg.smooth3d_enabled) {
        rcfg.smooth3d_cameras = std::make_shared<const std::vector<Camera>>(cams);
    }
    GaussianScene scene = cfg.stages.reconstruct
                              ? optimize_scene(init, refined, sched, cfg.loss, rcfg)
                              : init;
    save_scene(scene, paths.scene_ply.string());
    touch(paths.marker("reconstruct"));
}

EvalReport run_eval(const PipelineConfig& cfg, const StagePaths& paths,
                    const ViewBundle& bundle) {
    fs::create_directories(paths.renders_dir);
    const auto cams = load_cameras_json(paths.cameras_refined.string());
    const GaussianScene scene = load_scene(paths.scene_ply.string());
    RenderConfig rcfg = cfg.render;
    rcfg.threads = cfg.threads;
    rcfg.background = bundle.background;
    rcfg.random_background = false;
    if (rcfg.smooth3d_enabled)
        rcfg.smooth3d_cameras = std::make_shared<const std::vector<Camera>>(cams);

    // Prefer a held-out evaluation orbit when the bundle ships one.
    std::vector<Camera> eval_cams;
    std::vector<Image> eval_truth;
    const fs::path eval_cam_path = fs::path(cfg.input_dir) / "eval_cameras.json";
    if (fs::exists(eval_cam_path)) {
        eval_cams = load_cameras_json(eval_cam_path.string());
        for (size_t i = 0; i < eval_cams.size(); ++i) {
            const fs::path p = fs::path(cfg.input_dir) / "eval_images" / view_png(i);
            GSREC_CHECK_RUNTIME(fs::exists(p), "missing eval image: ", p.string());
            eval_truth.push_back(load_png(p.string()));
        }
    } else {
        eval_cams = cams;
        eval_truth = bundle.clean_images.empty() ? bundle.images : bundle.clean_images;
    }

    EvalReport report;
    for (size_t i = 0; i < eval_cams.size(); ++i) {
        const RenderOutput out = render(scene, eval_cams[i], rcfg);
        save_png(out.color, (paths.renders_dir / view_png(i)).string());
        report.view_ids.push_back(static_cast<int>(i));
        report.per_view_psnr.push_back(psnr(out.color.clamped01(), eval_truth[i]));
        report.per_view_ssim.push_back(
            ssim(out.color.clamped01(), eval_truth[i], cfg.loss.ssim_window, cfg.loss.ssim_sigma));
    }
    report.mean_psnr = 0.0;
    report.mean_ssim = 0.0;
    for (size_t i = 0; i < report.per_view_psnr.size(); ++i) {
        report.mean_psnr += report.per_view_psnr[i];
        report.mean_ssim += report.per_view_ssim[i];
    }
    if (!report.per_view_psnr.empty()) {
        report.mean_psnr /= static_cast<double>(report.per_view_psnr.size());
        report.mean_ssim /= static_cast<double>(report.per_view_ssim.size());
    }

    if (!bundle.gt_cameras.empty()) {
        for (size_t i = 0; i < cams.size(); ++i) {
            report.pose_rot_err_deg.push_back(
                geodesic_angle(cams[i].world_to_camera.rotation,
                               bundle.gt_cameras[i].world_to_camera.rotation) *
                180.0 / M_PI);
            report.pose_trans_err.push_back(
                (cams[i].center() - bundle.gt_cameras[i].center()).norm());
        }
    }
    return report;
}

}  // namespace

void save_report(const EvalReport& report, const std::string& json_path,
                 const std::string& csv_path, const std::string& timings_path) {
    json j;
    j["mean_psnr"] = report.mean_psnr;
    j["mean_ssim"] = report.mean_ssim;
    j["per_view"] = json::array();
    for (size_t i = 0; i < report.view_ids.size(); ++i) {
        j["per_view"].push_back({{"view", report.view_ids[i]},
                                 {"psnr", report.per_view_psnr[i]},
                                 {"ssim", report.per_view_ssim[i]}});
    }
    if (!report.pose_rot_err_deg.empty()) {
        j["pose_errors"] = json::array();
        for (size_t i = 0; i < report.pose_rot_err_deg.size(); ++i)
            j["pose_errors"].push_back(
                {{"view", i},
                 {"rot_err_deg", report.pose_rot_err_deg[i]},
                 {"trans_err", report.pose_trans_err[i]}});
    }
    // LPIPS and CLIP similarity columns are deliberately absent: both need
    // pretrained networks, which this artifact does not ship.
    if (!report.failed_stage.empty()) {
        j["failed_stage"] = report.failed_stage;
        j["error"] = report.error;
    }
    std::ofstream out(json_path);
    GSREC_CHECK_RUNTIME(out.good(), "cannot write report: ", json_path);
    out << j.dump(2) << "\n";

    std::ofstream csv(csv_path);
    GSREC_CHECK_RUNTIME(csv.good(), "cannot write report csv: ", csv_path);
    csv << "view,psnr,ssim,rot_err_deg,trans_err\n";
    for (size_t i = 0; i < report.view_ids.size(); ++i) {
        csv << report.view_ids[i] << "," << report.per_view_psnr[i] << ","
            << report.per_view_ssim[i] << ",";
        if (i < report.pose_rot_err_deg.size())
            csv << report.pose_rot_err_deg[i] << "," << report.pose_trans_err[i];
        else
            csv << ",";
        csv << "\n";
    }

    json t;
    for (const auto& [stage, seconds] : report.stage_seconds) t[stage] = seconds;
    std::ofstream tout(timings_path);
    tout << t.dump(2) << "\n";
}

EvalReport load_report(const std::string& json_path) {
    std::ifstream in(json_path);
    GSREC_CHECK_RUNTIME(in.good(), "cannot open report: ", json_path);
    json j = json::parse(in);
    EvalReport report;
    report.mean_psnr = j.value("mean_psnr", 0.0);
    report.mean_ssim = j.value("mean_ssim", 0.0);
    for (const auto& row : j.value("per_view", json::array())) {
        report.view_ids.push_back(row.at("view").get<int>());
        report.per_view_psnr.push_back(row.at("psnr").get<double>());
        report.per_view_ssim.push_back(row.at("ssim").get<double>());
    }
    for (const auto& row : j.value("pose_errors", json::array())) {
        report.pose_rot_err_deg.push_back(row.at("rot_err_deg").get<double>());
        report.pose_trans_err.push_back(row.at("trans_err").get<double>());
    }
    report.failed_stage = j.value("failed_stage", std::string{});
    report.error = j.value("error", std::string{});
    return report;
}

EvalReport run_pipeline(const PipelineConfig& cfg) {
    cfg.validate();
    set_default_thread_count(cfg.threads);
    const StagePaths paths(cfg.output_dir);
    fs::create_directories(paths.out);

    EvalReport report;
    std::string current_stage;
    try {
        current_stage = "load";
        const ViewBundle bundle = load_bundle(cfg.input_dir);

        struct Stage {
            const char* name;
            std::function<void()> fn;
            std::function<bool()> done;
        };
        const std::vector<Stage> stages = {
            {"align", [&] { run_align(cfg, paths, bundle); },
             [&] { return fs::exists(paths.marker("align")) && fs::exists(paths.cameras_refined); }},
            {"mvs-init", [&] { run_mvs(cfg, paths, bundle); },
             [&] {
                 return fs::exists(paths.marker("mvs-init")) &&
                        fs::exists(paths.mvs_dir / "pointcloud.ply");
             }},
            {"face-fit", [&] { run_face_fit(cfg, paths, bundle); },
             [&] { return fs::exists(paths.marker("face-fit")); }},
            {"face-warp", [&] { run_face_warp(cfg, paths, bundle); },
             [&] { return fs::exists(paths.marker("face-warp")); }},
            {"reconstruct", [&] { run_reconstruct(cfg, paths, bundle); },
             [&] { return fs::exists(paths.marker("reconstruct")) && fs::exists(paths.scene_ply); }},
        };
        for (const auto& stage : stages) {
            current_stage = stage.name;
            if (stage.done()) continue;  // resumable: finished stages replay for free
            const auto t0 = std::chrono::steady_clock::now();
            stage.fn();
            report.stage_seconds.emplace_back(stage.name, stage_seconds(t0));
        }

        current_stage = "eval";
        const auto t0 = std::chrono::steady_clock::now();
        EvalReport eval = run_eval(cfg, paths, bundle);
        eval.stage_seconds = report.stage_seconds;
        eval.stage_seconds.emplace_back("eval", stage_seconds(t0));
        report = std::move(eval);
    } catch (const std::exception& e) {
        report.failed_stage = current_stage;
        report.error = e.what();
    }

    save_report(report, paths.report_json.string(), paths.report_csv.string(),
                paths.timings_json.string());
    return report;
}

void run_pipeline_stage(const PipelineConfig& cfg, const std::string& stage) {
    cfg.validate();
    set_default_thread_count(cfg.threads);
    const StagePaths paths(cfg.output_dir);
    fs::create_directories(paths.out);
    const ViewBundle bundle = load_bundle(cfg.input_dir);

    if (stage == "align") {
        run_align(cfg, paths, bundle);
    } else if (stage == "mvs-init") {
        run_mvs(cfg, paths, bundle);
    } else if (stage == "face-fit") {
        run_face_fit(cfg, paths, bundle);
    } else if (stage == "face-warp") {
        run_face_warp(cfg, paths, bundle);
    } else if (stage == "reconstruct") {
        run_reconstruct(cfg, paths, bundle);
    } else if (stage == "render" || stage == "eval") {
        EvalReport report = run_eval(cfg, paths, bundle);
        save_report(report, paths.report_json.string(), paths.report_csv.string(),
                    paths.timings_json.string());
    } else {
        GSREC_CHECK_ARG(false, "unknown stage '", stage,
                        "'; expected align|mvs-init|face-fit|face-warp|reconstruct|render|eval");
    }
}

}  // namespace gsrec
