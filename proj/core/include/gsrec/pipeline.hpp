#pragma once

#include <map>
#include <string>
#include <vector>

#include "gsrec/face.hpp"
#include "gsrec/loss.hpp"
#include "gsrec/mvs.hpp"
#include "gsrec/optimizer.hpp"
#include "gsrec/rasterizer.hpp"
#include "gsrec/view_bundle.hpp"

namespace gsrec {

struct StageToggles {
    bool align = true;
    bool mvs_init = true;
    bool face_fix = true;
    bool reconstruct = true;
};

struct PipelineConfig {
    std::string input_dir;
    std::string output_dir;
    uint64_t seed = 1;
    int threads = 1;
    StageToggles stages;

    OptimSchedule align_schedule;
    OptimSchedule recon_schedule;
    LossConfig loss;
    SweepConfig sweep;
    bool sweep_auto_range = true;  // derive the depth range from the camera rig
    int mvs_num_sources = 2;
    int fuse_stride = 2;
    double fuse_voxel = 0.015;
    FaceFitConfig face_fit;
    std::string face_model_path;  // empty: built-in stand-in model
    RenderConfig render;
    int init_points = 3000;  // seeded fallback cloud when MVS is disabled or empty

    void validate() const {
        GSREC_CHECK_ARG(!input_dir.empty() && !output_dir.empty(),
                        "input and output directories are required");
        GSREC_CHECK_ARG(!stages.face_fix || stages.align,
                        "face-fix requires the align stage");
        GSREC_CHECK_ARG(threads >= 1, "threads must be >= 1");
    }
};

PipelineConfig default_pipeline_config();
PipelineConfig pipeline_config_from_json(const std::string& path);
void save_pipeline_config(const PipelineConfig& cfg, const std::string& path);

struct EvalReport {
    std::vector<int> view_ids;
    std::vector<double> per_view_psnr;
    std::vector<double> per_view_ssim;
    double mean_psnr = 0.0;
    double mean_ssim = 0.0;
    std::vector<double> pose_rot_err_deg;  // vs ground truth, when available
    std::vector<double> pose_trans_err;
    std::vector<std::pair<std::string, double>> stage_seconds;
    std::string failed_stage;  // empty on success
    std::string error;
};

/// Executes align -> mvs-init -> face-fix -> reconstruct -> render/eval with
/// every intermediate persisted under output_dir. Stages whose outputs exist
/// are skipped, so finished runs replay for free and crashed runs resume.
/// Stage failures produce a report naming the stage; partial outputs stay.
EvalReport run_pipeline(const PipelineConfig& cfg);

/// Individual stages, each reading its inputs from disk. `stage` is one of
/// align | mvs-init | face-fit | face-warp | reconstruct | render | eval.
void run_pipeline_stage(const PipelineConfig& cfg, const std::string& stage);

/// report.json + report.csv; wall-clock timings go to timings.json so the
/// metric outputs stay byte-reproducible.
void save_report(const EvalReport& report, const std::string& json_path,
                 const std::string& csv_path, const std::string& timings_path);
EvalReport load_report(const std::string& json_path);

}  // namespace gsrec
