#pragma once

#include <vector>

#include "gsrec/gaussians.hpp"
#include "gsrec/loss.hpp"
#include "gsrec/rasterizer.hpp"
#include "gsrec/view_bundle.hpp"

namespace gsrec {

struct OptimSchedule {
    int total_steps = 1000;

    // Adam learning rates per parameter group.
    double lr_means = 1.6e-4;   // multiplied by scene extent, exp-decays to *means_lr_decay
    double lr_rotations = 1e-3;
    double lr_scales = 5e-3;
    double lr_opacities = 5e-2;
    double lr_sh = 2.5e-3;      // non-DC coefficients run at lr_sh / 20
    double lr_pose = 1e-3;      // per-view twist rate during alignment
    double pose_lr_decay = 1e-2;   // log-linear to lr_pose * pose_lr_decay
    double means_lr_decay = 1e-2;

    bool densify_enabled = true;
    int densify_interval = 100;
    int densify_start = 100;
    int densify_until = -1;  // -1: three quarters of total_steps
    double densify_grad_threshold = 0.05;  // mean |dL/d(mean2d)| in pixels
    double densify_size_fraction = 0.01;   // clone below, split above (times extent)
    double prune_opacity_threshold = 0.005;
    bool opacity_reset_enabled = false;
    int opacity_reset_interval = 1500;
    double opacity_reset_value = 0.01;
    int sh_unlock_interval = 500;  // active degree grows by one per interval
    int max_gaussians = 200000;

    bool random_background = true;  // fresh uniform color per step, seeded
    uint64_t seed = 0;

    // Alignment-only: photometric pose gradients only see about a pixel of
    // structure, so the joint phase anneals a blur (extra screen-space
    // variance on the render, matched Gaussian blur on the target) from
    // align_coarse_blur px^2 down to zero over the first align_coarse_fraction
    // of the steps. This widens the pose attraction basin well past the
    // initial misalignment.
    double align_coarse_blur = 12.0;
    double align_coarse_fraction = 0.6;

    // Alignment-only: after the joint phase, alternate per-view Gauss-Newton
    // pose polish (scene frozen) with short scene refreshes. First-order
    // steps stall in the pan/translation compensated valley; the normal
    // equations couple those coordinates and finish the job.
    int pose_polish_rounds = 2;
    int pose_polish_iterations = 12;
    int pose_polish_refresh_steps = 150;

    void validate() const {
        GSREC_CHECK_ARG(total_steps >= 0, "negative step count");
        for (double lr : {lr_means, lr_rotations, lr_scales, lr_opacities, lr_sh, lr_pose})
            GSREC_CHECK_ARG(lr > 0.0, "learning rates must be positive");
        GSREC_CHECK_ARG(densify_interval >= 1 && opacity_reset_interval >= 1 &&
                            sh_unlock_interval >= 1,
                        "intervals must be >= 1");
        GSREC_CHECK_ARG(pose_lr_decay > 0.0 && means_lr_decay > 0.0, "decays must be positive");
    }
};

struct TraceRow {
    int step = 0;
    double loss = 0.0;
    int view_id = 0;
    double rot_err_deg = 0.0;  // correction vs the nominal pose so far
    double trans_err = 0.0;
};

void save_trace_csv(const std::vector<TraceRow>& trace, const std::string& path);

struct PoseCorrection {
    double rotation_deg = 0.0;
    double translation = 0.0;
};

struct AlignmentResult {
    std::vector<Camera> refined_cameras;
    GaussianScene scene;
    std::vector<PoseCorrection> corrections;  // refined vs nominal per view
    std::vector<TraceRow> trace;
};

/// Adaptive-moment scene optimization over shuffled views with densify/prune
/// and a per-step random background (floater suppression). Poses stay fixed.
/// Aborts with a diagnostic naming the step if the loss turns non-finite.
GaussianScene optimize_scene(const GaussianScene& scene, const ViewBundle& views,
                             const OptimSchedule& schedule, const LossConfig& loss_cfg,
                             const RenderConfig& render_cfg,
                             std::vector<TraceRow>* trace = nullptr);

/// Joint optimization of the scene and per-view pose twists. The reference
/// view (index 0) anchors the gauge and is never touched; adaptive density
/// control stays off in this phase.
AlignmentResult align_cameras(const GaussianScene& scene_init, const ViewBundle& views,
                              const OptimSchedule& schedule, const LossConfig& loss_cfg,
                              const RenderConfig& render_cfg);

}  // namespace gsrec
