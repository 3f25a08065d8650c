#pragma once

#include <string>
#include <vector>

#include "gsrec/geometry.hpp"
#include "gsrec/image.hpp"

namespace gsrec {

/// The contract between pipeline stages: images plus nominal cameras, with
/// optional ground truth and face annotations. Index 0 is the reference view.
struct ViewBundle {
    std::vector<Image> images;
    std::vector<Camera> nominal_cameras;
    std::vector<Camera> gt_cameras;      // empty when ground truth is unknown
    std::vector<Image> face_masks;       // empty, or one 1-channel mask per view
    std::vector<std::vector<Vec2>> landmarks;  // empty, or per view (possibly empty per view)
    std::vector<Image> clean_images;     // pre-distortion copies kept for scoring
    std::vector<Image> subject_alphas;   // continuous [0,1] coverage; lets targets
                                         // recomposite exactly onto any background
    Vec3 background = Vec3::Ones();
    uint64_t seed = 0;
    std::string spec_hash;

    size_t view_count() const { return images.size(); }

    void validate() const {
        GSREC_CHECK_ARG(!images.empty(), "bundle has no views");
        GSREC_CHECK_ARG(nominal_cameras.size() == images.size(), "bundle has ",
                        images.size(), " images but ", nominal_cameras.size(),
                        " nominal cameras");
        GSREC_CHECK_ARG(gt_cameras.empty() || gt_cameras.size() == images.size(),
                        "ground-truth camera count mismatch");
        GSREC_CHECK_ARG(face_masks.empty() || face_masks.size() == images.size(),
                        "face mask count mismatch");
        GSREC_CHECK_ARG(landmarks.empty() || landmarks.size() == images.size(),
                        "landmark list count mismatch");
        GSREC_CHECK_ARG(clean_images.empty() || clean_images.size() == images.size(),
                        "clean image count mismatch");
        GSREC_CHECK_ARG(subject_alphas.empty() || subject_alphas.size() == images.size(),
                        "subject alpha count mismatch");
    }
};

/// Directory layout: images/%03d.png, cameras_nominal.json, cameras_gt.json,
/// face_masks/%03d.png, landmarks.json, meta.json, clean_images/%03d.png.
/// Optional pieces are simply absent.
void save_bundle(const ViewBundle& bundle, const std::string& dir);
ViewBundle load_bundle(const std::string& dir);

}  // namespace gsrec
