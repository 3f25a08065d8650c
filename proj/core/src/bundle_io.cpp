#include <filesystem>
#include <fstream>

#include "gsrec/camera_io.hpp"
#include "gsrec/image_io.hpp"
#include "gsrec/view_bundle.hpp"
#include "json.hpp"

namespace gsrec {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

std::string view_name(size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%03zu.png", i);
    return buf;
}

}  // namespace

void save_bundle(const ViewBundle& bundle, const std::string& dir) {
    bundle.validate();
    fs::create_directories(fs::path(dir) / "images");
    for (size_t i = 0; i < bundle.images.size(); ++i)
        save_png(bundle.images[i], (fs::path(dir) / "images" / view_name(i)).string());

    save_cameras_json(bundle.nominal_cameras, (fs::path(dir) / "cameras_nominal.json").string());
    if (!bundle.gt_cameras.empty())
        save_cameras_json(bundle.gt_cameras, (fs::path(dir) / "cameras_gt.json").string());

    if (!bundle.face_masks.empty()) {
        fs::create_directories(fs::path(dir) / "face_masks");
        for (size_t i = 0; i < bundle.face_masks.size(); ++i)
            save_mask_png(bundle.face_masks[i],
                          (fs::path(dir) / "face_masks" / view_name(i)).string());
    }

    if (!bundle.landmarks.empty()) {
        json j = json::array();
        for (size_t i = 0; i < bundle.landmarks.size(); ++i) {
            json pts = json::array();
            for (const auto& p : bundle.landmarks[i]) pts.push_back({p.x(), p.y()});
            j.push_back({{"view", i}, {"points", pts}});
        }
        std::ofstream out(fs::path(dir) / "landmarks.json");
        out << j.dump(2) << "\n";
    }

    if (!bundle.clean_images.empty()) {
        fs::create_directories(fs::path(dir) / "clean_images");
        for (size_t i = 0; i < bundle.clean_images.size(); ++i)
            save_png(bundle.clean_images[i],
                     (fs::path(dir) / "clean_images" / view_name(i)).string());
    }

    if (!bundle.subject_alphas.empty()) {
        fs::create_directories(fs::path(dir) / "alpha");
        for (size_t i = 0; i < bundle.subject_alphas.size(); ++i)
            save_png_gray16(bundle.subject_alphas[i],
                            (fs::path(dir) / "alpha" / view_name(i)).string());
    }

    json meta;
    meta["seed"] = bundle.seed;
    meta["spec_hash"] = bundle.spec_hash;
    meta["background"] = {bundle.background.x(), bundle.background.y(), bundle.background.z()};
    meta["views"] = bundle.images.size();
    meta["width"] = bundle.images.front().width();
    meta["height"] = bundle.images.front().height();
    std::ofstream out(fs::path(dir) / "meta.json");
    out << meta.dump(2) << "\n";
}

ViewBundle load_bundle(const std::string& dir) {
    GSREC_CHECK_RUNTIME(fs::exists(fs::path(dir) / "cameras_nominal.json"),
                        "missing cameras file: ", (fs::path(dir) / "cameras_nominal.json").string());
    ViewBundle bundle;
    bundle.nominal_cameras = load_cameras_json((fs::path(dir) / "cameras_nominal.json").string());
    const size_t n = bundle.nominal_cameras.size();

    for (size_t i = 0; i < n; ++i) {
        const fs::path p = fs::path(dir) / "images" / view_name(i);
        GSREC_CHECK_RUNTIME(fs::exists(p), "missing image: ", p.string());
        bundle.images.push_back(load_png(p.string()));
    }

    if (fs::exists(fs::path(dir) / "cameras_gt.json"))
        bundle.gt_cameras = load_cameras_json((fs::path(dir) / "cameras_gt.json").string());

    if (fs::exists(fs::path(dir) / "face_masks")) {
        for (size_t i = 0; i < n; ++i) {
            const fs::path p = fs::path(dir) / "face_masks" / view_name(i);
            GSREC_CHECK_RUNTIME(fs::exists(p), "missing face mask: ", p.string());
            bundle.face_masks.push_back(load_mask_png(p.string()));
        }
    }

    if (fs::exists(fs::path(dir) / "landmarks.json")) {
        std::ifstream in(fs::path(dir) / "landmarks.json");
        json j = json::parse(in);
        bundle.landmarks.assign(n, {});
        for (const auto& entry : j) {
            const size_t view = entry.at("view").get<size_t>();
            GSREC_CHECK_RUNTIME(view < n, "landmarks.json names view ", view,
                                " outside the bundle");
            for (const auto& p : entry.at("points"))
                bundle.landmarks[view].emplace_back(p.at(0).get<double>(),
                                                    p.at(1).get<double>());
        }
    }

    if (fs::exists(fs::path(dir) / "clean_images")) {
        for (size_t i = 0; i < n; ++i) {
            const fs::path p = fs::path(dir) / "clean_images" / view_name(i);
            GSREC_CHECK_RUNTIME(fs::exists(p), "missing clean image: ", p.string());
            bundle.clean_images.push_back(load_png(p.string()));
        }
    }

    if (fs::exists(fs::path(dir) / "alpha")) {
        for (size_t i = 0; i < n; ++i) {
            const fs::path p = fs::path(dir) / "alpha" / view_name(i);
            GSREC_CHECK_RUNTIME(fs::exists(p), "missing alpha image: ", p.string());
            bundle.subject_alphas.push_back(load_png(p.string()));
        }
    }

    if (fs::exists(fs::path(dir) / "meta.json")) {
        std::ifstream in(fs::path(dir) / "meta.json");
        json meta = json::parse(in);
        bundle.seed = meta.value("seed", uint64_t{0});
        bundle.spec_hash = meta.value("spec_hash", std::string{});
        if (meta.contains("background")) {
            const auto bg = meta["background"].get<std::vector<double>>();
            GSREC_CHECK_RUNTIME(bg.size() == 3, "meta.json background needs 3 channels");
            bundle.background = Vec3(bg[0], bg[1], bg[2]);
        }
    }

    bundle.validate();
    return bundle;
}

}  // namespace gsrec
