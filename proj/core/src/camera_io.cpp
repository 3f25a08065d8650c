#include "gsrec/camera_io.hpp"

#include <fstream>

#include "json.hpp"

namespace gsrec {

namespace {

using json = nlohmann::ordered_json;

json camera_to_json(const Camera& cam) {
    json j;
    j["intrinsics"] = {{"fx", cam.intrinsics.fx},   {"fy", cam.intrinsics.fy},
                       {"cx", cam.intrinsics.cx},   {"cy", cam.intrinsics.cy},
                       {"width", cam.intrinsics.width}, {"height", cam.intrinsics.height}};
    std::vector<double> rot(9);
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) rot[r * 3 + c] = cam.world_to_camera.rotation(r, c);
    j["world_to_camera"] = {
        {"rotation", rot},
        {"translation",
         {cam.world_to_camera.translation.x(), cam.world_to_camera.translation.y(),
          cam.world_to_camera.translation.z()}}};
    if (cam.orbit) {
        j["orbit"] = {{"az", cam.orbit->azimuth},
                      {"el", cam.orbit->elevation},
                      {"radius", cam.orbit->radius},
                      {"target", {cam.orbit->target.x(), cam.orbit->target.y(),
                                  cam.orbit->target.z()}}};
    }
    return j;
}

Camera camera_from_json(const json& j) {
    Camera cam;
    const auto& intr = j.at("intrinsics");
    cam.intrinsics.fx = intr.at("fx").get<double>();
    cam.intrinsics.fy = intr.at("fy").get<double>();
    cam.intrinsics.cx = intr.at("cx").get<double>();
    cam.intrinsics.cy = intr.at("cy").get<double>();
    cam.intrinsics.width = intr.at("width").get<int>();
    cam.intrinsics.height = intr.at("height").get<int>();

    const auto& w2c = j.at("world_to_camera");
    const auto rot = w2c.at("rotation").get<std::vector<double>>();
    GSREC_CHECK_RUNTIME(rot.size() == 9, "camera rotation must have 9 entries, got ",
                        rot.size());
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) cam.world_to_camera.rotation(r, c) = rot[r * 3 + c];
    const auto trans = w2c.at("translation").get<std::vector<double>>();
    GSREC_CHECK_RUNTIME(trans.size() == 3, "camera translation must have 3 entries");
    cam.world_to_camera.translation = Vec3(trans[0], trans[1], trans[2]);

    if (j.contains("orbit")) {
        OrbitPose orbit;
        const auto& o = j.at("orbit");
        orbit.azimuth = o.at("az").get<double>();
        orbit.elevation = o.at("el").get<double>();
        orbit.radius = o.at("radius").get<double>();
        const auto tgt = o.at("target").get<std::vector<double>>();
        GSREC_CHECK_RUNTIME(tgt.size() == 3, "orbit target must have 3 entries");
        orbit.target = Vec3(tgt[0], tgt[1], tgt[2]);
        cam.orbit = orbit;
    }
    cam.validate();
    return cam;
}

}  // namespace

std::string camera_to_json_string(const Camera& cam) { return camera_to_json(cam).dump(2); }

Camera camera_from_json_string(const std::string& json_text) {
    return camera_from_json(json::parse(json_text));
}

void save_cameras_json(const std::vector<Camera>& cams, const std::string& path) {
    json j;
    j["cameras"] = json::array();
    for (const auto& cam : cams) j["cameras"].push_back(camera_to_json(cam));
    std::ofstream out(path);
    GSREC_CHECK_RUNTIME(out.good(), "cannot open for writing: ", path);
    out << j.dump(2) << "\n";
}

std::vector<Camera> load_cameras_json(const std::string& path) {
    std::ifstream in(path);
    GSREC_CHECK_RUNTIME(in.good(), "cannot open cameras file: ", path);
    json j = json::parse(in);
    std::vector<Camera> cams;
    for (const auto& entry : j.at("cameras")) cams.push_back(camera_from_json(entry));
    return cams;
}

}  // namespace gsrec
