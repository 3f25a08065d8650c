#pragma once

#include <string>
#include <vector>

#include "gsrec/geometry.hpp"

namespace gsrec {

/// Camera JSON layout:
///   { "intrinsics": {fx,fy,cx,cy,width,height},
///     "world_to_camera": {"rotation": [9 row-major], "translation": [3]},
///     "orbit": {az, el, radius, target} }   // only for orbit cameras
std::string camera_to_json_string(const Camera& cam);
Camera camera_from_json_string(const std::string& json_text);

void save_cameras_json(const std::vector<Camera>& cams, const std::string& path);
std::vector<Camera> load_cameras_json(const std::string& path);

}  // namespace gsrec
