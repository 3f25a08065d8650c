#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

#include "gsrec/gaussians.hpp"

namespace gsrec {

namespace {

int degree_from_rest_count(int rest_per_channel) {
    for (int deg = 0; deg <= kMaxShDegree; ++deg) {
        if (sh_coeff_count(deg) - 1 == rest_per_channel) return deg;
    }
    return -1;
}

}  // namespace

void save_scene(const GaussianScene& scene, const std::string& path) {
    scene.validate();
    const int coeffs = scene.sh_coeffs_per_channel();
    const int rest = coeffs - 1;

    std::ofstream out(path, std::ios::binary);
    GSREC_CHECK_RUNTIME(out.good(), "cannot open PLY for writing: ", path);

    std::ostringstream header;
    header << "ply\nformat binary_little_endian 1.0\n";
    header << "element vertex " << scene.size() << "\n";
    const char* axes[] = {"x", "y", "z", "nx", "ny", "nz"};
    for (const char* a : axes) header << "property float " << a << "\n";
    for (int c = 0; c < 3; ++c) header << "property float f_dc_" << c << "\n";
    for (int i = 0; i < 3 * rest; ++i) header << "property float f_rest_" << i << "\n";
    header << "property float opacity\n";
    for (int i = 0; i < 3; ++i) header << "property float scale_" << i << "\n";
    for (int i = 0; i < 4; ++i) header << "property float rot_" << i << "\n";
    header << "end_header\n";
    out << header.str();

    std::vector<float> row(6 + 3 + 3 * rest + 1 + 3 + 4);
    for (const auto& g : scene.gaussians()) {
        size_t i = 0;
        for (int a = 0; a < 3; ++a) row[i++] = static_cast<float>(g.mean[a]);
        for (int a = 0; a < 3; ++a) row[i++] = 0.0f;  // normals, kept for viewer compatibility
        for (int c = 0; c < 3; ++c) row[i++] = static_cast<float>(g.sh[c * coeffs]);
        for (int c = 0; c < 3; ++c)
            for (int k = 1; k < coeffs; ++k) row[i++] = static_cast<float>(g.sh[c * coeffs + k]);
        row[i++] = static_cast<float>(g.opacity_logit);
        for (int a = 0; a < 3; ++a) row[i++] = static_cast<float>(g.log_scale[a]);
        for (int a = 0; a < 4; ++a) row[i++] = static_cast<float>(g.rotation[a]);
        out.write(reinterpret_cast<const char*>(row.data()),
                  static_cast<std::streamsize>(row.size() * sizeof(float)));
    }
    GSREC_CHECK_RUNTIME(out.good(), "short write to ", path);
}

GaussianScene load_scene(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    GSREC_CHECK_RUNTIME(in.good(), "cannot open PLY: ", path);

    std::string line;
    GSREC_CHECK_RUNTIME(std::getline(in, line) && line == "ply", path, ": not a PLY file");
    GSREC_CHECK_RUNTIME(std::getline(in, line) && line == "format binary_little_endian 1.0",
                        path, ": unsupported PLY format line '", line, "'");

    size_t vertex_count = 0;
    std::vector<std::string> properties;
    while (std::getline(in, line)) {
        if (line == "end_header") break;
        std::istringstream ls(line);
        std::string tok;
        ls >> tok;
        if (tok == "comment") continue;
        if (tok == "element") {
            std::string name;
            ls >> name >> vertex_count;
            GSREC_CHECK_RUNTIME(name == "vertex", path, ": unexpected element '", name, "'");
        } else if (tok == "property") {
            std::string type, name;
            ls >> type >> name;
            GSREC_CHECK_RUNTIME(type == "float", path, ": property ", name,
                                " has unsupported type ", type);
            properties.push_back(name);
        }
    }
    GSREC_CHECK_RUNTIME(vertex_count > 0, path, ": empty vertex element");

    auto index_of = [&](const std::string& name) {
        for (size_t i = 0; i < properties.size(); ++i)
            if (properties[i] == name) return static_cast<int>(i);
        GSREC_CHECK_RUNTIME(false, path, ": missing property '", name, "'");
        return -1;
    };

    const int ix = index_of("x"), iy = index_of("y"), iz = index_of("z");
    const int idc[3] = {index_of("f_dc_0"), index_of("f_dc_1"), index_of("f_dc_2")};
    const int iop = index_of("opacity");
    const int isc[3] = {index_of("scale_0"), index_of("scale_1"), index_of("scale_2")};
    const int irot[4] = {index_of("rot_0"), index_of("rot_1"), index_of("rot_2"),
                         index_of("rot_3")};

    int rest_per_channel = 0;
    while (true) {
        std::string name = "f_rest_" + std::to_string(rest_per_channel * 3);
        bool found = false;
        for (const auto& p : properties)
            if (p == name) found = true;
        if (!found) break;
        ++rest_per_channel;
    }
    int total_rest = 0;
    for (const auto& p : properties)
        if (p.rfind("f_rest_", 0) == 0) ++total_rest;
    GSREC_CHECK_RUNTIME(total_rest % 3 == 0, path, ": f_rest count ", total_rest,
                        " not divisible by 3");
    rest_per_channel = total_rest / 3;
    const int degree = degree_from_rest_count(rest_per_channel);
    GSREC_CHECK_RUNTIME(degree >= 0, path, ": f_rest count ", total_rest,
                        " does not match a supported sh degree");
    std::vector<int> irest(total_rest);
    for (int i = 0; i < total_rest; ++i) irest[i] = index_of("f_rest_" + std::to_string(i));

    const int coeffs = sh_coeff_count(degree);
    GaussianScene scene(degree);
    std::vector<float> row(properties.size());
    for (size_t v = 0; v < vertex_count; ++v) {
        in.read(reinterpret_cast<char*>(row.data()),
                static_cast<std::streamsize>(row.size() * sizeof(float)));
        GSREC_CHECK_RUNTIME(in.gcount() ==
                                static_cast<std::streamsize>(row.size() * sizeof(float)),
                            path, ": truncated vertex data at vertex ", v);
        Gaussian3D g;
        g.mean = Vec3(row[ix], row[iy], row[iz]);
        g.sh.assign(static_cast<size_t>(3) * coeffs, 0.0);
        for (int c = 0; c < 3; ++c) g.sh[static_cast<size_t>(c) * coeffs] = row[idc[c]];
        for (int c = 0; c < 3; ++c)
            for (int k = 1; k < coeffs; ++k)
                g.sh[static_cast<size_t>(c) * coeffs + k] = row[irest[c * (coeffs - 1) + k - 1]];
        g.opacity_logit = row[iop];
        for (int a = 0; a < 3; ++a) g.log_scale[a] = row[isc[a]];
        for (int a = 0; a < 4; ++a) g.rotation[a] = row[irot[a]];
        const double qn = g.rotation.norm();
        GSREC_CHECK_RUNTIME(qn > 1e-12, path, ": vertex ", v, " field rot has zero norm");
        g.rotation /= qn;
        scene.add(std::move(g));
    }
    scene.validate();
    return scene;
}

}  // namespace gsrec
