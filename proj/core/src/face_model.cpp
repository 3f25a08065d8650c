#include <cmath>
#include <fstream>

#include "gsrec/face.hpp"
#include "gsrec/rng.hpp"
#include "json.hpp"

namespace gsrec {

Eigen::MatrixXd MorphableFaceModel::vertices_for(const Eigen::VectorXd& coeffs) const {
    GSREC_CHECK_ARG(coeffs.size() == basis_count(), "expected ", basis_count(),
                    " coefficients, got ", coeffs.size());
    Eigen::MatrixXd v = mean_vertices;
    for (int b = 0; b < basis_count(); ++b) v += coeffs[b] * mode_sigmas[b] * shape_basis[b];
    return v;
}

void MorphableFaceModel::validate() const {
    const int v = vertex_count();
    GSREC_CHECK_ARG(v >= 3, "model needs vertices");
    GSREC_CHECK_ARG(triangles.cols() == 3, "triangles must have 3 indices");
    GSREC_CHECK_ARG(triangles.minCoeff() >= 0 && triangles.maxCoeff() < v,
                    "triangle indices out of range");
    GSREC_CHECK_ARG(landmark_count() >= 6, "need >= 6 landmarks for pose observability, got ",
                    landmark_count());
    for (int lm : landmark_indices)
        GSREC_CHECK_ARG(lm >= 0 && lm < v, "landmark index out of range: ", lm);
    GSREC_CHECK_ARG(albedo.size() == v, "albedo size mismatch");
    GSREC_CHECK_ARG(mode_sigmas.size() == basis_count(), "mode sigma count mismatch");
    // Orthonormal modes in the stacked-vertex metric.
    for (int a = 0; a < basis_count(); ++a) {
        for (int b = a; b < basis_count(); ++b) {
            const double dot =
                (shape_basis[a].array() * shape_basis[b].array()).sum();
            const double want = a == b ? 1.0 : 0.0;
            GSREC_CHECK_ARG(std::abs(dot - want) < 1e-8, "basis modes ", a, " and ", b,
                            " not orthonormal, dot=", dot);
        }
    }
}

namespace {

double blob(const Vec3& dir, const Vec3& center, double width) {
    return std::exp(-(dir - center).squaredNorm() / (width * width));
}

}  // namespace

MorphableFaceModel make_standin_face_model(uint64_t seed) {
    // Lat-long ellipsoid, face toward +z. Radii roughly head-like.
    const int rings = 31, segments = 64;
    const Vec3 radii(0.085, 0.115, 0.10);

    MorphableFaceModel model;
    const int v_count = rings * segments + 2;
    model.mean_vertices.resize(v_count, 3);
    std::vector<Vec3> unit_dirs(v_count);

    int vi = 0;
    unit_dirs[vi] = Vec3(0, 1, 0);  // top pole
    model.mean_vertices.row(vi++) = Vec3(0, radii.y(), 0).transpose();
    for (int r = 0; r < rings; ++r) {
        const double lat = M_PI * (r + 1.0) / (rings + 1.0);  // from +y pole
        for (int s = 0; s < segments; ++s) {
            const double lon = 2.0 * M_PI * s / segments;
            const Vec3 dir(std::sin(lat) * std::sin(lon), std::cos(lat),
                           std::sin(lat) * std::cos(lon));
            unit_dirs[vi] = dir;
            model.mean_vertices.row(vi++) = dir.cwiseProduct(radii).transpose();
        }
    }
    unit_dirs[vi] = Vec3(0, -1, 0);  // bottom pole
    model.mean_vertices.row(vi++) = Vec3(0, -radii.y(), 0).transpose();

    std::vector<Eigen::Vector3i> tris;
    auto ring_vertex = [&](int r, int s) { return 1 + r * segments + (s % segments); };
    for (int s = 0; s < segments; ++s) {
        tris.emplace_back(0, ring_vertex(0, s), ring_vertex(0, s + 1));
        tris.emplace_back(v_count - 1, ring_vertex(rings - 1, s + 1), ring_vertex(rings - 1, s));
    }
    for (int r = 0; r + 1 < rings; ++r) {
        for (int s = 0; s < segments; ++s) {
            const int a = ring_vertex(r, s), b = ring_vertex(r, s + 1);
            const int c = ring_vertex(r + 1, s), d = ring_vertex(r + 1, s + 1);
            tris.emplace_back(a, c, b);
            tris.emplace_back(b, c, d);
        }
    }
    model.triangles.resize(static_cast<int>(tris.size()), 3);
    for (size_t t = 0; t < tris.size(); ++t) model.triangles.row(static_cast<int>(t)) = tris[t];

    // Facial albedo: eyes, brows, mouth and nose shading over a light base,
    // plus a touch of seeded low-frequency texture so photometric terms have
    // gradients everywhere.
    Rng rng(seed);
    const Vec3 eye_l = Vec3(-0.38, 0.22, 0.90).normalized();
    const Vec3 eye_r = Vec3(0.38, 0.22, 0.90).normalized();
    const Vec3 brow_l = Vec3(-0.40, 0.45, 0.85).normalized();
    const Vec3 brow_r = Vec3(0.40, 0.45, 0.85).normalized();
    const Vec3 mouth = Vec3(0.0, -0.42, 0.92).normalized();
    const Vec3 nose = Vec3(0.0, -0.05, 1.0).normalized();
    const Vec3 wave(rng.uniform(2.0, 4.0), rng.uniform(2.0, 4.0), rng.uniform(2.0, 4.0));
    const Vec3 phase(rng.uniform(0.0, 6.28), rng.uniform(0.0, 6.28), rng.uniform(0.0, 6.28));
    model.albedo.resize(v_count);
    for (int i = 0; i < v_count; ++i) {
        const Vec3& d = unit_dirs[i];
        double a = 0.78;
        a -= 0.45 * blob(d, eye_l, 0.16);
        a -= 0.45 * blob(d, eye_r, 0.16);
        a -= 0.30 * blob(d, brow_l, 0.14);
        a -= 0.30 * blob(d, brow_r, 0.14);
        a -= 0.40 * blob(d, mouth, 0.20);
        a += 0.12 * blob(d, nose, 0.25);
        a += 0.05 * std::sin(wave.x() * d.x() + phase.x()) *
             std::sin(wave.y() * d.y() + phase.y()) * std::sin(wave.z() * d.z() + phase.z());
        model.albedo[i] = std::clamp(a, 0.15, 0.92);
    }

    // Landmarks: nearest vertices to canonical facial directions.
    const Vec3 lm_dirs[12] = {
        eye_l, eye_r, nose,
        Vec3(0.0, -0.9, 0.45).normalized(),             // chin
        Vec3(-0.30, -0.42, 0.85).normalized(),          // mouth corner L
        Vec3(0.30, -0.42, 0.85).normalized(),           // mouth corner R
        Vec3(0.0, 0.75, 0.66).normalized(),             // forehead
        Vec3(-0.70, -0.10, 0.70).normalized(),          // cheek L
        Vec3(0.70, -0.10, 0.70).normalized(),           // cheek R
        Vec3(0.0, 0.28, 0.96).normalized(),             // nose bridge
        Vec3(-0.95, 0.0, 0.30).normalized(),            // jaw L
        Vec3(0.95, 0.0, 0.30).normalized(),             // jaw R
    };
    for (const Vec3& target : lm_dirs) {
        int best = 0;
        double best_dot = -2.0;
        for (int i = 0; i < v_count; ++i) {
            const double dot = unit_dirs[i].dot(target);
            if (dot > best_dot) {
                best_dot = dot;
                best = i;
            }
        }
        model.landmark_indices.push_back(best);
    }

    // Smooth deformation modes, orthonormalized in the stacked metric.
    const int basis = 8;
    std::vector<Eigen::MatrixXd> raw;
    raw.reserve(basis);
    auto field = [&](auto&& fn) {
        Eigen::MatrixXd m(v_count, 3);
        for (int i = 0; i < v_count; ++i) m.row(i) = fn(unit_dirs[i], i).transpose();
        return m;
    };
    // Global modes stay traceless (no uniform-scale component) so the fit's
    // scale parameter cannot trade off against shape coefficients.
    raw.push_back(field([&](const Vec3& d, int i) -> Vec3 {  // aspect: wide vs tall
        (void)d;
        return Vec3(model.mean_vertices(i, 0), -model.mean_vertices(i, 1), 0);
    }));
    raw.push_back(field([&](const Vec3& d, int i) -> Vec3 {  // elongation: deep vs round
        (void)d;
        return Vec3(-0.5 * model.mean_vertices(i, 0), -0.5 * model.mean_vertices(i, 1),
                    model.mean_vertices(i, 2));
    }));
    raw.push_back(field([&](const Vec3& d, int i) -> Vec3 {  // mouth region pull
        (void)i;
        return blob(d, mouth, 0.3) * Vec3(0, 0, 1);
    }));
    raw.push_back(field([&](const Vec3& d, int i) -> Vec3 {  // nose prominence
        (void)i;
        return blob(d, nose, 0.35) * d;
    }));
    raw.push_back(field([&](const Vec3& d, int i) -> Vec3 {  // jaw width
        (void)i;
        const double lower = std::max(0.0, -d.y());
        return Vec3(lower * d.x(), 0, 0);
    }));
    raw.push_back(field([&](const Vec3& d, int i) -> Vec3 {  // forehead bulge
        (void)i;
        return blob(d, Vec3(0.0, 0.75, 0.66).normalized(), 0.45) * d;
    }));
    raw.push_back(field([&](const Vec3& d, int i) -> Vec3 {  // cheek fullness
        (void)i;
        return (blob(d, Vec3(-0.70, -0.10, 0.70).normalized(), 0.35) +
                blob(d, Vec3(0.70, -0.10, 0.70).normalized(), 0.35)) *
               d;
    }));
    raw.push_back(field([&](const Vec3& d, int i) -> Vec3 {  // chin length
        (void)i;
        return blob(d, Vec3(0.0, -0.9, 0.45).normalized(), 0.4) * Vec3(0, -1, 0);
    }));

    for (auto& mode : raw) {
        for (const auto& prev : model.shape_basis) {
            const double dot = (mode.array() * prev.array()).sum();
            mode -= dot * prev;
        }
        const double norm = std::sqrt((mode.array() * mode.array()).sum());
        GSREC_CHECK_RUNTIME(norm > 1e-9, "degenerate deformation mode");
        model.shape_basis.push_back(mode / norm);
    }
    model.mode_sigmas = Eigen::VectorXd::Constant(basis, 0.35);

    model.validate();
    return model;
}

Eigen::MatrixXd FaceFitParams::to_world(const Eigen::MatrixXd& vertices_model) const {
    Eigen::MatrixXd out = scale * (vertices_model * rotation.transpose());
    out.rowwise() += translation.transpose();
    return out;
}

void save_face_model(const MorphableFaceModel& model, const std::string& path) {
    model.validate();
    nlohmann::ordered_json header;
    header["vertices"] = model.vertex_count();
    header["basis"] = model.basis_count();
    header["triangles"] = static_cast<int>(model.triangles.rows());
    header["landmarks"] = model.landmark_count();
    std::vector<double> sigmas(model.mode_sigmas.data(),
                               model.mode_sigmas.data() + model.mode_sigmas.size());
    header["mode_sigmas"] = sigmas;
    const std::string htext = header.dump();

    std::ofstream out(path, std::ios::binary);
    GSREC_CHECK_RUNTIME(out.good(), "cannot open face model for writing: ", path);
    const uint32_t hlen = static_cast<uint32_t>(htext.size());
    out.write(reinterpret_cast<const char*>(&hlen), 4);
    out.write(htext.data(), hlen);

    auto write_floats = [&](const double* data, size_t count) {
        std::vector<float> buf(count);
        for (size_t i = 0; i < count; ++i) buf[i] = static_cast<float>(data[i]);
        out.write(reinterpret_cast<const char*>(buf.data()),
                  static_cast<std::streamsize>(count * sizeof(float)));
    };
    // Eigen stores column-major; write row-major for a stable file layout.
    auto write_matrix = [&](const Eigen::MatrixXd& m) {
        std::vector<double> rowmajor(static_cast<size_t>(m.rows()) * m.cols());
        for (int r = 0; r < m.rows(); ++r)
            for (int c = 0; c < m.cols(); ++c)
                rowmajor[static_cast<size_t>(r) * m.cols() + c] = m(r, c);
        write_floats(rowmajor.data(), rowmajor.size());
    };
    write_matrix(model.mean_vertices);
    for (const auto& mode : model.shape_basis) write_matrix(mode);
    write_floats(model.albedo.data(), static_cast<size_t>(model.albedo.size()));
    std::vector<int32_t> tri(static_cast<size_t>(model.triangles.rows()) * 3);
    for (int r = 0; r < model.triangles.rows(); ++r)
        for (int c = 0; c < 3; ++c) tri[static_cast<size_t>(r) * 3 + c] = model.triangles(r, c);
    out.write(reinterpret_cast<const char*>(tri.data()),
              static_cast<std::streamsize>(tri.size() * sizeof(int32_t)));
    std::vector<int32_t> lms(model.landmark_indices.begin(), model.landmark_indices.end());
    out.write(reinterpret_cast<const char*>(lms.data()),
              static_cast<std::streamsize>(lms.size() * sizeof(int32_t)));
    GSREC_CHECK_RUNTIME(out.good(), "short write to ", path);
}

MorphableFaceModel load_face_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    GSREC_CHECK_RUNTIME(in.good(), "cannot open face model: ", path);
    uint32_t hlen = 0;
    in.read(reinterpret_cast<char*>(&hlen), 4);
    GSREC_CHECK_RUNTIME(in.gcount() == 4 && hlen > 0 && hlen < (1u << 20),
                        "corrupt face model header length in ", path);
    std::string htext(hlen, '\0');
    in.read(htext.data(), hlen);
    const auto header = nlohmann::ordered_json::parse(htext);
    const int v = header.at("vertices").get<int>();
    const int b = header.at("basis").get<int>();
    const int f = header.at("triangles").get<int>();
    const int l = header.at("landmarks").get<int>();

    MorphableFaceModel model;
    const auto sig = header.at("mode_sigmas").get<std::vector<double>>();
    GSREC_CHECK_RUNTIME(static_cast<int>(sig.size()) == b, path, ": mode sigma count mismatch");
    model.mode_sigmas = Eigen::Map<const Eigen::VectorXd>(sig.data(), b);

    auto read_floats = [&](size_t count) {
        std::vector<float> buf(count);
        in.read(reinterpret_cast<char*>(buf.data()),
                static_cast<std::streamsize>(count * sizeof(float)));
        GSREC_CHECK_RUNTIME(in.gcount() ==
                                static_cast<std::streamsize>(count * sizeof(float)),
                            path, ": truncated float array");
        return buf;
    };
    auto read_matrix = [&](int rows) {
        const auto buf = read_floats(static_cast<size_t>(rows) * 3);
        Eigen::MatrixXd m(rows, 3);
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < 3; ++c) m(r, c) = buf[static_cast<size_t>(r) * 3 + c];
        return m;
    };
    model.mean_vertices = read_matrix(v);
    for (int i = 0; i < b; ++i) model.shape_basis.push_back(read_matrix(v));
    const auto alb = read_floats(static_cast<size_t>(v));
    model.albedo.resize(v);
    for (int i = 0; i < v; ++i) model.albedo[i] = alb[i];
    std::vector<int32_t> tri(static_cast<size_t>(f) * 3);
    in.read(reinterpret_cast<char*>(tri.data()),
            static_cast<std::streamsize>(tri.size() * sizeof(int32_t)));
    GSREC_CHECK_RUNTIME(in.gcount() == static_cast<std::streamsize>(tri.size() * 4), path,
                        ": truncated triangle array");
    model.triangles.resize(f, 3);
    for (int r = 0; r < f; ++r)
        for (int c = 0; c < 3; ++c) model.triangles(r, c) = tri[static_cast<size_t>(r) * 3 + c];
    std::vector<int32_t> lms(static_cast<size_t>(l));
    in.read(reinterpret_cast<char*>(lms.data()),
            static_cast<std::streamsize>(lms.size() * sizeof(int32_t)));
    GSREC_CHECK_RUNTIME(in.gcount() == static_cast<std::streamsize>(lms.size() * 4), path,
                        ": truncated landmark array");
    model.landmark_indices.assign(lms.begin(), lms.end());

    // Float32 storage can leave the basis a hair off orthonormal; re-tighten.
    for (size_t a = 0; a < model.shape_basis.size(); ++a) {
        for (size_t p = 0; p < a; ++p) {
            const double dot =
                (model.shape_basis[a].array() * model.shape_basis[p].array()).sum();
            model.shape_basis[a] -= dot * model.shape_basis[p];
        }
        const double norm =
            std::sqrt((model.shape_basis[a].array() * model.shape_basis[a].array()).sum());
        GSREC_CHECK_RUNTIME(norm > 1e-9, path, ": degenerate basis mode ", a);
        model.shape_basis[a] /= norm;
    }
    model.validate();
    return model;
}

}  // namespace gsrec
