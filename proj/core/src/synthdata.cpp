#include "gsrec/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "gsrec/rasterizer.hpp"
#include "gsrec/rng.hpp"

namespace gsrec {

namespace {

constexpr double kSurfaceOpacity = 0.97;

// Smooth seeded color field: three phase-shifted sinusoid products.
Vec3 texture_color(const Vec3& p, const SceneSpec::Primitive& prim) {
    Rng rng(prim.texture_seed);
    Vec3 out;
    for (int c = 0; c < 3; ++c) {
        const Vec3 freq(rng.uniform(0.6, 1.4), rng.uniform(0.6, 1.4), rng.uniform(0.6, 1.4));
        const Vec3 phase(rng.uniform(0.0, 6.28), rng.uniform(0.0, 6.28),
                         rng.uniform(0.0, 6.28));
        const double s = prim.texture_scale;
        double v = std::sin(s * freq.x() * p.x() + phase.x()) *
                       std::sin(s * freq.y() * p.y() + phase.y()) +
                   0.5 * std::sin(s * 1.7 * freq.z() * p.z() + phase.z());
        v = 0.5 + v / 3.0;  // roughly [0,1]
        out[c] = prim.albedo_min + v * (prim.albedo_max - prim.albedo_min);
    }
    return out.cwiseMax(0.02).cwiseMin(0.95);
}

Vec4 quat_from_two_dirs(const Vec3& from, const Vec3& to) {
    const Vec3 a = from.normalized(), b = to.normalized();
    const double c = a.dot(b);
    if (c > 1.0 - 1e-12) return Vec4(1, 0, 0, 0);
    if (c < -1.0 + 1e-12) {
        Vec3 axis = a.unitOrthogonal();
        return Vec4(0.0, axis.x(), axis.y(), axis.z());
    }
    const Vec3 axis = a.cross(b);
    Vec4 q(1.0 + c, axis.x(), axis.y(), axis.z());
    return q / q.norm();
}

void add_surface_gaussian(GaussianScene& scene, const Vec3& pos, const Vec3& normal,
                          const Vec3& color, double spacing, int sh_degree) {
    Gaussian3D g;
    g.mean = pos;
    g.rotation = quat_from_two_dirs(Vec3::UnitZ(), normal);
    const double tangent = std::log(spacing * 0.7);
    const double thin = std::log(spacing * 0.25);
    g.log_scale = Vec3(tangent, tangent, thin);  // local z is the normal
    g.opacity_logit = std::log(kSurfaceOpacity / (1.0 - kSurfaceOpacity));
    g.set_dc_color(color, sh_degree);
    scene.add(std::move(g));
}

void sample_sphere(GaussianScene& scene, const SceneSpec::Primitive& prim, double spacing,
                   int sh_degree) {
    const double area = 4.0 * M_PI * prim.radius * prim.radius;
    const int n = std::max(16, static_cast<int>(area / (spacing * spacing)));
    const double golden = M_PI * (3.0 - std::sqrt(5.0));
    for (int i = 0; i < n; ++i) {
        const double y = 1.0 - 2.0 * (i + 0.5) / n;
        const double r = std::sqrt(std::max(0.0, 1.0 - y * y));
        const double phi = golden * i;
        const Vec3 dir(r * std::cos(phi), y, r * std::sin(phi));
        const Vec3 pos = prim.center + prim.radius * dir;
        add_surface_gaussian(scene, pos, dir, texture_color(pos, prim), spacing, sh_degree);
    }
}

void sample_plane(GaussianScene& scene, const SceneSpec::Primitive& prim, double spacing,
                  int sh_degree) {
    const Vec3 n = prim.axis.normalized();
    const Vec3 u = n.unitOrthogonal();
    const Vec3 v = n.cross(u);
    const int nu = std::max(2, static_cast<int>(2.0 * prim.half_extent.x() / spacing));
    const int nv = std::max(2, static_cast<int>(2.0 * prim.half_extent.y() / spacing));
    for (int i = 0; i < nu; ++i) {
        for (int j = 0; j < nv; ++j) {
            const double a = -prim.half_extent.x() + (i + 0.5) * 2.0 * prim.half_extent.x() / nu;
            const double b = -prim.half_extent.y() + (j + 0.5) * 2.0 * prim.half_extent.y() / nv;
            const Vec3 pos = prim.center + a * u + b * v;
            add_surface_gaussian(scene, pos, n, texture_color(pos, prim), spacing, sh_degree);
        }
    }
}

void append_plane_mesh(TestScene& out, const SceneSpec::Primitive& prim) {
    const Vec3 n = prim.axis.normalized();
    const Vec3 u = n.unitOrthogonal();
    const Vec3 v = n.cross(u);
    const int grid = 96;
    const int base = static_cast<int>(out.mesh_vertices.rows());
    Eigen::MatrixXd verts(static_cast<int>(grid + 1) * (grid + 1), 3);
    Eigen::VectorXd albedo(verts.rows());
    for (int j = 0; j <= grid; ++j) {
        for (int i = 0; i <= grid; ++i) {
            const double a = -prim.half_extent.x() + 2.0 * prim.half_extent.x() * i / grid;
            const double b = -prim.half_extent.y() + 2.0 * prim.half_extent.y() * j / grid;
            const Vec3 pos = prim.center + a * u + b * v;
            verts.row(j * (grid + 1) + i) = pos.transpose();
            const Vec3 c = texture_color(pos, prim);
            albedo[j * (grid + 1) + i] = 0.299 * c.x() + 0.587 * c.y() + 0.114 * c.z();
        }
    }
    Eigen::MatrixXi tris(2 * grid * grid, 3);
    int t = 0;
    for (int j = 0; j < grid; ++j) {
        for (int i = 0; i < grid; ++i) {
            const int a = base + j * (grid + 1) + i;
            const int b = a + 1;
            const int c = a + grid + 1;
            const int d = c + 1;
            tris.row(t++) = Eigen::Vector3i(a, c, b);
            tris.row(t++) = Eigen::Vector3i(b, c, d);
        }
    }
    const int old_v = static_cast<int>(out.mesh_vertices.rows());
    const int old_t = static_cast<int>(out.mesh_triangles.rows());
    out.mesh_vertices.conservativeResize(old_v + verts.rows(), 3);
    out.mesh_vertices.bottomRows(verts.rows()) = verts;
    out.mesh_albedo.conservativeResize(old_v + albedo.size());
    out.mesh_albedo.tail(albedo.size()) = albedo;
    out.mesh_triangles.conservativeResize(old_t + tris.rows(), 3);
    out.mesh_triangles.bottomRows(tris.rows()) = tris;
}

void sample_capsule(GaussianScene& scene, const SceneSpec::Primitive& prim, double spacing,
                    int sh_degree) {
    const Vec3 axis = prim.axis.normalized();
    const Vec3 u = axis.unitOrthogonal();
    const Vec3 v = axis.cross(u);
    const int n_ring = std::max(8, static_cast<int>(2.0 * M_PI * prim.radius / spacing));
    const int n_len = std::max(2, static_cast<int>(2.0 * prim.half_length / spacing));
    for (int i = 0; i < n_len; ++i) {
        const double t = -prim.half_length + (i + 0.5) * 2.0 * prim.half_length / n_len;
        for (int j = 0; j < n_ring; ++j) {
            const double a = 2.0 * M_PI * j / n_ring;
            const Vec3 nrm = std::cos(a) * u + std::sin(a) * v;
            const Vec3 pos = prim.center + t * axis + prim.radius * nrm;
            add_surface_gaussian(scene, pos, nrm, texture_color(pos, prim), spacing, sh_degree);
        }
    }
    // Hemispherical caps.
    const int n_cap = std::max(
        8, static_cast<int>(2.0 * M_PI * prim.radius * prim.radius / (spacing * spacing)));
    const double golden = M_PI * (3.0 - std::sqrt(5.0));
    for (int s = -1; s <= 1; s += 2) {
        for (int i = 0; i < n_cap; ++i) {
            const double z = (i + 0.5) / n_cap;  // only the outward hemisphere
            const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
            const double phi = golden * i;
            const Vec3 nrm = r * std::cos(phi) * u + r * std::sin(phi) * v + s * z * axis;
            const Vec3 pos = prim.center + s * prim.half_length * axis + prim.radius * nrm;
            add_surface_gaussian(scene, pos, nrm, texture_color(pos, prim), spacing, sh_degree);
        }
    }
}

void sample_head(GaussianScene& scene, TestScene& out, const SceneSpec::Primitive& prim,
                 double spacing, int sh_degree, uint64_t seed) {
    out.has_head = true;
    out.head_model = make_standin_face_model();  // canonical stand-in asset
    out.head_pose.shape_coeffs = Eigen::VectorXd::Zero(out.head_model.basis_count());
    out.head_pose.rotation = Mat3::Identity();
    out.head_pose.translation = prim.center;
    out.head_pose.scale = prim.radius;

    const Eigen::MatrixXd verts =
        out.head_pose.to_world(out.head_model.mean_vertices);
    Rng rng(mix_seed(seed, 77));
    for (int t = 0; t < out.head_model.triangles.rows(); ++t) {
        const Vec3 a = verts.row(out.head_model.triangles(t, 0)).transpose();
        const Vec3 b = verts.row(out.head_model.triangles(t, 1)).transpose();
        const Vec3 c = verts.row(out.head_model.triangles(t, 2)).transpose();
        const double area = 0.5 * (b - a).cross(c - a).norm();
        const int n = std::max(1, static_cast<int>(area / (spacing * spacing) * 2.0));
        const Vec3 nrm = (b - a).cross(c - a).normalized();
        for (int i = 0; i < n; ++i) {
            double r1 = rng.uniform(), r2 = rng.uniform();
            if (r1 + r2 > 1.0) {
                r1 = 1.0 - r1;
                r2 = 1.0 - r2;
            }
            const double w0 = 1.0 - r1 - r2, w1 = r1, w2 = r2;
            const Vec3 pos = w0 * a + w1 * b + w2 * c;
            const double alb = w0 * out.head_model.albedo[out.head_model.triangles(t, 0)] +
                               w1 * out.head_model.albedo[out.head_model.triangles(t, 1)] +
                               w2 * out.head_model.albedo[out.head_model.triangles(t, 2)];
            add_surface_gaussian(scene, pos, nrm, Vec3::Constant(std::clamp(alb, 0.05, 0.95)),
                                 spacing * 0.8, sh_degree);
        }
    }
}

}  // namespace

std::string SceneSpec::hash() const {
    // FNV-1a over a canonical text form; identifies fixtures in meta.json.
    std::ostringstream oss;
    oss << seed << ":" << gaussian_spacing;
    for (const auto& p : primitives) {
        oss << "|" << static_cast<int>(p.type) << "," << p.center.transpose() << ","
            << p.axis.transpose() << "," << p.radius << "," << p.half_length << ","
            << p.half_extent.transpose() << "," << p.texture_seed << "," << p.texture_scale;
    }
    const std::string s = oss.str();
    uint64_t h = 1469598103934665603ULL;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    std::ostringstream hex;
    hex << std::hex << h;
    return hex.str();
}

TestScene make_test_scene(const SceneSpec& spec) {
    spec.validate();
    TestScene out;
    out.scene = GaussianScene(2);
    out.mesh_vertices.resize(0, 3);
    out.mesh_triangles.resize(0, 3);
    out.mesh_albedo.resize(0);
    out.mesh_only = true;
    for (const auto& prim : spec.primitives) {
        switch (prim.type) {
            case SceneSpec::Primitive::Type::Sphere:
                sample_sphere(out.scene, prim, spec.gaussian_spacing, 2);
                out.mesh_only = false;
                break;
            case SceneSpec::Primitive::Type::Plane:
                sample_plane(out.scene, prim, spec.gaussian_spacing, 2);
                append_plane_mesh(out, prim);
                break;
            case SceneSpec::Primitive::Type::Capsule:
                sample_capsule(out.scene, prim, spec.gaussian_spacing, 2);
                out.mesh_only = false;
                break;
            case SceneSpec::Primitive::Type::Head:
                sample_head(out.scene, out, prim, spec.gaussian_spacing, 2, spec.seed);
                out.mesh_only = false;
                break;
            default:
                GSREC_CHECK_ARG(false, "unknown primitive type");
        }
    }
    out.mesh_only = out.mesh_only && out.mesh_triangles.rows() > 0;
    out.scene.validate();
    return out;
}

ViewBundle make_view_bundle(const TestScene& scene, const SceneSpec& spec, int n_views,
                            double elevation, double radius, int image_size, uint64_t seed) {
    GSREC_CHECK_ARG(n_views >= 2, "bundle needs at least 2 views, got ", n_views);
    GSREC_CHECK_ARG(image_size >= 16, "image size too small: ", image_size);

    Vec3 lo, hi;
    scene.scene.bounding_box(lo, hi);
    const Vec3 target = 0.5 * (lo + hi);

    // Fixed 40-degree vertical field of view; the generator's own convention.
    Intrinsics intr;
    intr.width = intr.height = image_size;
    intr.fx = intr.fy = 0.5 * image_size / std::tan(0.5 * 40.0 * M_PI / 180.0);
    intr.cx = intr.cy = 0.5 * (image_size - 1);

    ViewBundle bundle;
    bundle.seed = seed;
    bundle.spec_hash = spec.hash();
    bundle.background = Vec3::Ones();

    RenderConfig render_cfg;
    render_cfg.background = bundle.background;

    const Eigen::MatrixXd head_world =
        scene.has_head
            ? scene.head_pose.to_world(scene.head_model.vertices_for(scene.head_pose.shape_coeffs))
            : Eigen::MatrixXd();
    // Facial-hemisphere indicator per vertex (model space looks along +z).
    Eigen::VectorXd facial;
    if (scene.has_head) {
        facial.resize(scene.head_model.vertex_count());
        for (int i = 0; i < scene.head_model.vertex_count(); ++i) {
            const Vec3 v = scene.head_model.mean_vertices.row(i).transpose();
            facial[i] = v.z() > 0.3 * v.norm() ? 1.0 : 0.0;
        }
    }
    const Vec3 face_dir_world = scene.has_head
                                    ? (scene.head_pose.rotation * Vec3::UnitZ()).normalized()
                                    : Vec3::UnitZ();

    for (int i = 0; i < n_views; ++i) {
        OrbitPose orbit;
        orbit.azimuth = 2.0 * M_PI * i / n_views;
        orbit.elevation = elevation;
        orbit.radius = radius;
        orbit.target = target;
        const Camera cam = camera_from_orbit(orbit, intr);
        bundle.gt_cameras.push_back(cam);
        bundle.nominal_cameras.push_back(cam);
        if (scene.mesh_only) {
            // Exact plane geometry for stereo fixtures.
            const MeshRaster raster =
                rasterize_mesh(scene.mesh_vertices, scene.mesh_triangles, scene.mesh_albedo, cam);
            Image img(image_size, image_size, 3, 1.0);
            for (int y = 0; y < image_size; ++y)
                for (int x = 0; x < image_size; ++x)
                    if (raster.mask.at(x, y) > 0.5)
                        for (int c = 0; c < 3; ++c) img.at(x, y, c) = raster.gray.at(x, y);
            bundle.images.push_back(std::move(img));
            bundle.subject_alphas.push_back(raster.mask);
        } else {
            RenderOutput rendered = render(scene.scene, cam, render_cfg);
            bundle.images.push_back(std::move(rendered.color));
            bundle.subject_alphas.push_back(std::move(rendered.alpha));
        }

        if (scene.has_head) {
            const Vec3 view_dir = (cam.center() - scene.head_pose.translation).normalized();
            const bool frontal =
                view_dir.dot(face_dir_world) > std::cos(75.0 * M_PI / 180.0);
            Image mask(image_size, image_size, 1);
            std::vector<Vec2> lms;
            if (frontal) {
                const MeshRaster raster = rasterize_mesh(
                    head_world, scene.head_model.triangles, facial, cam);
                for (int y = 0; y < image_size; ++y)
                    for (int x = 0; x < image_size; ++x)
                        mask.at(x, y) =
                            raster.mask.at(x, y) > 0.5 && raster.gray.at(x, y) > 0.5 ? 1.0
                                                                                     : 0.0;
                for (int lm : scene.head_model.landmark_indices) {
                    const Projection proj =
                        project(head_world.row(lm).transpose(), cam);
                    lms.push_back(proj.pixel);
                }
            }
            bundle.face_masks.push_back(std::move(mask));
            bundle.landmarks.push_back(std::move(lms));
        }
    }
    bundle.validate();
    return bundle;
}

ViewBundle perturb_cameras(const ViewBundle& bundle, double rot_sigma_deg,
                           double trans_sigma_frac, uint64_t seed) {
    GSREC_CHECK_ARG(rot_sigma_deg >= 0.0 && trans_sigma_frac >= 0.0,
                    "perturbation sigmas must be non-negative");
    GSREC_CHECK_ARG(!bundle.gt_cameras.empty(), "bundle carries no ground-truth cameras");

    ViewBundle out = bundle;
    Rng rng(mix_seed(seed, 21));
    const double rot_sigma = rot_sigma_deg * M_PI / 180.0;
    double radius = 1.0;
    if (bundle.gt_cameras[0].orbit) radius = bundle.gt_cameras[0].orbit->radius;

    for (size_t i = 1; i < out.nominal_cameras.size(); ++i) {  // reference stays put
        PoseDelta delta;
        for (int a = 0; a < 3; ++a) delta.twist[a] = rot_sigma * rng.normal();
        for (int a = 3; a < 6; ++a) delta.twist[a] = trans_sigma_frac * radius * rng.normal();
        out.nominal_cameras[i].world_to_camera =
            apply_pose_delta(bundle.gt_cameras[i].world_to_camera, delta);
        if (rot_sigma_deg > 0.0 || trans_sigma_frac > 0.0) out.nominal_cameras[i].orbit.reset();
    }
    return out;
}


ViewBundle distort_faces(const ViewBundle& bundle, double severity, uint64_t seed) {
    GSREC_CHECK_ARG(severity >= 0.0, "severity must be non-negative, got ", severity);
    GSREC_CHECK_ARG(!bundle.face_masks.empty(), "bundle carries no face masks");

    ViewBundle out = bundle;
    out.clean_images = bundle.images;
    if (severity == 0.0) return out;

    for (size_t v = 1; v < bundle.images.size(); ++v) {  // reference stays untouched
        const Image& mask = bundle.face_masks[v];
        int x0 = mask.width(), y0 = mask.height(), x1 = -1, y1 = -1;
        for (int y = 0; y < mask.height(); ++y)
            for (int x = 0; x < mask.width(); ++x)
                if (mask.at(x, y) > 0.5) {
                    x0 = std::min(x0, x);
                    y0 = std::min(y0, y);
                    x1 = std::max(x1, x);
                    y1 = std::max(y1, y);
                }
        if (x1 < x0) continue;  // empty mask

        Rng rng(mix_seed(seed, 100 + v));
        const int grid = 5;
        std::vector<Vec2> disp(static_cast<size_t>(grid) * grid);
        const double amp = severity * 0.18 * std::max(x1 - x0 + 1, y1 - y0 + 1);
        for (auto& d : disp) d = Vec2(amp * rng.normal(), amp * rng.normal());

        const Image& src = bundle.images[v];
        Image warped = src;
        for (int y = y0; y <= y1; ++y) {
            for (int x = x0; x <= x1; ++x) {
                if (mask.at(x, y) <= 0.5) continue;
                const double gu = (x - x0) / std::max(1.0, static_cast<double>(x1 - x0)) *
                                  (grid - 1);
                const double gv = (y - y0) / std::max(1.0, static_cast<double>(y1 - y0)) *
                                  (grid - 1);
                const int iu = std::min(grid - 2, static_cast<int>(gu));
                const int iv = std::min(grid - 2, static_cast<int>(gv));
                const double fu = gu - iu, fv = gv - iv;
                const Vec2 d = (1 - fu) * (1 - fv) * disp[iv * grid + iu] +
                               fu * (1 - fv) * disp[iv * grid + iu + 1] +
                               (1 - fu) * fv * disp[(iv + 1) * grid + iu] +
                               fu * fv * disp[(iv + 1) * grid + iu + 1];
                for (int c = 0; c < src.channels(); ++c)
                    warped.at(x, y, c) = src.sample_bilinear(x + d.x(), y + d.y(), c);
            }
        }
        const Image blurred = gaussian_blur(warped, severity * 1.5);
        for (int y = y0; y <= y1; ++y)
            for (int x = x0; x <= x1; ++x)
                if (mask.at(x, y) > 0.5)
                    for (int c = 0; c < src.channels(); ++c)
                        out.images[v].at(x, y, c) = blurred.at(x, y, c);
    }
    return out;
}

SceneSpec human_standin_spec(uint64_t seed) {
    SceneSpec spec;
    spec.seed = seed;
    SceneSpec::Primitive body;
    body.type = SceneSpec::Primitive::Type::Capsule;
    body.center = Vec3(0.0, -0.25, 0.0);
    body.axis = Vec3::UnitY();
    body.radius = 0.18;
    body.half_length = 0.35;
    body.texture_seed = mix_seed(seed, 1);
    body.texture_scale = 7.0;
    spec.primitives.push_back(body);

    // Arms posed asymmetrically; without them the subject is a surface of
    // revolution and camera azimuth is barely observable.
    SceneSpec::Primitive arm_l;
    arm_l.type = SceneSpec::Primitive::Type::Capsule;
    arm_l.center = Vec3(-0.28, -0.18, 0.06);
    arm_l.axis = Vec3(0.25, 1.0, 0.35).normalized();
    arm_l.radius = 0.06;
    arm_l.half_length = 0.28;
    arm_l.texture_seed = mix_seed(seed, 3);
    arm_l.texture_scale = 9.0;
    spec.primitives.push_back(arm_l);

    SceneSpec::Primitive arm_r;
    arm_r.type = SceneSpec::Primitive::Type::Capsule;
    arm_r.center = Vec3(0.27, -0.3, -0.1);
    arm_r.axis = Vec3(-0.2, 1.0, -0.5).normalized();
    arm_r.radius = 0.065;
    arm_r.half_length = 0.24;
    arm_r.texture_seed = mix_seed(seed, 4);
    arm_r.texture_scale = 9.0;
    spec.primitives.push_back(arm_r);

    SceneSpec::Primitive satchel;
    satchel.type = SceneSpec::Primitive::Type::Sphere;
    satchel.center = Vec3(0.16, -0.42, 0.17);
    satchel.radius = 0.1;
    satchel.texture_seed = mix_seed(seed, 5);
    satchel.texture_scale = 8.0;
    spec.primitives.push_back(satchel);

    SceneSpec::Primitive head;
    head.type = SceneSpec::Primitive::Type::Head;
    head.center = Vec3(0.0, 0.33, 0.0);
    head.radius = 1.0;  // natural model size (~0.2 world units tall)
    head.texture_seed = mix_seed(seed, 2);
    spec.primitives.push_back(head);

    spec.gaussian_spacing = 0.022;
    return spec;
}

SceneSpec textured_plane_spec(double plane_z, double half_extent, uint64_t seed) {
    SceneSpec spec;
    spec.seed = seed;
    SceneSpec::Primitive plane;
    plane.type = SceneSpec::Primitive::Type::Plane;
    plane.center = Vec3(0.0, 0.0, plane_z);
    plane.axis = Vec3::UnitZ();
    plane.half_extent = Vec2(half_extent, half_extent);
    plane.texture_seed = mix_seed(seed, 3);
    plane.texture_scale = 9.0;
    spec.primitives.push_back(plane);
    spec.gaussian_spacing = 0.015;
    return spec;
}

}  // namespace gsrec
