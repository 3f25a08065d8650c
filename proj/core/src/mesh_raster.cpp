#include <algorithm>
#include <cmath>

#include "gsrec/face.hpp"

namespace gsrec {

MeshRaster rasterize_mesh(const Eigen::MatrixXd& vertices_world, const Eigen::MatrixXi& tris,
                          const Eigen::VectorXd& albedo, const Camera& cam,
                          double near_plane) {
    const int w = cam.intrinsics.width, h = cam.intrinsics.height;
    MeshRaster out;
    out.depth = Image(w, h, 1);
    out.gray = Image(w, h, 1);
    out.mask = Image(w, h, 1);
    out.triangle_id.assign(static_cast<size_t>(w) * h, -1);
    out.barycentric.assign(static_cast<size_t>(w) * h, Eigen::Vector3d::Zero());

    const int v_count = static_cast<int>(vertices_world.rows());
    std::vector<Vec3> cam_pts(v_count);
    std::vector<Vec2> screen(v_count);
    for (int i = 0; i < v_count; ++i) {
        cam_pts[i] = cam.world_to_camera.apply(vertices_world.row(i).transpose());
        const double z = cam_pts[i].z();
        if (z > near_plane) {
            screen[i] = Vec2(cam.intrinsics.cx + cam.intrinsics.fx * cam_pts[i].x() / z,
                             cam.intrinsics.cy + cam.intrinsics.fy * cam_pts[i].y() / z);
        }
    }

    std::vector<double> zbuf(static_cast<size_t>(w) * h,
                             std::numeric_limits<double>::max());
    for (int t = 0; t < tris.rows(); ++t) {
        const int i0 = tris(t, 0), i1 = tris(t, 1), i2 = tris(t, 2);
        if (cam_pts[i0].z() <= near_plane || cam_pts[i1].z() <= near_plane ||
            cam_pts[i2].z() <= near_plane)
            continue;
        const Vec2 a = screen[i0], b = screen[i1], c = screen[i2];
        const double area = (b.x() - a.x()) * (c.y() - a.y()) - (b.y() - a.y()) * (c.x() - a.x());
        if (std::abs(area) < 1e-12) continue;

        const int x0 = std::max(0, static_cast<int>(std::floor(std::min({a.x(), b.x(), c.x()}))));
        const int x1 = std::min(w - 1, static_cast<int>(std::ceil(std::max({a.x(), b.x(), c.x()}))));
        const int y0 = std::max(0, static_cast<int>(std::floor(std::min({a.y(), b.y(), c.y()}))));
        const int y1 = std::min(h - 1, static_cast<int>(std::ceil(std::max({a.y(), b.y(), c.y()}))));
        if (x0 > x1 || y0 > y1) continue;

        const double inv_area = 1.0 / area;
        const double inv_z0 = 1.0 / cam_pts[i0].z();
        const double inv_z1 = 1.0 / cam_pts[i1].z();
        const double inv_z2 = 1.0 / cam_pts[i2].z();
        for (int py = y0; py <= y1; ++py) {
            for (int px = x0; px <= x1; ++px) {
                const Vec2 p(px, py);
                double b0 = ((b.x() - p.x()) * (c.y() - p.y()) -
                             (b.y() - p.y()) * (c.x() - p.x())) *
                            inv_area;
                double b1 = ((c.x() - p.x()) * (a.y() - p.y()) -
                             (c.y() - p.y()) * (a.x() - p.x())) *
                            inv_area;
                double b2 = 1.0 - b0 - b1;
                if (b0 < 0.0 || b1 < 0.0 || b2 < 0.0) continue;
                // Perspective correction: interpolate 1/z linearly in screen space.
                const double inv_z = b0 * inv_z0 + b1 * inv_z1 + b2 * inv_z2;
                const double z = 1.0 / inv_z;
                const size_t idx = static_cast<size_t>(py) * w + px;
                if (z >= zbuf[idx]) continue;
                zbuf[idx] = z;
                const double w0 = b0 * inv_z0 * z;
                const double w1 = b1 * inv_z1 * z;
                const double w2 = b2 * inv_z2 * z;
                out.depth.at(px, py) = z;
                out.gray.at(px, py) = w0 * albedo[i0] + w1 * albedo[i1] + w2 * albedo[i2];
                out.mask.at(px, py) = 1.0;
                out.triangle_id[idx] = t;
                out.barycentric[idx] = Eigen::Vector3d(w0, w1, w2);
            }
        }
    }
    return out;
}

DepthMap render_face_depth(const FaceFitParams& params, const MorphableFaceModel& model,
                           const Camera& cam) {
    params.validate();
    const Eigen::MatrixXd world = params.to_world(model.vertices_for(params.shape_coeffs));
    const MeshRaster raster = rasterize_mesh(world, model.triangles, model.albedo, cam);
    DepthMap dm;
    dm.depth = raster.depth;
    dm.valid = raster.mask;
    dm.confidence = raster.mask;
    return dm;
}

}  // namespace gsrec
