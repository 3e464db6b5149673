#include "tetrecon/render.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace tetrecon
{
    namespace
    {
        // Signed projected area with the sign flipped so camera-facing
        // triangles come out positive (screen y points down).
        double area2d(double ax, double ay, double bx, double by, double cx, double cy)
        {
            return -0.5 * ((bx - ax) * (cy - ay) - (by - ay) * (cx - ax));
        }

        struct ProjectedTri
        {
            ScreenPoint v[3];
            double area = 0.0;
            bool visible = false;
        };

        ProjectedTri project_triangle(const TriMesh & tri, Index t, const Camera & cam)
        {
            ProjectedTri out;
            const Tri & f = tri.triangles[static_cast<size_t>(t)];
            for (int i = 0; i < 3; ++i)
            {
                const Vec3 vc = cam.to_camera(tri.vertices[f[i]]);
                if (!(vc.z() > 1e-12))
                {
                    return out; // behind the camera: skip, no error
                }
                out.v[i] = project_to_screen(vc, cam);
            }
            out.area = area2d(out.v[0].x, out.v[0].y, out.v[1].x, out.v[1].y, out.v[2].x, out.v[2].y);
            out.visible = out.area > 0.0;
            return out;
        }
    }

    std::vector<Vec3> vertex_normals(const TriMesh & tri)
    {
        if (tri.empty())
        {
            throw validation_error("vertex_normals: empty mesh");
        }
        std::vector<Vec3> acc(tri.vertices.size(), Vec3::Zero());
        for (const Tri & f : tri.triangles)
        {
            const Vec3 n = (tri.vertices[f[1]] - tri.vertices[f[0]])
                               .cross(tri.vertices[f[2]] - tri.vertices[f[0]]);
            if (n.norm() < 2e-14) // 2 * area > 1e-14
            {
                throw validation_error("vertex_normals: zero-area triangle");
            }
            acc[f[0]] += n;
            acc[f[1]] += n;
            acc[f[2]] += n;
        }
        for (Vec3 & n : acc)
        {
            const double len = n.norm();
            if (len < 1e-12)
            {
                throw numerical_error("vertex_normals: degenerate vertex normal (incident faces cancel)");
            }
            n /= len;
        }
        return acc;
    }

    NormalMap rasterize(const TriMesh & tri, const Camera & cam)
    {
        cam.validate();
        NormalMap nm(cam.width, cam.height);
        if (tri.empty())
        {
            return nm;
        }
        const std::vector<Vec3> vnormals = vertex_normals(tri);

        const Index ntris = tri.num_triangles();
        std::vector<ProjectedTri> projected(static_cast<size_t>(ntris));
#pragma omp parallel for schedule(static)
        for (Index t = 0; t < ntris; ++t)
        {
            projected[static_cast<size_t>(t)] = project_triangle(tri, t, cam);
        }

        // Bin triangles by the image rows their bounding box overlaps, then
        // rasterize disjoint row bands in parallel. Each pixel's winner is
        // min (z', triangle index), so the result does not depend on the
        // number of threads or the submission order.
        int nbands = 1;
#ifdef _OPENMP
        nbands = std::max(1, omp_get_max_threads());
#endif
        nbands = std::min(nbands, cam.height);
        const int rows_per_band = (cam.height + nbands - 1) / nbands;
        std::vector<std::vector<Index>> bands(static_cast<size_t>(nbands));
        for (Index t = 0; t < ntris; ++t)
        {
            const ProjectedTri & p = projected[static_cast<size_t>(t)];
            if (!p.visible)
            {
                continue;
            }
            const double ymin = std::min({ p.v[0].y, p.v[1].y, p.v[2].y });
            const double ymax = std::max({ p.v[0].y, p.v[1].y, p.v[2].y });
            int row0 = std::max(0, static_cast<int>(std::floor(ymin - 0.5)));
            int row1 = std::min(cam.height - 1, static_cast<int>(std::ceil(ymax - 0.5)));
            if (row0 > row1)
            {
                continue;
            }
            for (int b = row0 / rows_per_band; b <= row1 / rows_per_band; ++b)
            {
                bands[static_cast<size_t>(b)].push_back(t);
            }
        }

        std::vector<double> zbuf(nm.pixel_count(), std::numeric_limits<double>::max());
        std::vector<Index> winner(nm.pixel_count(), -1);

#pragma omp parallel for schedule(dynamic, 1)
        for (int b = 0; b < nbands; ++b)
        {
            const int band_row0 = b * rows_per_band;
            const int band_row1 = std::min(cam.height - 1, band_row0 + rows_per_band - 1);
            for (Index t : bands[static_cast<size_t>(b)])
            {
                const ProjectedTri & p = projected[static_cast<size_t>(t)];
                const double xmin = std::min({ p.v[0].x, p.v[1].x, p.v[2].x });
                const double xmax = std::max({ p.v[0].x, p.v[1].x, p.v[2].x });
                const double ymin = std::min({ p.v[0].y, p.v[1].y, p.v[2].y });
                const double ymax = std::max({ p.v[0].y, p.v[1].y, p.v[2].y });
                const int x0 = std::max(0, static_cast<int>(std::floor(xmin - 0.5)));
                const int x1 = std::min(cam.width - 1, static_cast<int>(std::ceil(xmax - 0.5)));
                const int y0 = std::max(band_row0, static_cast<int>(std::floor(ymin - 0.5)));
                const int y1 = std::min(band_row1, static_cast<int>(std::ceil(ymax - 0.5)));
                for (int y = y0; y <= y1; ++y)
                {
                    const double py = y + 0.5;
                    for (int x = x0; x <= x1; ++x)
                    {
                        const double px = x + 0.5;
                        const double a1 = area2d(px, py, p.v[1].x, p.v[1].y, p.v[2].x, p.v[2].y);
                        const double a2 = area2d(p.v[0].x, p.v[0].y, px, py, p.v[2].x, p.v[2].y);
                        const double a3 = area2d(p.v[0].x, p.v[0].y, p.v[1].x, p.v[1].y, px, py);
                        if (a1 < 0.0 || a2 < 0.0 || a3 < 0.0)
                        {
                            continue;
                        }
                        const double total = a1 + a2 + a3;
                        if (!(total > 0.0))
                        {
                            continue;
                        }
                        const double z = (a1 * p.v[0].z_screen + a2 * p.v[1].z_screen +
                                          a3 * p.v[2].z_screen) / total;
                        const size_t idx = nm.index(x, y);
                        if (z < zbuf[idx] || (z == zbuf[idx] && t < winner[idx]))
                        {
                            zbuf[idx] = z;
                            winner[idx] = t;
                        }
                    }
                }
            }
        }

        // Resolve shading for winning fragments.
#pragma omp parallel for schedule(static)
        for (int y = 0; y < cam.height; ++y)
        {
            for (int x = 0; x < cam.width; ++x)
            {
                const size_t idx = nm.index(x, y);
                const Index t = winner[idx];
                if (t < 0)
                {
                    continue;
                }
                const ProjectedTri & p = projected[static_cast<size_t>(t)];
                const Tri & f = tri.triangles[static_cast<size_t>(t)];
                const double px = x + 0.5;
                const double py = y + 0.5;
                const double a1s = area2d(px, py, p.v[1].x, p.v[1].y, p.v[2].x, p.v[2].y);
                const double a2s = area2d(p.v[0].x, p.v[0].y, px, py, p.v[2].x, p.v[2].y);
                const double a3s = area2d(p.v[0].x, p.v[0].y, p.v[1].x, p.v[1].y, px, py);
                // World-space barycentrics from screen areas and camera depths.
                const Vec3 alpha(p.v[1].z_cam * p.v[2].z_cam * a1s,
                                 p.v[0].z_cam * p.v[2].z_cam * a2s,
                                 p.v[0].z_cam * p.v[1].z_cam * a3s);
                const Vec3 blend = alpha[0] * vnormals[f[0]] + alpha[1] * vnormals[f[1]] +
                                   alpha[2] * vnormals[f[2]];
                nm.mask[idx] = 1;
                nm.depth[idx] = zbuf[idx];
                nm.normals[idx] = (cam.rotation * blend).normalized();
                nm.fragments[idx] = { t, alpha };
            }
        }
        return nm;
    }

    NormalMap raytrace_oracle(const TriMesh & tri, const Camera & cam)
    {
        cam.validate();
        NormalMap nm(cam.width, cam.height);
        if (tri.empty())
        {
            return nm;
        }
        const std::vector<Vec3> vnormals = vertex_normals(tri);
        const Vec3 origin = cam.center();
        const Mat3 r_inv = cam.rotation.transpose();
        const double fx = cam.focal_x();
        const double fy = cam.focal_y();

#pragma omp parallel for schedule(dynamic, 4)
        for (int y = 0; y < cam.height; ++y)
        {
            for (int x = 0; x < cam.width; ++x)
            {
                // Pixel center back-projected onto the z_c = 1 plane.
                const Vec3 dir_cam((cam.width / 2.0 - (x + 0.5)) / fx,
                                   (cam.height / 2.0 - (y + 0.5)) / fy, 1.0);
                const Vec3 dir = r_inv * dir_cam;

                double best_t = std::numeric_limits<double>::max();
                Index best_tri = -1;
                Vec3 best_point = Vec3::Zero();
                for (Index t = 0; t < tri.num_triangles(); ++t)
                {
                    const Tri & f = tri.triangles[static_cast<size_t>(t)];
                    const Vec3 & v0 = tri.vertices[f[0]];
                    const Vec3 e1 = tri.vertices[f[1]] - v0;
                    const Vec3 e2 = tri.vertices[f[2]] - v0;
                    const Vec3 pvec = dir.cross(e2);
                    const double det = e1.dot(pvec);
                    if (std::abs(det) < 1e-14)
                    {
                        continue;
                    }
                    const Vec3 tvec = origin - v0;
                    const double u = tvec.dot(pvec) / det;
                    if (u < 0.0 || u > 1.0)
                    {
                        continue;
                    }
                    const Vec3 qvec = tvec.cross(e1);
                    const double v = dir.dot(qvec) / det;
                    if (v < 0.0 || u + v > 1.0)
                    {
                        continue;
                    }
                    const double hit_t = e2.dot(qvec) / det;
                    if (hit_t <= 1e-12)
                    {
                        continue;
                    }
                    if (hit_t < best_t || (hit_t == best_t && t < best_tri))
                    {
                        best_t = hit_t;
                        best_tri = t;
                        best_point = origin + hit_t * dir;
                    }
                }
                if (best_tri < 0)
                {
                    continue;
                }
                const Tri & f = tri.triangles[static_cast<size_t>(best_tri)];
                const Vec3 & v1 = tri.vertices[f[0]];
                const Vec3 & v2 = tri.vertices[f[1]];
                const Vec3 & v3 = tri.vertices[f[2]];
                // Sub-triangle areas at the intersection point.
                const double a1 = 0.5 * (v2 - best_point).cross(v3 - best_point).norm();
                const double a2 = 0.5 * (best_point - v1).cross(v3 - v1).norm();
                const double a3 = 0.5 * (v2 - v1).cross(best_point - v1).norm();
                const double total = 0.5 * (v2 - v1).cross(v3 - v1).norm();
                const Vec3 alpha(a1 / total, a2 / total, a3 / total);
                const Vec3 blend = alpha[0] * vnormals[f[0]] + alpha[1] * vnormals[f[1]] +
                                   alpha[2] * vnormals[f[2]];

                const size_t idx = nm.index(x, y);
                nm.mask[idx] = 1;
                nm.normals[idx] = (cam.rotation * blend).normalized();
                nm.depth[idx] = project_to_screen(cam.to_camera(best_point), cam).z_screen;
                nm.fragments[idx] = { best_tri, alpha };
            }
        }
        return nm;
    }

    std::vector<Vec3> backprop_pixels(const TriMesh & tri, const Camera & cam, const NormalMap & nm,
                                      const std::vector<Vec3> & pixel_grads)
    {
        if (nm.width != cam.width || nm.height != cam.height)
        {
            throw validation_error("backprop_pixels: normal map does not match camera dimensions");
        }
        if (pixel_grads.size() != nm.pixel_count())
        {
            throw validation_error("backprop_pixels: pixel gradient count mismatch");
        }
        if (nm.fragments.size() != nm.pixel_count())
        {
            throw validation_error("backprop_pixels: fragment provenance missing");
        }

        const std::vector<Vec3> vnormals = vertex_normals(tri);
        const double fx = cam.focal_x();
        const double fy = cam.focal_y();
        const Mat3 r_t = cam.rotation.transpose();

        std::vector<Vec3> grad_pos(tri.vertices.size(), Vec3::Zero());
        std::vector<Vec3> grad_vnormal(tri.vertices.size(), Vec3::Zero());

        for (int y = 0; y < cam.height; ++y)
        {
            for (int x = 0; x < cam.width; ++x)
            {
                const size_t idx = nm.index(x, y);
                if (!nm.mask[idx])
                {
                    continue;
                }
                const Vec3 & g = pixel_grads[idx];
                if (g.isZero(0.0))
                {
                    continue;
                }
                const Index t = nm.fragments[idx].triangle;
                const Tri & f = tri.triangles[static_cast<size_t>(t)];

                ScreenPoint sp[3];
                Vec3 vcam[3];
                for (int i = 0; i < 3; ++i)
                {
                    vcam[i] = cam.to_camera(tri.vertices[f[i]]);
                    sp[i] = project_to_screen(vcam[i], cam);
                }
                const double px = x + 0.5;
                const double py = y + 0.5;
                const double a1s = area2d(px, py, sp[1].x, sp[1].y, sp[2].x, sp[2].y);
                const double a2s = area2d(sp[0].x, sp[0].y, px, py, sp[2].x, sp[2].y);
                const double a3s = area2d(sp[0].x, sp[0].y, sp[1].x, sp[1].y, px, py);
                const double z1 = sp[0].z_cam, z2 = sp[1].z_cam, z3 = sp[2].z_cam;
                const Vec3 alpha(z2 * z3 * a1s, z1 * z3 * a2s, z1 * z2 * a3s);

                // n_pixel = R m / |m|, m = sum alpha_i n_vi
                const Vec3 m = alpha[0] * vnormals[f[0]] + alpha[1] * vnormals[f[1]] +
                               alpha[2] * vnormals[f[2]];
                const double mlen = m.norm();
                if (mlen < 1e-300)
                {
                    continue;
                }
                const Vec3 mhat = m / mlen;
                const Vec3 gm = (r_t * g - mhat * (mhat.dot(r_t * g))) / mlen;

                Vec3 galpha;
                for (int i = 0; i < 3; ++i)
                {
                    galpha[i] = vnormals[f[i]].dot(gm);
                    grad_vnormal[f[i]] += alpha[i] * gm;
                }

                // d alpha / d screen areas and camera depths.
                const double ga1 = galpha[0] * z2 * z3;
                const double ga2 = galpha[1] * z1 * z3;
                const double ga3 = galpha[2] * z1 * z2;
                double gz[3] = {
                    galpha[1] * z3 * a2s + galpha[2] * z2 * a3s,
                    galpha[0] * z3 * a1s + galpha[2] * z1 * a3s,
                    galpha[0] * z2 * a1s + galpha[1] * z1 * a2s,
                };

                // Area2D(a, b, c) partials: d/d a = -(by-cy, cx-bx)/2, etc.
                double gsx[3] = { 0, 0, 0 };
                double gsy[3] = { 0, 0, 0 };
                // a1s = area2d(p, v1, v2): depends on screen vertices 1, 2.
                gsx[1] += ga1 * -0.5 * (sp[2].y - py);
                gsy[1] += ga1 * -0.5 * (px - sp[2].x);
                gsx[2] += ga1 * -0.5 * (py - sp[1].y);
                gsy[2] += ga1 * -0.5 * (sp[1].x - px);
                // a2s = area2d(v0, p, v2): depends on screen vertices 0, 2.
                gsx[0] += ga2 * -0.5 * (py - sp[2].y);
                gsy[0] += ga2 * -0.5 * (sp[2].x - px);
                gsx[2] += ga2 * -0.5 * (sp[0].y - py);
                gsy[2] += ga2 * -0.5 * (px - sp[0].x);
                // a3s = area2d(v0, v1, p): depends on screen vertices 0, 1.
                gsx[0] += ga3 * -0.5 * (sp[1].y - py);
                gsy[0] += ga3 * -0.5 * (px - sp[1].x);
                gsx[1] += ga3 * -0.5 * (py - sp[0].y);
                gsy[1] += ga3 * -0.5 * (sp[0].x - px);

                for (int i = 0; i < 3; ++i)
                {
                    const double zc = sp[i].z_cam;
                    Vec3 gcam(gsx[i] * (-fx / zc),
                              gsy[i] * (-fy / zc),
                              gsx[i] * (fx * vcam[i].x() / (zc * zc)) +
                                  gsy[i] * (fy * vcam[i].y() / (zc * zc)) + gz[i]);
                    grad_pos[f[i]] += r_t * gcam;
                }
            }
        }

        // Scatter vertex-normal gradients back through normalization and the
        // face-normal sums.
        std::vector<Vec3> grad_raw_normal(tri.vertices.size(), Vec3::Zero());
        std::vector<Vec3> raw_normal(tri.vertices.size(), Vec3::Zero());
        for (const Tri & f : tri.triangles)
        {
            const Vec3 n = (tri.vertices[f[1]] - tri.vertices[f[0]])
                               .cross(tri.vertices[f[2]] - tri.vertices[f[0]]);
            raw_normal[f[0]] += n;
            raw_normal[f[1]] += n;
            raw_normal[f[2]] += n;
        }
        for (size_t v = 0; v < tri.vertices.size(); ++v)
        {
            if (grad_vnormal[v].isZero(0.0))
            {
                continue;
            }
            const double len = raw_normal[v].norm();
            const Vec3 nhat = raw_normal[v] / len;
            grad_raw_normal[v] = (grad_vnormal[v] - nhat * nhat.dot(grad_vnormal[v])) / len;
        }
        for (const Tri & f : tri.triangles)
        {
            const Vec3 gn = grad_raw_normal[f[0]] + grad_raw_normal[f[1]] + grad_raw_normal[f[2]];
            if (gn.isZero(0.0))
            {
                continue;
            }
            const Vec3 & v1 = tri.vertices[f[0]];
            const Vec3 & v2 = tri.vertices[f[1]];
            const Vec3 & v3 = tri.vertices[f[2]];
            grad_pos[f[0]] += gn.cross(v3 - v2);
            grad_pos[f[1]] += gn.cross(v1 - v3);
            grad_pos[f[2]] += gn.cross(v2 - v1);
        }
        return grad_pos;
    }
}
