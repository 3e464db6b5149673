#include "tetrecon/icp.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <unordered_map>

namespace tetrecon
{
    namespace
    {
        Vec3 centroid(const std::vector<Vec3> & pts)
        {
            Vec3 c = Vec3::Zero();
            for (const Vec3 & p : pts)
            {
                c += p;
            }
            return c / static_cast<double>(pts.size());
        }

        void require_non_degenerate(const std::vector<Vec3> & pts, const char * who)
        {
            if (pts.size() < 3)
            {
                throw validation_error(std::string(who) + ": need at least 3 points");
            }
            const Vec3 c = centroid(pts);
            Mat3 cov = Mat3::Zero();
            for (const Vec3 & p : pts)
            {
                cov += (p - c) * (p - c).transpose();
            }
            Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
            // Collinear input has at most one significant eigenvalue.
            if (eig.eigenvalues()[1] <= 1e-12 * std::max(eig.eigenvalues()[2], 1e-300))
            {
                throw validation_error(std::string(who) + ": degenerate (collinear) point set");
            }
        }

        // Uniform hash grid over dst for nearest-neighbor lookups.
        class NearestGrid
        {
        public:
            explicit NearestGrid(const std::vector<Vec3> & pts) : pts_(pts)
            {
                Vec3 lo = pts[0], hi = pts[0];
                for (const Vec3 & p : pts)
                {
                    lo = lo.cwiseMin(p);
                    hi = hi.cwiseMax(p);
                }
                const double extent = std::max((hi - lo).maxCoeff(), 1e-12);
                cell_ = extent / std::max(1.0, std::cbrt(static_cast<double>(pts.size())));
                origin_ = lo;
                for (size_t i = 0; i < pts.size(); ++i)
                {
                    cells_[key(pts[i])].push_back(i);
                }
            }

            size_t nearest(const Vec3 & q) const
            {
                const auto [qx, qy, qz] = coords(q);
                size_t best = 0;
                double best_d2 = std::numeric_limits<double>::max();
                const auto scan_box = [&](int r) {
                    for (int dx = -r; dx <= r; ++dx)
                        for (int dy = -r; dy <= r; ++dy)
                            for (int dz = -r; dz <= r; ++dz)
                            {
                                auto it = cells_.find(pack(qx + dx, qy + dy, qz + dz));
                                if (it == cells_.end())
                                {
                                    continue;
                                }
                                for (size_t i : it->second)
                                {
                                    const double d2 = (pts_[i] - q).squaredNorm();
                                    if (d2 < best_d2)
                                    {
                                        best_d2 = d2;
                                        best = i;
                                    }
                                }
                            }
                };

                int r = 1;
                scan_box(r);
                while (best_d2 == std::numeric_limits<double>::max() && r < 64)
                {
                    r *= 2;
                    scan_box(r);
                }
                if (best_d2 == std::numeric_limits<double>::max())
                {
                    for (size_t i = 0; i < pts_.size(); ++i)
                    {
                        const double d2 = (pts_[i] - q).squaredNorm();
                        if (d2 < best_d2)
                        {
                            best_d2 = d2;
                            best = i;
                        }
                    }
                    return best;
                }
                // A candidate in a box of radius r only bounds the true
                // nearest within distance sqrt(best_d2); widen once to cover it.
                const int needed = static_cast<int>(std::ceil(std::sqrt(best_d2) / cell_)) + 1;
                if (needed > r)
                {
                    scan_box(needed);
                }
                return best;
            }

        private:
            std::tuple<int, int, int> coords(const Vec3 & p) const
            {
                return { static_cast<int>(std::floor((p.x() - origin_.x()) / cell_)),
                         static_cast<int>(std::floor((p.y() - origin_.y()) / cell_)),
                         static_cast<int>(std::floor((p.z() - origin_.z()) / cell_)) };
            }
            std::int64_t key(const Vec3 & p) const
            {
                const auto [x, y, z] = coords(p);
                return pack(x, y, z);
            }
            static std::int64_t pack(int x, int y, int z)
            {
                return (static_cast<std::int64_t>(x) & 0x1fffff) |
                       ((static_cast<std::int64_t>(y) & 0x1fffff) << 21) |
                       ((static_cast<std::int64_t>(z) & 0x1fffff) << 42);
            }

            const std::vector<Vec3> & pts_;
            Vec3 origin_ = Vec3::Zero();
            double cell_ = 1.0;
            std::unordered_map<std::int64_t, std::vector<size_t>> cells_;
        };
    }

    RigidTransform procrustes(const std::vector<Vec3> & src, const std::vector<Vec3> & dst)
    {
        if (src.size() != dst.size() || src.size() < 3)
        {
            throw validation_error("procrustes: need matched point sets of size >= 3");
        }
        const Vec3 cs = centroid(src);
        const Vec3 cd = centroid(dst);
        Mat3 cross = Mat3::Zero();
        for (size_t i = 0; i < src.size(); ++i)
        {
            cross += (src[i] - cs) * (dst[i] - cd).transpose();
        }
        Eigen::JacobiSVD<Mat3> svd(cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
        Mat3 d = Mat3::Identity();
        d(2, 2) = (svd.matrixV() * svd.matrixU().transpose()).determinant() < 0.0 ? -1.0 : 1.0;
        RigidTransform rt;
        rt.rotation = svd.matrixV() * d * svd.matrixU().transpose();
        rt.translation = cd - rt.rotation * cs;
        return rt;
    }

    IcpResult icp_rigid_align(const std::vector<Vec3> & src, const std::vector<Vec3> & dst,
                              int max_iters, double tol)
    {
        require_non_degenerate(src, "icp_rigid_align(src)");
        require_non_degenerate(dst, "icp_rigid_align(dst)");

        const NearestGrid grid(dst);
        IcpResult result;
        std::vector<Vec3> moved = src;
        std::vector<Vec3> matched(src.size());
        double prev_rms = std::numeric_limits<double>::max();

        for (int it = 0; it < max_iters; ++it)
        {
            double sq = 0.0;
            for (size_t i = 0; i < moved.size(); ++i)
            {
                matched[i] = dst[grid.nearest(moved[i])];
                sq += (matched[i] - moved[i]).squaredNorm();
            }
            const double rms = std::sqrt(sq / static_cast<double>(moved.size()));
            result.rms = rms;
            result.iterations = it + 1;

            const RigidTransform step = procrustes(moved, matched);
            result.transform = step * result.transform;
            for (Vec3 & p : moved)
            {
                p = step(p);
            }
            if (std::abs(prev_rms - rms) < tol)
            {
                break;
            }
            prev_rms = rms;
        }
        return result;
    }

    std::vector<Camera> refine_cameras(const std::vector<TriMesh> & meshes,
                                       const std::vector<Camera> & cameras,
                                       int max_outer_iters, double tol)
    {
        if (meshes.size() != cameras.size() || meshes.empty())
        {
            throw validation_error("refine_cameras: need one mesh per camera");
        }
        std::vector<Camera> out = cameras;
        std::vector<std::vector<Vec3>> clouds(meshes.size());
        for (size_t v = 0; v < meshes.size(); ++v)
        {
            clouds[v] = meshes[v].vertices;
        }

        for (int outer = 0; outer < max_outer_iters; ++outer)
        {
            double max_update = 0.0;
            for (size_t v = 1; v < clouds.size(); ++v)
            {
                const IcpResult icp = icp_rigid_align(clouds[v], clouds[0]);
                const Mat3 a_r = icp.transform.rotation;
                const Vec3 a_t = icp.transform.translation;

                // The view's geometry really sits at A x; seeing it correctly
                // from the shared frame means composing the extrinsics with A^{-1}.
                const Mat3 new_r = out[v].rotation * a_r.transpose();
                const Vec3 new_t = out[v].translation - new_r * a_t;
                max_update = std::max(max_update, (new_t - out[v].translation).norm());
                out[v].rotation = new_r;
                out[v].translation = new_t;

                for (Vec3 & p : clouds[v])
                {
                    p = icp.transform(p);
                }
            }
            if (max_update < tol)
            {
                break;
            }
        }
        return out;
    }
}
