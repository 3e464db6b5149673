#pragma once

#include "tetrecon/camera.hpp"
#include "tetrecon/marching_tets.hpp"
#include "tetrecon/types.hpp"

namespace tetrecon
{
    struct IcpResult
    {
        RigidTransform transform; // maps src toward dst
        double rms = 0.0;         // residual after the final iteration
        int iterations = 0;
    };

    /**
     * Point-to-point ICP: alternates nearest-neighbor correspondences with
     * the best-fit rigid transform (orthogonal Procrustes on the
     * cross-covariance, reflection-guarded). Stops when the RMS residual
     * changes by less than `tol`. Inputs need at least 3 non-collinear
     * points each.
     */
    IcpResult icp_rigid_align(const std::vector<Vec3> & src, const std::vector<Vec3> & dst,
                              int max_iters = 50, double tol = 1e-10);

    /// Single best-fit rigid transform for known correspondences (src[i] -> dst[i]).
    RigidTransform procrustes(const std::vector<Vec3> & src, const std::vector<Vec3> & dst);

    /**
     * Aligns every per-view mesh to view 0's mesh with ICP and folds each
     * view's rigid error into its camera extrinsics, iterating until the
     * largest camera translation update drops below `tol`.
     */
    std::vector<Camera> refine_cameras(const std::vector<TriMesh> & meshes,
                                       const std::vector<Camera> & cameras,
                                       int max_outer_iters = 10, double tol = 1e-7);
}
