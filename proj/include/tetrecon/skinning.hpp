#pragma once

#include "tetrecon/marching_tets.hpp"
#include "tetrecon/tetmesh.hpp"

namespace tetrecon
{
    /**
     * Articulated skeleton in rest pose. Each joint carries a rigid rest
     * frame (joint -> world) and the segment its skinning influence decays
     * from; a joint without a distinct tip influences from a point.
     */
    struct Skeleton
    {
        struct Joint
        {
            std::string name;
            Mat3 rest_rotation = Mat3::Identity();
            Vec3 rest_translation = Vec3::Zero();
            Index parent = -1;        // -1 for roots
            Vec3 tip = Vec3::Zero();  // far end of the joint's bone segment (world, rest)
            bool has_tip = false;
        };

        std::vector<Joint> joints;

        Index num_joints() const { return static_cast<Index>(joints.size()); }

        /// Segment the joint's influence is measured from: rest position to tip.
        std::pair<Vec3, Vec3> bone_segment(Index j) const;

        /// Throws unless parents form a forest and rest rotations are orthonormal.
        void validate() const;
    };

    /// Per-joint rigid transforms (joint -> world) for a posed skeleton.
    struct Pose
    {
        std::vector<RigidTransform> joint_transforms;

        /// The rest pose itself: T_j = rest frame of joint j.
        static Pose rest(const Skeleton & skel);

        void validate(const Skeleton & skel) const;
    };

    /// Per-vertex, per-joint convex weights (rows sum to 1).
    struct SkinWeights
    {
        Index num_joints = 0;
        std::vector<double> w; // row-major, vertex-major

        double at(Index vertex, Index joint) const
        {
            return w[static_cast<size_t>(vertex) * num_joints + joint];
        }
        Index num_vertices() const
        {
            return num_joints == 0 ? 0 : static_cast<Index>(w.size()) / num_joints;
        }
    };

    /**
     * Distance-based weights: joint j's unnormalized weight at vertex u is
     * 1 / (d(u, segment_j)^2 + delta^2); rows are normalized. Vertices where
     * every kernel value degenerates fall back to uniform weights.
     */
    SkinWeights compute_skin_weights(const TetMesh & mesh, const Skeleton & skel, double delta = 1e-4);

    /// Linear blend skinning of the tet-mesh vertices:
    /// u_k(theta) = sum_j w_kj T_j rest_j^{-1} u_k.
    std::vector<Vec3> skin_tet_vertices(const TetMesh & mesh, const SkinWeights & w,
                                        const Skeleton & skel, const Pose & pose);

    /// Triangle-vertex weights: the zero-crossing interpolation applied to the
    /// endpoint weight rows. Returns one weight per joint, summing to 1.
    std::vector<double> interpolate_tri_weights(const ScalarField & field, Index k1, Index k2,
                                                const SkinWeights & w);

    /**
     * March-then-skin ordering: each extracted vertex is skinned with its own
     * interpolated weights and reference-space positions,
     * v_i(theta, phi) = sum_j w_ij(phi) T_j rest_j^{-1} v_i(phi).
     */
    TriMesh skin_triangle_mesh(const TriMesh & tri, const ScalarField & field, const SkinWeights & w,
                               const Skeleton & skel, const Pose & pose);

    /// Skin-then-march ordering: marching tetrahedra on the skinned tet mesh
    /// with the unchanged field.
    TriMesh march_skinned(const TetMesh & mesh, const ScalarField & field, const SkinWeights & w,
                          const Skeleton & skel, const Pose & pose, double eps = 1e-8);

    enum class SkinOrder
    {
        march_then_skin, // option 1
        skin_then_march, // option 2
    };

    /**
     * d (deformed v_i) / d phi for either ordering. Option 1 sums the
     * product-rule terms through the interpolated weights and reference
     * positions (joint transforms fixed); option 2 is the marching-tets
     * Jacobian evaluated on skinned tet vertices.
     */
    SparseJacobian skinned_vertex_jacobian(const TetMesh & mesh, const ScalarField & field,
                                           const TriMesh & rest_tri, const SkinWeights & w,
                                           const Skeleton & skel, const Pose & pose,
                                           SkinOrder order, double eps_grad = 1e-4);
}
