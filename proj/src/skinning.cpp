#include "tetrecon/skinning.hpp"

#include <cmath>

namespace tetrecon
{
    namespace
    {
        double point_segment_dist2(const Vec3 & p, const Vec3 & a, const Vec3 & b)
        {
            const Vec3 ab = b - a;
            const double len2 = ab.squaredNorm();
            double t = 0.0;
            if (len2 > 0.0)
            {
                t = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
            }
            return (p - (a + t * ab)).squaredNorm();
        }

        // World-from-rest affine map of joint j under the pose: T_j rest_j^{-1}.
        RigidTransform joint_deformation(const Skeleton & skel, const Pose & pose, Index j)
        {
            RigidTransform rest;
            rest.rotation = skel.joints[static_cast<size_t>(j)].rest_rotation;
            rest.translation = skel.joints[static_cast<size_t>(j)].rest_translation;
            return pose.joint_transforms[static_cast<size_t>(j)] * rest.inverse();
        }
    }

    std::pair<Vec3, Vec3> Skeleton::bone_segment(Index j) const
    {
        const Joint & joint = joints[static_cast<size_t>(j)];
        return { joint.rest_translation, joint.has_tip ? joint.tip : joint.rest_translation };
    }

    void Skeleton::validate() const
    {
        if (joints.empty())
        {
            throw validation_error("Skeleton: no joints");
        }
        for (size_t j = 0; j < joints.size(); ++j)
        {
            const Joint & joint = joints[j];
            if ((joint.rest_rotation * joint.rest_rotation.transpose() - Mat3::Identity())
                    .cwiseAbs().maxCoeff() > 1e-9)
            {
                throw validation_error("Skeleton: rest rotation not orthonormal: " + joint.name);
            }
            if (joint.parent >= static_cast<Index>(j))
            {
                // Parents must precede children; also rejects self-parenting cycles.
                throw validation_error("Skeleton: joints must be listed parent-first: " + joint.name);
            }
        }
    }

    Pose Pose::rest(const Skeleton & skel)
    {
        Pose pose;
        pose.joint_transforms.reserve(skel.joints.size());
        for (const auto & joint : skel.joints)
        {
            pose.joint_transforms.push_back({ joint.rest_rotation, joint.rest_translation });
        }
        return pose;
    }

    void Pose::validate(const Skeleton & skel) const
    {
        if (joint_transforms.size() != skel.joints.size())
        {
            throw validation_error("Pose: joint count mismatch");
        }
        for (const auto & t : joint_transforms)
        {
            if ((t.rotation * t.rotation.transpose() - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-9)
            {
                throw validation_error("Pose: rotation block not orthonormal");
            }
        }
    }

    SkinWeights compute_skin_weights(const TetMesh & mesh, const Skeleton & skel, double delta)
    {
        skel.validate();
        const Index nj = skel.num_joints();
        SkinWeights weights;
        weights.num_joints = nj;
        weights.w.resize(mesh.vertices.size() * static_cast<size_t>(nj));

        for (size_t k = 0; k < mesh.vertices.size(); ++k)
        {
            double * row = &weights.w[k * nj];
            double total = 0.0;
            for (Index j = 0; j < nj; ++j)
            {
                const auto [a, b] = skel.bone_segment(j);
                const double d2 = point_segment_dist2(mesh.vertices[k], a, b);
                row[j] = 1.0 / (d2 + delta * delta);
                total += row[j];
            }
            if (!(total > 0.0) || !std::isfinite(total))
            {
                for (Index j = 0; j < nj; ++j) // uniform fallback
                {
                    row[j] = 1.0 / nj;
                }
            }
            else
            {
                for (Index j = 0; j < nj; ++j)
                {
                    row[j] /= total;
                }
            }
        }
        return weights;
    }

    std::vector<Vec3> skin_tet_vertices(const TetMesh & mesh, const SkinWeights & w,
                                        const Skeleton & skel, const Pose & pose)
    {
        pose.validate(skel);
        if (w.num_vertices() != mesh.num_vertices() || w.num_joints != skel.num_joints())
        {
            throw validation_error("skin_tet_vertices: weight table does not match mesh/skeleton");
        }
        std::vector<RigidTransform> deform(skel.joints.size());
        for (Index j = 0; j < skel.num_joints(); ++j)
        {
            deform[static_cast<size_t>(j)] = joint_deformation(skel, pose, j);
        }

        std::vector<Vec3> out(mesh.vertices.size());
        for (size_t k = 0; k < mesh.vertices.size(); ++k)
        {
            Vec3 p = Vec3::Zero();
            for (Index j = 0; j < w.num_joints; ++j)
            {
                p += w.at(static_cast<Index>(k), j) * deform[static_cast<size_t>(j)](mesh.vertices[k]);
            }
            out[k] = p;
        }
        return out;
    }

    std::vector<double> interpolate_tri_weights(const ScalarField & field, Index k1, Index k2,
                                                const SkinWeights & w)
    {
        const double p1 = field[k1];
        const double p2 = field[k2];
        const double c1 = -p2 / (p1 - p2);
        const double c2 = p1 / (p1 - p2);
        std::vector<double> out(static_cast<size_t>(w.num_joints));
        for (Index j = 0; j < w.num_joints; ++j)
        {
            out[static_cast<size_t>(j)] = c1 * w.at(k1, j) + c2 * w.at(k2, j);
        }
        return out;
    }

    TriMesh skin_triangle_mesh(const TriMesh & tri, const ScalarField & field, const SkinWeights & w,
                               const Skeleton & skel, const Pose & pose)
    {
        pose.validate(skel);
        if (tri.provenance.size() != tri.vertices.size())
        {
            throw validation_error("skin_triangle_mesh: provenance missing");
        }
        std::vector<RigidTransform> deform(skel.joints.size());
        for (Index j = 0; j < skel.num_joints(); ++j)
        {
            deform[static_cast<size_t>(j)] = joint_deformation(skel, pose, j);
        }

        TriMesh out = tri;
        for (size_t i = 0; i < tri.vertices.size(); ++i)
        {
            const VertexProvenance & p = tri.provenance[i];
            const std::vector<double> wi = interpolate_tri_weights(field, p.k1, p.k2, w);
            Vec3 pos = Vec3::Zero();
            for (Index j = 0; j < w.num_joints; ++j)
            {
                pos += wi[static_cast<size_t>(j)] * deform[static_cast<size_t>(j)](tri.vertices[i]);
            }
            out.vertices[i] = pos;
        }
        return out;
    }

    TriMesh march_skinned(const TetMesh & mesh, const ScalarField & field, const SkinWeights & w,
                          const Skeleton & skel, const Pose & pose, double eps)
    {
        TetMesh deformed = mesh;
        deformed.vertices = skin_tet_vertices(mesh, w, skel, pose);
        return marching_tetrahedra(deformed, field, eps);
    }

    SparseJacobian skinned_vertex_jacobian(const TetMesh & mesh, const ScalarField & field,
                                           const TriMesh & rest_tri, const SkinWeights & w,
                                           const Skeleton & skel, const Pose & pose,
                                           SkinOrder order, double eps_grad)
    {
        pose.validate(skel);
        if (order == SkinOrder::skin_then_march)
        {
            const std::vector<Vec3> deformed = skin_tet_vertices(mesh, w, skel, pose);
            return mt_vertex_jacobian(mesh, field, rest_tri, eps_grad, &deformed);
        }

        // Option 1: v_i = sum_j w_ij(phi) D_j v_i(phi) with D_j fixed.
        std::vector<RigidTransform> deform(skel.joints.size());
        for (Index j = 0; j < skel.num_joints(); ++j)
        {
            deform[static_cast<size_t>(j)] = joint_deformation(skel, pose, j);
        }
        const SparseJacobian rest_jac = mt_vertex_jacobian(mesh, field, rest_tri, eps_grad);

        SparseJacobian jac;
        jac.rows.resize(rest_tri.vertices.size());
        for (size_t i = 0; i < rest_tri.vertices.size(); ++i)
        {
            const VertexProvenance & p = rest_tri.provenance[i];
            const double p1 = field[p.k1];
            const double p2 = field[p.k2];
            const double gap = p1 - p2;
            const double inv_gap2 = 1.0 / (gap * gap);
            const std::vector<double> wi = interpolate_tri_weights(field, p.k1, p.k2, w);

            SparseJacobian::Row row;
            row.k1 = p.k1;
            row.k2 = p.k2;
            for (Index j = 0; j < w.num_joints; ++j)
            {
                const RigidTransform & d = deform[static_cast<size_t>(j)];
                const Vec3 transformed = d(rest_tri.vertices[i]);
                const double dw = w.at(p.k1, j) - w.at(p.k2, j);
                // d w_ij / d phi follows the same quotient structure as the vertex.
                const double dw_dp1 = p2 * dw * inv_gap2;
                const double dw_dp2 = -p1 * dw * inv_gap2;
                row.d_k1 += dw_dp1 * transformed +
                            wi[static_cast<size_t>(j)] * (d.rotation * rest_jac.rows[i].d_k1);
                row.d_k2 += dw_dp2 * transformed +
                            wi[static_cast<size_t>(j)] * (d.rotation * rest_jac.rows[i].d_k2);
            }
            jac.rows[i] = row;
        }
        return jac;
    }
}
