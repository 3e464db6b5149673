#pragma once

#include "tetrecon/tetmesh.hpp"

namespace tetrecon
{
    /// Where a triangle vertex came from: the sign-change tet edge it sits on.
    struct VertexProvenance
    {
        Index edge = -1;     // global tet-edge ordinal
        Index k1 = -1;       // edge endpoints, k1 < k2
        Index k2 = -1;
        double weight = 0.0; // coefficient of u_k1 in the zero crossing
    };

    /**
     * Watertight triangle mesh extracted by marching tetrahedra. Exactly one
     * vertex per sign-change tet edge (indexed in edge-ordinal order), all
     * face normals oriented toward increasing field values.
     */
    struct TriMesh
    {
        std::vector<Vec3> vertices;
        std::vector<Tri> triangles;
        std::vector<VertexProvenance> provenance; // one per vertex
        std::vector<Index> source_tet;            // one per triangle

        Index num_vertices() const { return static_cast<Index>(vertices.size()); }
        Index num_triangles() const { return static_cast<Index>(triangles.size()); }
        bool empty() const { return triangles.empty(); }
    };

    /**
     * Sparse derivative of triangle-mesh vertices with respect to the scalar
     * field: each vertex depends on exactly the two field values of its
     * parent edge.
     */
    struct SparseJacobian
    {
        struct Row
        {
            Index k1 = -1;
            Index k2 = -1;
            Vec3 d_k1 = Vec3::Zero(); // d v_i / d phi_k1
            Vec3 d_k2 = Vec3::Zero(); // d v_i / d phi_k2
        };
        std::vector<Row> rows; // one per TriMesh vertex
    };

    /**
     * Preprocess that keeps triangle vertices away from tet vertices: values
     * with |phi| < eps are replaced by eps * sign(phi), with sign(0) := +1.
     */
    ScalarField clamp_small_phi(const ScalarField & field, double eps);

    /**
     * Extracts the zero level set of the linearly interpolated field.
     *
     * One vertex is placed on each sign-change edge by linear interpolation;
     * tets with three crossings yield one triangle, tets with four yield a
     * quadrilateral split by connecting the vertex on the lowest-numbered
     * edge to the vertex on the highest-numbered edge. The result is
     * watertight and deterministic for identical inputs.
     *
     * `field` must already be clamped so that every sign-change edge has
     * |phi_k1 - phi_k2| >= 2 * eps.
     */
    TriMesh marching_tetrahedra(const TetMesh & mesh, const ScalarField & field, double eps = 1e-8);

    /**
     * Analytic d v_i / d phi for every extracted vertex:
     *   d v / d phi_k1 = phi_k2 (u_k1 - u_k2) / (phi_k1 - phi_k2)^2
     *   d v / d phi_k2 = phi_k1 (u_k2 - u_k1) / (phi_k1 - phi_k2)^2
     *
     * Requires |phi_k1 - phi_k2| >= 2 * eps_grad on every parent edge (a
     * larger clamp than extraction uses, keeping the 1/(...)^2 coefficients
     * bounded); otherwise throws numerical_error("gradient clamp violated").
     *
     * `deformed_vertices` optionally substitutes skinned positions for the
     * rest positions u_k (the skin-then-march ordering).
     */
    SparseJacobian mt_vertex_jacobian(const TetMesh & mesh, const ScalarField & field,
                                      const TriMesh & tri, double eps_grad = 1e-4,
                                      const std::vector<Vec3> * deformed_vertices = nullptr);
}
