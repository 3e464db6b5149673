#include "tetrecon/marching_tets.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

namespace tetrecon
{
    namespace
    {
        int sign_of(double v)
        {
            return v < 0.0 ? -1 : 1;
        }

        // Gradient of the affine interpolant of (s0..s3) over the tet.
        Vec3 linear_gradient(const Vec3 & u0, const Vec3 & u1, const Vec3 & u2, const Vec3 & u3,
                             double s0, double s1, double s2, double s3)
        {
            Mat3 m;
            m.row(0) = (u1 - u0).transpose();
            m.row(1) = (u2 - u0).transpose();
            m.row(2) = (u3 - u0).transpose();
            const Vec3 rhs(s1 - s0, s2 - s0, s3 - s0);
            return m.partialPivLu().solve(rhs);
        }
    }

    ScalarField clamp_small_phi(const ScalarField & field, double eps)
    {
        if (!(eps > 0.0))
        {
            throw validation_error("clamp_small_phi: eps must be positive");
        }
        ScalarField out = field;
        for (double & v : out.values)
        {
            if (std::abs(v) < eps)
            {
                v = eps * static_cast<double>(sign_of(v));
            }
        }
        return out;
    }

    TriMesh marching_tetrahedra(const TetMesh & mesh, const ScalarField & field, double eps)
    {
        if (field.size() != mesh.num_vertices())
        {
            throw validation_error("marching_tetrahedra: field length != vertex count");
        }

        TriMesh tri;

        // One vertex per sign-change edge, assigned in edge-ordinal order so
        // identical inputs produce byte-identical output.
        std::vector<Index> edge_vertex(mesh.edges.size(), -1);
        for (size_t e = 0; e < mesh.edges.size(); ++e)
        {
            const Index k1 = mesh.edges[e][0];
            const Index k2 = mesh.edges[e][1];
            const double p1 = field[k1];
            const double p2 = field[k2];
            if (sign_of(p1) == sign_of(p2))
            {
                continue;
            }
            if (std::abs(p1 - p2) < 2.0 * eps)
            {
                throw validation_error("marching_tetrahedra: field not clamped (|phi_k1 - phi_k2| < 2 eps)");
            }
            const double w1 = -p2 / (p1 - p2); // coefficient of u_k1
            const double w2 = p1 / (p1 - p2);  // coefficient of u_k2
            edge_vertex[e] = static_cast<Index>(tri.vertices.size());
            tri.vertices.push_back(w1 * mesh.vertices[k1] + w2 * mesh.vertices[k2]);
            tri.provenance.push_back({ static_cast<Index>(e), k1, k2, w1 });
        }

        const auto emit = [&](Index a, Index b, Index c, const Vec3 & grad, Index tet) {
            const Vec3 n = (tri.vertices[b] - tri.vertices[a]).cross(tri.vertices[c] - tri.vertices[a]);
            if (n.dot(grad) < 0.0)
            {
                std::swap(b, c);
            }
            tri.triangles.push_back({ a, b, c });
            tri.source_tet.push_back(tet);
        };

        for (size_t t = 0; t < mesh.tets.size(); ++t)
        {
            std::array<Index, 4> crossing {}; // local crossing edges, ascending global ordinal
            int n_cross = 0;
            for (Index e : mesh.tet_edges[t])
            {
                if (edge_vertex[static_cast<size_t>(e)] >= 0)
                {
                    crossing[n_cross++] = e;
                }
            }
            if (n_cross == 0)
            {
                continue;
            }

            const Tet & k = mesh.tets[t];
            const Vec3 grad = linear_gradient(mesh.vertices[k[0]], mesh.vertices[k[1]],
                                              mesh.vertices[k[2]], mesh.vertices[k[3]],
                                              field[k[0]], field[k[1]], field[k[2]], field[k[3]]);
            std::sort(crossing.begin(), crossing.begin() + n_cross);
            const auto vid = [&](int i) { return edge_vertex[static_cast<size_t>(crossing[i])]; };

            if (n_cross == 3)
            {
                emit(vid(0), vid(1), vid(2), grad, static_cast<Index>(t));
            }
            else if (n_cross == 4)
            {
                // Quad split: diagonal from the lowest-numbered edge's vertex
                // to the highest-numbered edge's vertex. With the local edge
                // ordering, the lowest and highest crossing edges never share
                // a tet vertex, so they are opposite corners of the quad.
                emit(vid(0), vid(1), vid(3), grad, static_cast<Index>(t));
                emit(vid(0), vid(2), vid(3), grad, static_cast<Index>(t));
            }
            else
            {
                throw numerical_error("marching_tetrahedra: impossible crossing count (unclamped field?)");
            }
        }

        return tri;
    }

    SparseJacobian mt_vertex_jacobian(const TetMesh & mesh, const ScalarField & field,
                                      const TriMesh & tri, double eps_grad,
                                      const std::vector<Vec3> * deformed_vertices)
    {
        if (field.size() != mesh.num_vertices())
        {
            throw validation_error("mt_vertex_jacobian: field length != vertex count");
        }
        const std::vector<Vec3> & pos = deformed_vertices ? *deformed_vertices : mesh.vertices;
        if (static_cast<Index>(pos.size()) != mesh.num_vertices())
        {
            throw validation_error("mt_vertex_jacobian: deformed vertex count mismatch");
        }

        SparseJacobian jac;
        jac.rows.resize(tri.provenance.size());
        for (size_t i = 0; i < tri.provenance.size(); ++i)
        {
            const VertexProvenance & p = tri.provenance[i];
            const double p1 = field[p.k1];
            const double p2 = field[p.k2];
            const double gap = p1 - p2;
            if (std::abs(gap) < 2.0 * eps_grad)
            {
                throw numerical_error("mt_vertex_jacobian: gradient clamp violated");
            }
            const Vec3 d = pos[p.k1] - pos[p.k2];
            SparseJacobian::Row & row = jac.rows[i];
            row.k1 = p.k1;
            row.k2 = p.k2;
            row.d_k1 = p2 * d / (gap * gap);
            row.d_k2 = -p1 * d / (gap * gap);
        }
        return jac;
    }
}
