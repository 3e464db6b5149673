#include "tetrecon/energy.hpp"

#include "tetrecon/render.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace tetrecon
{
    void EnergyConfig::validate() const
    {
        if (!(eps_clamp > 0.0) || !(eps_grad > 0.0) || eps_h < 0.0 || eps_s < 0.0 ||
            !(grad_h_floor > 0.0))
        {
            throw validation_error("EnergyConfig: epsilons must be positive");
        }
        for (double w : { w_normal, w_eikonal, w_curvature, w_shrink, w_expand, w_multiview, w_anchor })
        {
            if (!(w >= 0.0) || !std::isfinite(w))
            {
                throw validation_error("EnergyConfig: weights must be finite and non-negative");
            }
        }
    }

    NormalLoss normal_map_loss(const NormalMap & pred, const NormalMap & target)
    {
        if (pred.width != target.width || pred.height != target.height)
        {
            throw validation_error("normal_map_loss: dimension mismatch");
        }
        NormalLoss loss;
        loss.pixel_grads.assign(pred.pixel_count(), Vec3::Zero());

        size_t count = 0;
        for (size_t i = 0; i < pred.pixel_count(); ++i)
        {
            count += (pred.mask[i] && target.mask[i]) ? 1 : 0;
        }
        loss.shared_pixels = count;
        if (count == 0)
        {
            return loss;
        }
        double total = 0.0;
        for (size_t i = 0; i < pred.pixel_count(); ++i)
        {
            if (!pred.mask[i] || !target.mask[i])
            {
                continue;
            }
            const Vec3 diff = pred.normals[i] - target.normals[i];
            total += 0.5 * diff.squaredNorm();
            loss.pixel_grads[i] = diff / static_cast<double>(count);
        }
        loss.value = total / static_cast<double>(count);
        return loss;
    }

    Vec4 tet_linear_coeffs(const std::array<Vec3, 4> & corners, const Vec4 & values)
    {
        Mat4 m;
        for (int i = 0; i < 4; ++i)
        {
            m(i, 0) = corners[static_cast<size_t>(i)].x();
            m(i, 1) = corners[static_cast<size_t>(i)].y();
            m(i, 2) = corners[static_cast<size_t>(i)].z();
            m(i, 3) = 1.0;
        }
        Eigen::FullPivLU<Mat4> lu(m);
        if (!lu.isInvertible())
        {
            throw numerical_error("tet_linear_coeffs: degenerate tetrahedron");
        }
        return lu.solve(values);
    }

    namespace
    {
        // Rows 0..2 of M^{-1}: the 3x4 map from corner values to the interpolant gradient.
        Eigen::Matrix<double, 3, 4> gradient_matrix(const TetMesh & mesh, Index t)
        {
            const Tet & k = mesh.tets[static_cast<size_t>(t)];
            Mat4 m;
            for (int i = 0; i < 4; ++i)
            {
                m(i, 0) = mesh.vertices[k[i]].x();
                m(i, 1) = mesh.vertices[k[i]].y();
                m(i, 2) = mesh.vertices[k[i]].z();
                m(i, 3) = 1.0;
            }
            const Mat4 inv = m.inverse();
            return inv.topRows<3>();
        }
    }

    EnergyResult eikonal_energy(const TetMesh & mesh, const ScalarField & field, EikonalVariant variant)
    {
        if (field.size() != mesh.num_vertices())
        {
            throw validation_error("eikonal_energy: field length != vertex count");
        }
        EnergyResult out(mesh.num_vertices());
        for (Index t = 0; t < mesh.num_tets(); ++t)
        {
            const Tet & k = mesh.tets[static_cast<size_t>(t)];
            const Eigen::Matrix<double, 3, 4> g_mat = gradient_matrix(mesh, t);
            const Vec4 phi(field[k[0]], field[k[1]], field[k[2]], field[k[3]]);
            const Vec3 g = g_mat * phi;
            const double q = g.squaredNorm();

            switch (variant)
            {
                case EikonalVariant::e1a:
                {
                    const double norm = std::sqrt(q);
                    out.value += 0.5 * (norm - 1.0) * (norm - 1.0);
                    if (norm < 1e-12)
                    {
                        break; // gradient of |.| blows up at zero; skip the term
                    }
                    const Vec4 dq = 2.0 * (g_mat.transpose() * g);
                    const Vec4 grad = (norm - 1.0) / (2.0 * norm) * dq;
                    for (int i = 0; i < 4; ++i)
                    {
                        out.grad_phi[static_cast<size_t>(k[i])] += grad[i];
                    }
                    break;
                }
                case EikonalVariant::e1b:
                case EikonalVariant::e1c:
                {
                    const double scale = variant == EikonalVariant::e1c ? mesh.tet_volume(t) : 1.0;
                    out.value += 0.5 * scale * (q - 1.0) * (q - 1.0);
                    const Vec4 grad = scale * (q - 1.0) * 2.0 * (g_mat.transpose() * g);
                    for (int i = 0; i < 4; ++i)
                    {
                        out.grad_phi[static_cast<size_t>(k[i])] += grad[i];
                    }
                    break;
                }
            }
        }
        return out;
    }

    double smeared_heaviside(double phi, double eps_h)
    {
        if (phi < -eps_h) return 0.0;
        if (phi > eps_h) return 1.0;
        return 0.5 + phi / (2.0 * eps_h) + std::sin(M_PI * phi / eps_h) / (2.0 * M_PI);
    }

    double smeared_heaviside_deriv(double phi, double eps_h)
    {
        if (phi < -eps_h || phi > eps_h) return 0.0;
        return (1.0 + std::cos(M_PI * phi / eps_h)) / (2.0 * eps_h);
    }

    EnergyResult mean_curvature_energy(const TetMesh & mesh, const ScalarField & field,
                                       const EnergyConfig & cfg)
    {
        if (field.size() != mesh.num_vertices())
        {
            throw validation_error("mean_curvature_energy: field length != vertex count");
        }
        const double eps_h = cfg.resolved_eps_h(mesh);
        if (!(eps_h > 0.0))
        {
            throw validation_error("mean_curvature_energy: eps_h must be positive");
        }

        EnergyResult out(mesh.num_vertices());
        for (Index t = 0; t < mesh.num_tets(); ++t)
        {
            const Tet & k = mesh.tets[static_cast<size_t>(t)];
            const Eigen::Matrix<double, 3, 4> g_mat = gradient_matrix(mesh, t);
            Vec4 h;
            for (int i = 0; i < 4; ++i)
            {
                h[i] = smeared_heaviside(field[k[i]], eps_h);
            }
            const Vec3 gh = g_mat * h;
            const double norm = gh.norm();
            if (norm < cfg.grad_h_floor)
            {
                continue;
            }
            const double vol = mesh.tet_volume(t);
            out.value += norm * vol;
            const Vec4 dnorm = (g_mat.transpose() * gh) / norm;
            for (int i = 0; i < 4; ++i)
            {
                out.grad_phi[static_cast<size_t>(k[i])] +=
                    vol * dnorm[i] * smeared_heaviside_deriv(field[k[i]], eps_h);
            }
        }
        return out;
    }

    namespace
    {
        // Vertices of the hit triangles' parent edges, filtered by sign.
        void collect_parents(const NormalMap & nm, const std::vector<std::uint8_t> & pixel_sel,
                             const TriMesh & tri, const ScalarField & field, bool want_negative,
                             std::vector<Index> & out)
        {
            std::unordered_set<Index> seen;
            for (size_t i = 0; i < nm.pixel_count(); ++i)
            {
                if (!pixel_sel[i])
                {
                    continue;
                }
                const Index t = nm.fragments[i].triangle;
                for (Index v : tri.triangles[static_cast<size_t>(t)])
                {
                    const VertexProvenance & p = tri.provenance[static_cast<size_t>(v)];
                    for (Index k : { p.k1, p.k2 })
                    {
                        const bool is_negative = field[k] < 0.0;
                        if (is_negative == want_negative)
                        {
                            seen.insert(k);
                        }
                    }
                }
            }
            out.assign(seen.begin(), seen.end());
            std::sort(out.begin(), out.end());
        }
    }

    SilhouetteSets silhouette_sets(const NormalMap & pred, const NormalMap & target,
                                   const TetMesh & mesh, const ScalarField & field,
                                   const TriMesh & tri, const Camera & cam,
                                   const EnergyConfig & cfg)
    {
        if (pred.width != target.width || pred.height != target.height)
        {
            throw validation_error("silhouette_sets: dimension mismatch");
        }
        SilhouetteSets sets;

        // Shrink: covered by pred, not by target.
        std::vector<std::uint8_t> pred_only(pred.pixel_count(), 0);
        bool any_pred_only = false;
        for (size_t i = 0; i < pred.pixel_count(); ++i)
        {
            pred_only[i] = (pred.mask[i] && !target.mask[i]) ? 1 : 0;
            any_pred_only |= pred_only[i] != 0;
        }
        if (any_pred_only)
        {
            collect_parents(pred, pred_only, tri, field, /*want_negative=*/true, sets.shrink);
        }

        // Expand: covered by target, not by pred. Inflate by flipping
        // boundary-adjacent positive vertices to -eps_s, re-render, and see
        // which of those pixels the inflated surface now reaches.
        bool any_target_only = false;
        for (size_t i = 0; i < pred.pixel_count(); ++i)
        {
            if (target.mask[i] && !pred.mask[i])
            {
                any_target_only = true;
                break;
            }
        }
        if (any_target_only)
        {
            const double eps_s = cfg.resolved_eps_s(mesh);
            ScalarField inflated = field;
            std::vector<std::uint8_t> flipped(field.values.size(), 0);
            for (const Edge & e : mesh.edges)
            {
                const bool n0 = field[e[0]] < 0.0;
                const bool n1 = field[e[1]] < 0.0;
                if (n0 != n1)
                {
                    const Index positive = n0 ? e[1] : e[0];
                    if (!flipped[static_cast<size_t>(positive)])
                    {
                        flipped[static_cast<size_t>(positive)] = 1;
                        inflated[positive] = -eps_s;
                    }
                }
            }
            const ScalarField clamped = clamp_small_phi(inflated, cfg.eps_clamp);
            const TriMesh inflated_tri = marching_tetrahedra(mesh, clamped, cfg.eps_clamp);
            if (!inflated_tri.empty())
            {
                const NormalMap inflated_nm = rasterize(inflated_tri, cam);
                std::vector<std::uint8_t> expand_px(pred.pixel_count(), 0);
                for (size_t i = 0; i < pred.pixel_count(); ++i)
                {
                    expand_px[i] =
                        (target.mask[i] && !pred.mask[i] && inflated_nm.mask[i]) ? 1 : 0;
                }
                // Membership uses the pre-inflation signs.
                collect_parents(inflated_nm, expand_px, inflated_tri, field,
                                /*want_negative=*/false, sets.expand);
            }
        }
        return sets;
    }

    EnergyResult shrink_loss(const ScalarField & field, const std::vector<Index> & shrink_set,
                             double eps_s)
    {
        EnergyResult out(field.size());
        for (Index k : shrink_set)
        {
            const double d = field[k] - eps_s;
            out.value += 0.5 * d * d;
            out.grad_phi[static_cast<size_t>(k)] += d;
        }
        return out;
    }

    EnergyResult expand_loss(const ScalarField & field, const std::vector<Index> & expand_set,
                             double eps_s)
    {
        EnergyResult out(field.size());
        for (Index k : expand_set)
        {
            const double d = field[k] + eps_s;
            out.value += 0.5 * d * d;
            out.grad_phi[static_cast<size_t>(k)] += d;
        }
        return out;
    }

    EnergyResult multiview_consistency(const std::vector<ScalarField> & fields, size_t reference_view)
    {
        if (reference_view >= fields.size())
        {
            throw validation_error("multiview_consistency: reference view out of range");
        }
        const ScalarField & ref = fields[reference_view];
        for (const ScalarField & f : fields)
        {
            if (f.size() != ref.size())
            {
                throw validation_error("multiview_consistency: field length mismatch");
            }
        }
        EnergyResult out(ref.size());
        for (size_t c = 0; c < fields.size(); ++c)
        {
            if (c == reference_view)
            {
                continue;
            }
            double sq = 0.0;
            for (Index k = 0; k < ref.size(); ++k)
            {
                const double d = ref[k] - fields[c][k];
                sq += d * d;
            }
            const double norm = std::sqrt(sq + 1e-12);
            out.value += norm;
            for (Index k = 0; k < ref.size(); ++k)
            {
                out.grad_phi[static_cast<size_t>(k)] += (ref[k] - fields[c][k]) / norm;
            }
        }
        return out;
    }
}
