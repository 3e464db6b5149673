#pragma once

#include "tetrecon/camera.hpp"
#include "tetrecon/marching_tets.hpp"
#include "tetrecon/normal_map.hpp"
#include "tetrecon/tetmesh.hpp"

namespace tetrecon
{
    /// Clamp levels, smearing bandwidths and per-term weights for the losses.
    struct EnergyConfig
    {
        double eps_clamp = 1e-8;  // extraction clamp
        double eps_grad = 1e-4;   // Jacobian clamp
        double eps_h = 0.0;       // Heaviside bandwidth; 0 = 1.5 * avg edge length
        double eps_s = 0.0;       // silhouette target; 0 = 0.5 * avg edge length
        double grad_h_floor = 1e-8;

        double w_normal = 1.0;
        double w_eikonal = 0.0;
        double w_curvature = 0.0;
        double w_shrink = 0.0;
        double w_expand = 0.0;
        double w_multiview = 0.0;
        double w_anchor = 0.0;

        double resolved_eps_h(const TetMesh & mesh) const
        {
            return eps_h > 0.0 ? eps_h : 1.5 * mesh.avg_edge_length;
        }
        double resolved_eps_s(const TetMesh & mesh) const
        {
            return eps_s > 0.0 ? eps_s : 0.5 * mesh.avg_edge_length;
        }

        void validate() const;
    };

    /// A loss value together with its gradient on the tet-vertex field.
    struct EnergyResult
    {
        double value = 0.0;
        std::vector<double> grad_phi;

        EnergyResult() = default;
        explicit EnergyResult(Index n) : grad_phi(static_cast<size_t>(n), 0.0) {}
    };

    /// Pixel-space half of the normal-map objective.
    struct NormalLoss
    {
        double value = 0.0;
        std::vector<Vec3> pixel_grads; // dL/dn per pixel, zero off the shared coverage
        size_t shared_pixels = 0;
    };

    /**
     * Mean 0.5 |n_pred - n_target|^2 over pixels covered by both maps;
     * pixels covered by exactly one map are the silhouette losses' job and
     * contribute nothing here.
     */
    NormalLoss normal_map_loss(const NormalMap & pred, const NormalMap & target);

    /// Coefficients (a,b,c,d) of the affine interpolant s = a x + b y + c z + d
    /// over one tet; throws numerical_error for a degenerate tet.
    Vec4 tet_linear_coeffs(const std::array<Vec3, 4> & corners, const Vec4 & values);

    enum class EikonalVariant
    {
        e1a, // 0.5 sum (|grad phi| - 1)^2
        e1b, // 0.5 sum (|grad phi|^2 - 1)^2
        e1c, // 0.5 sum Vol (|grad phi|^2 - 1)^2
    };

    EnergyResult eikonal_energy(const TetMesh & mesh, const ScalarField & field, EikonalVariant variant);

    /// Smeared Heaviside with bandwidth eps_h (piecewise sine profile).
    double smeared_heaviside(double phi, double eps_h);
    double smeared_heaviside_deriv(double phi, double eps_h);

    /**
     * Surface-area energy sum_t |grad H(phi)| Vol(t); its gradient flow is
     * motion by mean curvature. Tets with |grad H| below `grad_h_floor`
     * contribute neither value nor gradient.
     */
    EnergyResult mean_curvature_energy(const TetMesh & mesh, const ScalarField & field,
                                       const EnergyConfig & cfg);

    /// Tet vertices selected by the silhouette comparison.
    struct SilhouetteSets
    {
        std::vector<Index> shrink; // negative phi, surface overshoots the target
        std::vector<Index> expand; // positive phi, surface undershoots the target
    };

    /**
     * Classifies silhouette mismatch pixels and maps them back to tet
     * vertices. Shrink: pixels covered by pred but not target -> negative-phi
     * endpoints of the hit triangles' parent edges. Expand: the surface is
     * temporarily inflated (boundary-adjacent positive vertices set to
     * -eps_s), re-extracted and re-rendered; pixels covered by target and the
     * inflated surface but not the original pred vote for the originally
     * positive endpoints. The temporary field is discarded.
     */
    SilhouetteSets silhouette_sets(const NormalMap & pred, const NormalMap & target,
                                   const TetMesh & mesh, const ScalarField & field,
                                   const TriMesh & tri, const Camera & cam,
                                   const EnergyConfig & cfg);

    /// 0.5 sum_{k in set} (phi_k - eps_s)^2 — pulls overshooting negatives to +eps_s.
    EnergyResult shrink_loss(const ScalarField & field, const std::vector<Index> & shrink_set,
                             double eps_s);
    /// 0.5 sum_{k in set} (phi_k + eps_s)^2 — pulls undershooting positives to -eps_s.
    EnergyResult expand_loss(const ScalarField & field, const std::vector<Index> & expand_set,
                             double eps_s);

    /**
     * Cross-view coupling for per-view fields: for view c0,
     * sum_{c != c0} sqrt(|phi - phi(c)|^2 + 1e-12) (vertex-wise L2, smoothed
     * at zero). Gradient is with respect to view c0's field.
     */
    EnergyResult multiview_consistency(const std::vector<ScalarField> & fields, size_t reference_view);
}
