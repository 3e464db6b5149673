#pragma once

#include "tetrecon/energy.hpp"
#include "tetrecon/render.hpp"

#include <functional>
#include <map>

namespace tetrecon
{
    /// One supervision view: a camera and its target normal map.
    struct View
    {
        Camera camera;
        NormalMap target;
    };

    enum class MultiviewMode
    {
        shared,   // one field fitted against all views jointly
        per_view, // one field per view, coupled by the consistency term
    };

    struct FitConfig
    {
        double step = 2e-3;          // descent step size
        double step_decay = 1.0;     // multiplier applied every decay_every iterations
        int decay_every = 0;         // 0 = constant step
        int iterations = 200;
        double grad_clip = 1e3;      // global L2 clip threshold, <= 0 disables
        double momentum = 0.0;       // heavy-ball coefficient
        double divergence_loss = 1e6;
        MultiviewMode mode = MultiviewMode::shared;
        EnergyConfig energy;
        std::vector<double> anchor;  // optional anchor field for w_anchor
        int checkpoint_every = 0;    // 0 = no checkpoints (driver-level concern)
        int redistance_every = 0;    // 0 = off; else rebuild the field as an
                                     // exact signed distance every K iterations

        void validate() const;
    };

    struct FitReport
    {
        int iterations_run = 0;
        bool aborted = false;
        std::string abort_reason;
        std::map<std::string, std::vector<double>> term_series; // per-iteration values
        std::vector<double> total_series;
        ScalarField final_field;
        std::vector<ScalarField> per_view_fields; // per_view mode only
        std::vector<double> e_normal_per_view;
        std::vector<double> e_depth_per_view;
        double extract_ms = 0.0;
        double render_ms = 0.0;
        double gradient_ms = 0.0;
        double total_ms = 0.0;
    };

    /**
     * Fits the field to the target normal maps by clipped gradient descent
     * through marching tetrahedra and the rasterizer, with the regularizers
     * and silhouette terms weighted by cfg.energy. The total loss is not
     * guaranteed to decrease monotonically. Divergence (non-finite or huge
     * loss) aborts with a partial report instead of throwing.
     */
    using FitObserver = std::function<void(int iteration, const ScalarField & field)>;

    FitReport fit_sdf(const TetMesh & mesh, const ScalarField & phi0, const std::vector<View> & views,
                      const FitConfig & cfg, const FitObserver & observer = {});

    /**
     * Normal-map error: mean over all pixels of (0.5 (1 - n_pred . n_target))^2,
     * with the dot product replaced by -1 where exactly one map covers the
     * pixel and by +1 where neither does.
     */
    double e_normal(const NormalMap & pred, const NormalMap & target);

    /**
     * Depth error in meters^2: mean squared difference of camera-space
     * depths, substituting `mismatch_depth` (the shell thickness, 0.2 m) for
     * silhouette-mismatch pixels.
     */
    double e_depth(const NormalMap & pred, const NormalMap & target, const Camera & cam,
                   double mismatch_depth = 0.2);

    /**
     * Drops triangles whose rendered pixels disagree with the target by more
     * than `tol_deg` mean angular error; pixels the target does not cover
     * count as 180 degrees. Triangles with no rendered pixels are kept. The
     * result may be non-watertight.
     */
    TriMesh prune_inconsistent_triangles(const TriMesh & tri, const Camera & cam,
                                         const NormalMap & target, double tol_deg);

    /**
     * Rebuilds the field as the exact signed distance to its own extracted
     * zero surface (signs preserved). Periodic redistancing keeps long
     * optimizations from accumulating plateaus and ledges away from the
     * moving surface.
     */
    ScalarField redistance(const TetMesh & mesh, const ScalarField & field, double eps = 1e-8);

    struct GradCheckResult
    {
        double max_rel_error = 0.0;
        Index worst_index = -1;
        double worst_analytic = 0.0;
        double worst_numeric = 0.0;
    };

    /**
     * Central-difference check of an analytic gradient: evaluates
     * `loss(phi +- h e_i)` for each sampled index and compares against
     * `loss(phi).grad_phi`. Relative error denominators are floored at 1e-12.
     * Throws numerical_error when the loss is non-finite.
     */
    GradCheckResult fd_gradient_check(const std::function<EnergyResult(const ScalarField &)> & loss,
                                      const ScalarField & phi, const std::vector<Index> & sample_indices,
                                      double h);
}
