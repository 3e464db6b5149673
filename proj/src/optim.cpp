#include "tetrecon/optim.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace tetrecon
{
    namespace
    {
        using Clock = std::chrono::steady_clock;

        double point_triangle_distance(const Vec3 & p, const Vec3 & a, const Vec3 & b, const Vec3 & c)
        {
            const Vec3 ab = b - a, ac = c - a, ap = p - a;
            const double d1 = ab.dot(ap), d2 = ac.dot(ap);
            if (d1 <= 0 && d2 <= 0) return (p - a).norm();
            const Vec3 bp = p - b;
            const double d3 = ab.dot(bp), d4 = ac.dot(bp);
            if (d3 >= 0 && d4 <= d3) return (p - b).norm();
            const double vc = d1 * d4 - d3 * d2;
            if (vc <= 0 && d1 >= 0 && d3 <= 0)
            {
                const double v = d1 / (d1 - d3);
                return (p - (a + v * ab)).norm();
            }
            const Vec3 cp = p - c;
            const double d5 = ab.dot(cp), d6 = ac.dot(cp);
            if (d6 >= 0 && d5 <= d6) return (p - c).norm();
            const double vb = d5 * d2 - d1 * d6;
            if (vb <= 0 && d2 >= 0 && d6 <= 0)
            {
                const double w = d2 / (d2 - d6);
                return (p - (a + w * ac)).norm();
            }
            const double va = d3 * d6 - d5 * d4;
            if (va <= 0 && (d4 - d3) >= 0 && (d5 - d6) >= 0)
            {
                const double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
                return (p - (b + w * (c - b))).norm();
            }
            const Vec3 n = ab.cross(ac);
            return std::abs(ap.dot(n)) / n.norm();
        }

        double ms_since(Clock::time_point start)
        {
            return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
        }

        void clip_gradient(std::vector<double> & g, double threshold)
        {
            if (threshold <= 0.0)
            {
                return;
            }
            double sq = 0.0;
            for (double v : g)
            {
                sq += v * v;
            }
            const double norm = std::sqrt(sq);
            if (norm > threshold)
            {
                const double scale = threshold / norm;
                for (double & v : g)
                {
                    v *= scale;
                }
            }
        }

        struct IterationTerms
        {
            std::map<std::string, double> values;
            std::vector<double> grad;
            double total = 0.0;
        };

        // One evaluation of the weighted objective and its gradient for a
        // single field against a set of views.
        IterationTerms evaluate(const TetMesh & mesh, const ScalarField & phi,
                                const std::vector<View> & views,
                                const std::vector<const ScalarField *> & coupled_fields,
                                size_t self_index, const FitConfig & cfg, FitReport & report)
        {
            const EnergyConfig & e = cfg.energy;
            IterationTerms out;
            out.grad.assign(static_cast<size_t>(phi.size()), 0.0);

            const auto t_extract = Clock::now();
            const TriMesh tri = marching_tetrahedra(mesh, phi, e.eps_clamp);
            report.extract_ms += ms_since(t_extract);

            if (e.w_normal > 0.0 || e.w_shrink > 0.0 || e.w_expand > 0.0)
            {
                SparseJacobian jac;
                if (!tri.empty())
                {
                    jac = mt_vertex_jacobian(mesh, phi, tri, e.eps_grad);
                }
                double normal_total = 0.0;
                double shrink_total = 0.0;
                double expand_total = 0.0;
                for (const View & view : views)
                {
                    if (tri.empty())
                    {
                        continue;
                    }
                    const auto t_render = Clock::now();
                    const NormalMap pred = rasterize(tri, view.camera);
                    report.render_ms += ms_since(t_render);

                    const auto t_grad = Clock::now();
                    if (e.w_normal > 0.0)
                    {
                        const NormalLoss nl = normal_map_loss(pred, view.target);
                        normal_total += nl.value;
                        if (nl.shared_pixels > 0)
                        {
                            const std::vector<Vec3> vertex_grads =
                                backprop_pixels(tri, view.camera, pred, nl.pixel_grads);
                            for (size_t i = 0; i < vertex_grads.size(); ++i)
                            {
                                const SparseJacobian::Row & row = jac.rows[i];
                                out.grad[static_cast<size_t>(row.k1)] +=
                                    e.w_normal * row.d_k1.dot(vertex_grads[i]);
                                out.grad[static_cast<size_t>(row.k2)] +=
                                    e.w_normal * row.d_k2.dot(vertex_grads[i]);
                            }
                        }
                    }
                    if (e.w_shrink > 0.0 || e.w_expand > 0.0)
                    {
                        const SilhouetteSets sets =
                            silhouette_sets(pred, view.target, mesh, phi, tri, view.camera, e);
                        const double eps_s = e.resolved_eps_s(mesh);
                        if (e.w_shrink > 0.0)
                        {
                            const EnergyResult r = shrink_loss(phi, sets.shrink, eps_s);
                            shrink_total += r.value;
                            for (size_t k = 0; k < r.grad_phi.size(); ++k)
                            {
                                out.grad[k] += e.w_shrink * r.grad_phi[k];
                            }
                        }
                        if (e.w_expand > 0.0)
                        {
                            const EnergyResult r = expand_loss(phi, sets.expand, eps_s);
                            expand_total += r.value;
                            for (size_t k = 0; k < r.grad_phi.size(); ++k)
                            {
                                out.grad[k] += e.w_expand * r.grad_phi[k];
                            }
                        }
                    }
                    report.gradient_ms += ms_since(t_grad);
                }
                if (e.w_normal > 0.0)
                {
                    out.values["normal"] = normal_total;
                    out.total += e.w_normal * normal_total;
                }
                if (e.w_shrink > 0.0)
                {
                    out.values["shrink"] = shrink_total;
                    out.total += e.w_shrink * shrink_total;
                }
                if (e.w_expand > 0.0)
                {
                    out.values["expand"] = expand_total;
                    out.total += e.w_expand * expand_total;
                }
            }

            if (e.w_eikonal > 0.0)
            {
                const EnergyResult r = eikonal_energy(mesh, phi, EikonalVariant::e1c);
                out.values["eikonal"] = r.value;
                out.total += e.w_eikonal * r.value;
                for (size_t k = 0; k < r.grad_phi.size(); ++k)
                {
                    out.grad[k] += e.w_eikonal * r.grad_phi[k];
                }
            }
            if (e.w_curvature > 0.0)
            {
                const EnergyResult r = mean_curvature_energy(mesh, phi, e);
                out.values["curvature"] = r.value;
                out.total += e.w_curvature * r.value;
                for (size_t k = 0; k < r.grad_phi.size(); ++k)
                {
                    out.grad[k] += e.w_curvature * r.grad_phi[k];
                }
            }
            if (e.w_multiview > 0.0 && coupled_fields.size() > 1)
            {
                std::vector<ScalarField> snapshot;
                snapshot.reserve(coupled_fields.size());
                for (const ScalarField * f : coupled_fields)
                {
                    snapshot.push_back(*f);
                }
                const EnergyResult r = multiview_consistency(snapshot, self_index);
                out.values["multiview"] = r.value;
                out.total += e.w_multiview * r.value;
                for (size_t k = 0; k < r.grad_phi.size(); ++k)
                {
                    out.grad[k] += e.w_multiview * r.grad_phi[k];
                }
            }
            if (e.w_anchor > 0.0 && !cfg.anchor.empty())
            {
                if (cfg.anchor.size() != phi.values.size())
                {
                    throw validation_error("fit_sdf: anchor field length mismatch");
                }
                double v = 0.0;
                for (size_t k = 0; k < phi.values.size(); ++k)
                {
                    const double d = phi.values[k] - cfg.anchor[k];
                    v += 0.5 * d * d;
                    out.grad[k] += e.w_anchor * d;
                }
                out.values["anchor"] = v;
                out.total += e.w_anchor * v;
            }
            return out;
        }
    }

    void FitConfig::validate() const
    {
        if (!(step > 0.0))
        {
            throw validation_error("FitConfig: step must be positive");
        }
        if (iterations < 0)
        {
            throw validation_error("FitConfig: iteration budget must be >= 0");
        }
        if (momentum < 0.0 || momentum >= 1.0)
        {
            throw validation_error("FitConfig: momentum must lie in [0, 1)");
        }
        energy.validate();
    }

    FitReport fit_sdf(const TetMesh & mesh, const ScalarField & phi0, const std::vector<View> & views,
                      const FitConfig & cfg, const FitObserver & observer)
    {
        cfg.validate();
        if (views.empty())
        {
            throw validation_error("fit_sdf: need at least one view");
        }
        if (phi0.size() != mesh.num_vertices())
        {
            throw validation_error("fit_sdf: field length != vertex count");
        }
        for (const View & v : views)
        {
            v.camera.validate();
        }

        const auto t_total = Clock::now();
        FitReport report;

        const size_t n_fields = cfg.mode == MultiviewMode::per_view ? views.size() : 1;
        // The optimization variable is re-clamped at the Jacobian level so
        // every iteration satisfies the gradient-clamp precondition.
        std::vector<ScalarField> fields(n_fields, clamp_small_phi(phi0, cfg.energy.eps_grad));
        std::vector<std::vector<double>> velocity(
            n_fields, std::vector<double>(static_cast<size_t>(phi0.size()), 0.0));

        double step = cfg.step;
        for (int iter = 0; iter < cfg.iterations; ++iter)
        {
            double iter_total = 0.0;
            std::map<std::string, double> iter_terms;
            std::vector<const ScalarField *> coupled;
            coupled.reserve(n_fields);
            for (const ScalarField & f : fields)
            {
                coupled.push_back(&f);
            }

            for (size_t fi = 0; fi < n_fields; ++fi)
            {
                const std::vector<View> view_subset =
                    cfg.mode == MultiviewMode::per_view ? std::vector<View> { views[fi] } : views;
                IterationTerms terms =
                    evaluate(mesh, fields[fi], view_subset, coupled, fi, cfg, report);
                iter_total += terms.total;
                for (const auto & [name, value] : terms.values)
                {
                    iter_terms[name] += value;
                }

                if (!std::isfinite(terms.total) || terms.total > cfg.divergence_loss)
                {
                    report.aborted = true;
                    report.abort_reason = "loss diverged at iteration " + std::to_string(iter) +
                                          " (value " + std::to_string(terms.total) + ")";
                    break;
                }

                clip_gradient(terms.grad, cfg.grad_clip);
                std::vector<double> & vel = velocity[fi];
                for (size_t k = 0; k < terms.grad.size(); ++k)
                {
                    vel[k] = cfg.momentum * vel[k] - step * terms.grad[k];
                    fields[fi].values[k] += vel[k];
                }
                fields[fi] = clamp_small_phi(fields[fi], cfg.energy.eps_grad);
            }
            if (report.aborted)
            {
                break;
            }

            report.total_series.push_back(iter_total);
            for (const auto & [name, value] : iter_terms)
            {
                report.term_series[name].push_back(value);
            }
            report.iterations_run = iter + 1;

            if (cfg.redistance_every > 0 && (iter + 1) % cfg.redistance_every == 0)
            {
                for (ScalarField & f : fields)
                {
                    f = clamp_small_phi(redistance(mesh, f, cfg.energy.eps_clamp),
                                        cfg.energy.eps_grad);
                }
            }
            if (cfg.decay_every > 0 && (iter + 1) % cfg.decay_every == 0)
            {
                step *= cfg.step_decay;
            }
            if (observer && cfg.checkpoint_every > 0 && (iter + 1) % cfg.checkpoint_every == 0)
            {
                observer(iter + 1, fields[0]);
            }
        }

        // Consensus output: in per-view mode the mean field, else the field.
        if (cfg.mode == MultiviewMode::per_view)
        {
            report.per_view_fields = fields;
            ScalarField mean(phi0.size(), 0.0);
            for (const ScalarField & f : fields)
            {
                for (Index k = 0; k < f.size(); ++k)
                {
                    mean[k] += f[k] / static_cast<double>(n_fields);
                }
            }
            report.final_field = std::move(mean);
        }
        else
        {
            report.final_field = fields[0];
        }

        // Final per-view metrics on the consensus field.
        const ScalarField final_clamped = clamp_small_phi(report.final_field, cfg.energy.eps_clamp);
        const TriMesh tri = marching_tetrahedra(mesh, final_clamped, cfg.energy.eps_clamp);
        for (const View & view : views)
        {
            if (tri.empty())
            {
                report.e_normal_per_view.push_back(1.0);
                report.e_depth_per_view.push_back(0.0);
                continue;
            }
            const NormalMap pred = rasterize(tri, view.camera);
            report.e_normal_per_view.push_back(e_normal(pred, view.target));
            report.e_depth_per_view.push_back(e_depth(pred, view.target, view.camera));
        }
        report.total_ms = ms_since(t_total);
        return report;
    }

    double e_normal(const NormalMap & pred, const NormalMap & target)
    {
        if (pred.width != target.width || pred.height != target.height)
        {
            throw validation_error("e_normal: dimension mismatch");
        }
        double total = 0.0;
        for (size_t i = 0; i < pred.pixel_count(); ++i)
        {
            double dot;
            if (pred.mask[i] && target.mask[i])
            {
                dot = std::clamp(pred.normals[i].dot(target.normals[i]), -1.0, 1.0);
            }
            else if (pred.mask[i] != target.mask[i])
            {
                dot = -1.0; // silhouette mismatch
            }
            else
            {
                dot = 1.0; // covered by neither
            }
            const double err = 0.5 * (1.0 - dot);
            total += err * err;
        }
        return total / static_cast<double>(pred.pixel_count());
    }

    double e_depth(const NormalMap & pred, const NormalMap & target, const Camera & cam,
                   double mismatch_depth)
    {
        if (pred.width != target.width || pred.height != target.height)
        {
            throw validation_error("e_depth: dimension mismatch");
        }
        double total = 0.0;
        for (size_t i = 0; i < pred.pixel_count(); ++i)
        {
            double diff = 0.0;
            if (pred.mask[i] && target.mask[i])
            {
                diff = depth_from_screen_z(pred.depth[i], cam) -
                       depth_from_screen_z(target.depth[i], cam);
            }
            else if (pred.mask[i] != target.mask[i])
            {
                diff = mismatch_depth;
            }
            total += diff * diff;
        }
        return total / static_cast<double>(pred.pixel_count());
    }

    TriMesh prune_inconsistent_triangles(const TriMesh & tri, const Camera & cam,
                                         const NormalMap & target, double tol_deg)
    {
        if (!(tol_deg > 0.0))
        {
            throw validation_error("prune_inconsistent_triangles: tolerance must be positive");
        }
        const NormalMap pred = rasterize(tri, cam);
        std::vector<double> err_sum(tri.triangles.size(), 0.0);
        std::vector<int> px_count(tri.triangles.size(), 0);
        for (size_t i = 0; i < pred.pixel_count(); ++i)
        {
            if (!pred.mask[i])
            {
                continue;
            }
            const Index t = pred.fragments[i].triangle;
            double angle_deg = 180.0;
            if (target.mask[i])
            {
                const double dot = std::clamp(pred.normals[i].dot(target.normals[i]), -1.0, 1.0);
                angle_deg = std::acos(dot) * 180.0 / M_PI;
            }
            err_sum[static_cast<size_t>(t)] += angle_deg;
            px_count[static_cast<size_t>(t)] += 1;
        }

        TriMesh out;
        out.vertices = tri.vertices;
        out.provenance = tri.provenance;
        for (size_t t = 0; t < tri.triangles.size(); ++t)
        {
            const bool visible = px_count[t] > 0;
            const double mean_err = visible ? err_sum[t] / px_count[t] : 0.0;
            if (visible && mean_err > tol_deg)
            {
                continue;
            }
            out.triangles.push_back(tri.triangles[t]);
            out.source_tet.push_back(tri.source_tet[t]);
        }
        return out;
    }

    ScalarField redistance(const TetMesh & mesh, const ScalarField & field, double eps)
    {
        const TriMesh tri = marching_tetrahedra(mesh, clamp_small_phi(field, eps), eps);
        if (tri.empty())
        {
            return field; // nothing to measure against
        }
        ScalarField out = field;
#pragma omp parallel for schedule(dynamic, 64)
        for (Index k = 0; k < mesh.num_vertices(); ++k)
        {
            const Vec3 & p = mesh.vertices[static_cast<size_t>(k)];
            double best = std::numeric_limits<double>::max();
            for (const Tri & t : tri.triangles)
            {
                best = std::min(best, point_triangle_distance(p, tri.vertices[t[0]],
                                                              tri.vertices[t[1]], tri.vertices[t[2]]));
            }
            out[k] = field[k] < 0.0 ? -best : best;
        }
        return out;
    }

    GradCheckResult fd_gradient_check(const std::function<EnergyResult(const ScalarField &)> & loss,
                                      const ScalarField & phi, const std::vector<Index> & sample_indices,
                                      double h)
    {
        if (!(h > 0.0))
        {
            throw validation_error("fd_gradient_check: h must be positive");
        }
        const EnergyResult base = loss(phi);
        if (!std::isfinite(base.value))
        {
            throw numerical_error("fd_gradient_check: non-finite loss");
        }
        if (base.grad_phi.size() != phi.values.size())
        {
            throw validation_error("fd_gradient_check: gradient length mismatch");
        }

        GradCheckResult result;
        for (Index idx : sample_indices)
        {
            ScalarField plus = phi;
            ScalarField minus = phi;
            plus[idx] += h;
            minus[idx] -= h;
            const double f_plus = loss(plus).value;
            const double f_minus = loss(minus).value;
            if (!std::isfinite(f_plus) || !std::isfinite(f_minus))
            {
                throw numerical_error("fd_gradient_check: non-finite loss at perturbed point");
            }
            const double numeric = (f_plus - f_minus) / (2.0 * h);
            const double analytic = base.grad_phi[static_cast<size_t>(idx)];
            const double denom = std::max({ std::abs(numeric), std::abs(analytic), 1e-12 });
            const double rel = std::abs(numeric - analytic) / denom;
            if (rel > result.max_rel_error)
            {
                result.max_rel_error = rel;
                result.worst_index = idx;
                result.worst_analytic = analytic;
                result.worst_numeric = numeric;
            }
        }
        return result;
    }
}
