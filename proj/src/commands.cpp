#include "tetrecon/commands.hpp"

#include "tetrecon/icp.hpp"
#include "tetrecon/io.hpp"
#include "tetrecon/parallel.hpp"
#include "tetrecon/scene.hpp"
#include "tetrecon/toml.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <set>

namespace tetrecon
{
    namespace fs = std::filesystem;

    namespace
    {
        // Exit-code mapping shared by every subcommand.
        template <typename F>
        int guarded(F && body)
        {
            try
            {
                return body();
            }
            catch (const toml::parse_error & e)
            {
                std::cerr << "error: " << e.what() << "\n";
                return 1;
            }
            catch (const validation_error & e)
            {
                std::cerr << "error: " << e.what() << "\n";
                return 1;
            }
            catch (const numerical_error & e)
            {
                std::cerr << "numerical error: " << e.what() << "\n";
                return 2;
            }
            catch (const std::exception & e)
            {
                std::cerr << "error: " << e.what() << "\n";
                return 1;
            }
        }

        void write_text(const std::string & path, const std::string & text)
        {
            std::ofstream out(path, std::ios::trunc);
            if (!out)
            {
                throw validation_error("cannot open for writing: " + path);
            }
            out << text;
        }
    }

    int cmd_template(const std::string & scene_toml, const std::string & workdir)
    {
        return guarded([&] {
            const SceneConfig scene = SceneConfig::load(scene_toml, workdir);
            const TetMesh mesh = build_band_tetmesh(scene.shape, scene.cell_size, scene.inflation);
            mesh.validate();
            const ScalarField field = sample_exact_sdf(scene.shape, mesh);

            const fs::path out_dir = scene.resolve(scene.output_dir);
            fs::create_directories(out_dir);
            save_tetmesh(mesh, (out_dir / "template.tets").string());
            save_field(field, (out_dir / "template.phi").string());

            std::cout << "vertices " << mesh.num_vertices() << "\n"
                      << "tets " << mesh.num_tets() << "\n"
                      << "edges " << mesh.num_edges() << "\n"
                      << "avg_edge_length " << mesh.avg_edge_length << "\n";
            return 0;
        });
    }

    int cmd_render(const RenderArgs & args)
    {
        return guarded([&] {
            set_num_threads(args.threads);
            const TetMesh mesh = load_tetmesh(args.mesh_path);
            ScalarField field = load_field(args.field_path);
            if (field.size() != mesh.num_vertices())
            {
                throw validation_error("render: field does not match mesh");
            }
            const Camera cam = load_camera_json(args.camera_path);
            field = clamp_small_phi(field, 1e-8);
            TriMesh tri;
            if (!args.skeleton_path.empty())
            {
                if (args.pose_path.empty())
                {
                    throw validation_error("render: --skeleton needs --pose");
                }
                const Skeleton skel = load_skeleton_json(args.skeleton_path);
                const Pose pose = load_pose_json(args.pose_path, skel);
                const SkinWeights weights = compute_skin_weights(mesh, skel);
                tri = march_skinned(mesh, field, weights, skel, pose);
            }
            else
            {
                tri = marching_tetrahedra(mesh, field);
            }
            const NormalMap nm = args.use_oracle ? raytrace_oracle(tri, cam) : rasterize(tri, cam);
            save_normal_png(nm, args.out_normal_png);
            if (!args.out_depth_png.empty())
            {
                save_depth_png(nm, args.out_depth_png);
            }
            std::cout << "covered_pixels " << nm.covered_count() << "\n";
            return 0;
        });
    }

    int cmd_fit(const std::string & scene_toml, const std::string & workdir, int threads)
    {
        return guarded([&] {
            set_num_threads(threads);
            const SceneConfig scene = SceneConfig::load(scene_toml, workdir);
            const std::vector<View> views = load_views(scene); // validates before compute

            const TetMesh mesh = build_band_tetmesh(scene.shape, scene.cell_size, scene.inflation);
            const ScalarField phi0 = sample_exact_sdf(scene.shape, mesh);

            const fs::path out_dir = scene.resolve(scene.output_dir);
            fs::create_directories(out_dir);

            const FitReport report = fit_sdf(
                mesh, phi0, views, scene.fit, [&](int iteration, const ScalarField & field) {
                    char name[32];
                    std::snprintf(name, sizeof name, "checkpoint_%05d.phi", iteration);
                    save_field(field, (out_dir / name).string());
                });

            save_field(report.final_field, (out_dir / "final.phi").string());
            const ScalarField clamped = clamp_small_phi(report.final_field, scene.fit.energy.eps_clamp);
            const TriMesh tri = marching_tetrahedra(mesh, clamped);
            save_obj(tri, (out_dir / "final.obj").string());
            save_provenance(tri, (out_dir / "final.provenance.txt").string());

            for (size_t v = 0; v < views.size(); ++v)
            {
                const NormalMap nm = rasterize(tri, views[v].camera);
                save_normal_png(nm, (out_dir / ("view" + std::to_string(v) + "_normal.png")).string());
                save_depth_png(nm, (out_dir / ("view" + std::to_string(v) + "_depth.png")).string());
            }

            // NDJSON loss trace: one record per term per iteration.
            std::ostringstream trace;
            for (size_t i = 0; i < report.total_series.size(); ++i)
            {
                for (const auto & [term, series] : report.term_series)
                {
                    trace << nlohmann::json { { "step", i }, { "term", term }, { "value", series[i] } }
                          << "\n";
                }
                trace << nlohmann::json { { "step", i }, { "term", "total" },
                                          { "value", report.total_series[i] } }
                      << "\n";
            }
            write_text((out_dir / "loss.ndjson").string(), trace.str());

            nlohmann::json j;
            j["iterations_run"] = report.iterations_run;
            j["aborted"] = report.aborted;
            j["abort_reason"] = report.abort_reason;
            j["e_normal"] = report.e_normal_per_view;
            j["e_depth"] = report.e_depth_per_view;
            j["timings_ms"] = { { "extract", report.extract_ms },
                                { "render", report.render_ms },
                                { "gradient", report.gradient_ms },
                                { "total", report.total_ms } };
            write_text((out_dir / "report.json").string(), j.dump(2) + "\n");

            std::cout << j.dump(2) << "\n";
            return report.aborted ? 2 : 0;
        });
    }

    int cmd_gradcheck(const GradcheckArgs & args)
    {
        return guarded([&] {
            const TetMesh mesh = load_tetmesh(args.mesh_path);
            ScalarField field = load_field(args.field_path);
            if (field.size() != mesh.num_vertices())
            {
                throw validation_error("gradcheck: field does not match mesh");
            }
            field = clamp_small_phi(field, 1e-3); // keep FD probes away from clamp kinks

            EnergyConfig energy;
            std::function<EnergyResult(const ScalarField &)> loss;
            if (args.term == "eikonal")
            {
                loss = [&](const ScalarField & phi) {
                    return eikonal_energy(mesh, phi, EikonalVariant::e1c);
                };
            }
            else if (args.term == "curvature")
            {
                loss = [&](const ScalarField & phi) { return mean_curvature_energy(mesh, phi, energy); };
            }
            else if (args.term == "normal")
            {
                if (args.camera_path.empty())
                {
                    throw validation_error("gradcheck: term 'normal' needs --camera");
                }
                const Camera cam = load_camera_json(args.camera_path);
                const TriMesh tri0 = marching_tetrahedra(mesh, field);
                const NormalMap target = rasterize(tri0, cam);
                loss = [&, cam, target](const ScalarField & phi) {
                    const TriMesh tri = marching_tetrahedra(mesh, phi);
                    const NormalMap pred = rasterize(tri, cam);
                    const NormalLoss nl = normal_map_loss(pred, target);
                    const std::vector<Vec3> vgrads = backprop_pixels(tri, cam, pred, nl.pixel_grads);
                    const SparseJacobian jac = mt_vertex_jacobian(mesh, phi, tri, energy.eps_grad);
                    EnergyResult out(phi.size());
                    out.value = nl.value;
                    for (size_t i = 0; i < vgrads.size(); ++i)
                    {
                        out.grad_phi[static_cast<size_t>(jac.rows[i].k1)] += jac.rows[i].d_k1.dot(vgrads[i]);
                        out.grad_phi[static_cast<size_t>(jac.rows[i].k2)] += jac.rows[i].d_k2.dot(vgrads[i]);
                    }
                    return out;
                };
            }
            else if (args.term == "shrink" || args.term == "expand")
            {
                std::mt19937 set_rng(args.seed + 1);
                std::uniform_int_distribution<Index> pick(0, mesh.num_vertices() - 1);
                std::set<Index> members;
                while (members.size() < 40)
                {
                    members.insert(pick(set_rng));
                }
                const std::vector<Index> set(members.begin(), members.end());
                const double eps_s = energy.resolved_eps_s(mesh);
                const bool is_shrink = args.term == "shrink";
                loss = [&, set, eps_s, is_shrink](const ScalarField & phi) {
                    return is_shrink ? shrink_loss(phi, set, eps_s) : expand_loss(phi, set, eps_s);
                };
            }
            else
            {
                throw validation_error("gradcheck: unknown term '" + args.term + "'");
            }

            std::mt19937 rng(args.seed);
            std::uniform_int_distribution<Index> pick(0, mesh.num_vertices() - 1);
            std::vector<Index> samples;
            for (int i = 0; i < args.samples; ++i)
            {
                samples.push_back(pick(rng));
            }
            const GradCheckResult result = fd_gradient_check(loss, field, samples, args.h);

            nlohmann::json j;
            j["term"] = args.term;
            j["samples"] = args.samples;
            j["h"] = args.h;
            j["max_rel_error"] = result.max_rel_error;
            j["worst_index"] = result.worst_index;
            std::cout << j.dump(2) << "\n";
            return result.max_rel_error <= args.threshold ? 0 : 2;
        });
    }

    int cmd_eval(const EvalArgs & args)
    {
        return guarded([&] {
            NormalMap pred = load_normal_png(args.pred_png);
            NormalMap target = load_normal_png(args.target_png);
            nlohmann::json j;
            j["e_normal"] = e_normal(pred, target);
            if (!args.pred_depth_png.empty() && !args.target_depth_png.empty() &&
                !args.camera_path.empty())
            {
                load_depth_png(pred, args.pred_depth_png);
                load_depth_png(target, args.target_depth_png);
                const Camera cam = load_camera_json(args.camera_path);
                j["e_depth"] = e_depth(pred, target, cam);
            }
            std::cout << j.dump(2) << "\n";
            return 0;
        });
    }

    int cmd_icp_refine(const IcpRefineArgs & args)
    {
        return guarded([&] {
            if (args.mesh_paths.size() != args.camera_paths.size() || args.mesh_paths.empty())
            {
                throw validation_error("icp-refine: need matched --mesh/--camera lists");
            }
            std::vector<TriMesh> meshes;
            std::vector<Camera> cameras;
            for (size_t i = 0; i < args.mesh_paths.size(); ++i)
            {
                meshes.push_back(load_obj(args.mesh_paths[i]));
                cameras.push_back(load_camera_json(args.camera_paths[i]));
            }

            nlohmann::json transforms = nlohmann::json::array();
            for (size_t v = 0; v < meshes.size(); ++v)
            {
                const IcpResult icp =
                    v == 0 ? IcpResult {} : icp_rigid_align(meshes[v].vertices, meshes[0].vertices);
                const Eigen::Quaterniond q(icp.transform.rotation);
                transforms.push_back({ { "view", v },
                                       { "rotation", { q.w(), q.x(), q.y(), q.z() } },
                                       { "translation",
                                         { icp.transform.translation.x(), icp.transform.translation.y(),
                                           icp.transform.translation.z() } },
                                       { "rms", icp.rms } });
            }

            const std::vector<Camera> refined =
                refine_cameras(meshes, cameras, args.max_outer_iters);
            if (!args.out_dir.empty())
            {
                fs::create_directories(args.out_dir);
                for (size_t v = 0; v < refined.size(); ++v)
                {
                    save_camera_json(refined[v],
                                     (fs::path(args.out_dir) / ("camera" + std::to_string(v) + ".json"))
                                         .string());
                }
            }
            std::cout << transforms.dump(2) << "\n";
            return 0;
        });
    }

    int cmd_prune(const PruneArgs & args)
    {
        return guarded([&] {
            const TetMesh mesh = load_tetmesh(args.mesh_path);
            ScalarField field = load_field(args.field_path);
            const Camera cam = load_camera_json(args.camera_path);
            const NormalMap target = load_normal_png(args.target_png);
            field = clamp_small_phi(field, 1e-8);
            const TriMesh tri = marching_tetrahedra(mesh, field);
            const TriMesh pruned = prune_inconsistent_triangles(tri, cam, target, args.tol_deg);
            save_obj(pruned, args.out_obj);
            std::cout << "kept_triangles " << pruned.num_triangles() << "\n"
                      << "removed_triangles " << tri.num_triangles() - pruned.num_triangles() << "\n";
            return 0;
        });
    }
}
