#include "tetrecon/commands.hpp"

#include <CLI11.hpp>

int main(int argc, char ** argv)
{
    CLI::App app { "tetrecon: tetrahedral-SDF surface extraction, differentiable normal-map "
                   "rendering and fitting" };
    app.require_subcommand(1);

    std::string workdir = ".";
    app.add_option("--workdir", workdir, "Directory relative paths resolve against")
        ->capture_default_str();

    std::string scene_path;
    int threads = 0;

    auto * tmpl = app.add_subcommand("template", "Build the template tet mesh and its exact SDF");
    tmpl->add_option("scene", scene_path, "Scene TOML file")->required();

    tetrecon::RenderArgs render;
    auto * rend = app.add_subcommand("render", "Render normal/depth maps from a mesh + field");
    rend->add_option("--mesh", render.mesh_path, "Tet mesh file")->required();
    rend->add_option("--field", render.field_path, "Scalar field file")->required();
    rend->add_option("--camera", render.camera_path, "Camera JSON")->required();
    rend->add_option("--out", render.out_normal_png, "Output normal PNG")->required();
    rend->add_option("--depth-out", render.out_depth_png, "Optional output depth PNG");
    rend->add_option("--skeleton", render.skeleton_path, "Skeleton JSON (skin before extraction)");
    rend->add_option("--pose", render.pose_path, "Pose JSON (with --skeleton)");
    rend->add_flag("--oracle", render.use_oracle, "Use the ray-casting reference path");
    rend->add_option("--threads", render.threads, "Worker threads (1 = deterministic)");

    auto * fit = app.add_subcommand("fit", "Fit the field to the scene's target normal maps");
    fit->add_option("scene", scene_path, "Scene TOML file")->required();
    fit->add_option("--threads", threads, "Worker threads (1 = deterministic)");

    tetrecon::EvalArgs eval;
    auto * ev = app.add_subcommand("eval", "Normal/depth error between two rendered maps");
    ev->add_option("--pred", eval.pred_png, "Predicted normal PNG")->required();
    ev->add_option("--target", eval.target_png, "Target normal PNG")->required();
    ev->add_option("--pred-depth", eval.pred_depth_png, "Predicted depth PNG");
    ev->add_option("--target-depth", eval.target_depth_png, "Target depth PNG");
    ev->add_option("--camera", eval.camera_path, "Camera JSON (for depth conversion)");

    tetrecon::GradcheckArgs gradcheck;
    auto * gc = app.add_subcommand("gradcheck", "Finite-difference check of analytic gradients");
    gc->add_option("--mesh", gradcheck.mesh_path, "Tet mesh file")->required();
    gc->add_option("--field", gradcheck.field_path, "Scalar field file")->required();
    gc->add_option("--term", gradcheck.term, "eikonal|curvature|normal|shrink|expand")->capture_default_str();
    gc->add_option("--camera", gradcheck.camera_path, "Camera JSON (term = normal)");
    gc->add_option("--samples", gradcheck.samples, "Sampled field indices")->capture_default_str();
    gc->add_option("--fd-step", gradcheck.h, "Central-difference step")->capture_default_str();
    gc->add_option("--threshold", gradcheck.threshold, "Max acceptable relative error")
        ->capture_default_str();
    gc->add_option("--seed", gradcheck.seed, "Sampling seed")->capture_default_str();

    tetrecon::IcpRefineArgs icp;
    auto * icpcmd = app.add_subcommand("icp-refine", "Align per-view meshes and update cameras");
    icpcmd->add_option("--mesh", icp.mesh_paths, "Per-view OBJ meshes")->required();
    icpcmd->add_option("--camera", icp.camera_paths, "Per-view camera JSONs")->required();
    icpcmd->add_option("--out", icp.out_dir, "Directory for refined cameras");
    icpcmd->add_option("--iters", icp.max_outer_iters, "Outer refinement iterations")
        ->capture_default_str();

    tetrecon::PruneArgs prune;
    auto * pr = app.add_subcommand("prune", "Drop triangles inconsistent with a target normal map");
    pr->add_option("--mesh", prune.mesh_path, "Tet mesh file")->required();
    pr->add_option("--field", prune.field_path, "Scalar field file")->required();
    pr->add_option("--camera", prune.camera_path, "Camera JSON")->required();
    pr->add_option("--target", prune.target_png, "Target normal PNG")->required();
    pr->add_option("--out", prune.out_obj, "Output OBJ")->required();
    pr->add_option("--tol", prune.tol_deg, "Mean angular error tolerance (degrees)")
        ->capture_default_str();

    CLI11_PARSE(app, argc, argv);

    const auto resolve = [&](std::string & p) {
        if (!p.empty() && p.front() != '/' && workdir != ".")
        {
            p = workdir + "/" + p;
        }
    };

    if (tmpl->parsed())
    {
        resolve(scene_path);
        return tetrecon::cmd_template(scene_path, workdir);
    }
    if (rend->parsed())
    {
        for (auto * p : { &render.mesh_path, &render.field_path, &render.camera_path,
                          &render.out_normal_png, &render.out_depth_png, &render.skeleton_path,
                          &render.pose_path })
        {
            resolve(*p);
        }
        return tetrecon::cmd_render(render);
    }
    if (fit->parsed())
    {
        resolve(scene_path);
        return tetrecon::cmd_fit(scene_path, workdir, threads);
    }
    if (ev->parsed())
    {
        for (auto * p : { &eval.pred_png, &eval.target_png, &eval.pred_depth_png,
                          &eval.target_depth_png, &eval.camera_path })
        {
            resolve(*p);
        }
        return tetrecon::cmd_eval(eval);
    }
    if (gc->parsed())
    {
        for (auto * p : { &gradcheck.mesh_path, &gradcheck.field_path, &gradcheck.camera_path })
        {
            resolve(*p);
        }
        return tetrecon::cmd_gradcheck(gradcheck);
    }
    if (icpcmd->parsed())
    {
        for (auto & p : icp.mesh_paths)
        {
            resolve(p);
        }
        for (auto & p : icp.camera_paths)
        {
            resolve(p);
        }
        resolve(icp.out_dir);
        return tetrecon::cmd_icp_refine(icp);
    }
    if (pr->parsed())
    {
        for (auto * p : { &prune.mesh_path, &prune.field_path, &prune.camera_path,
                          &prune.target_png, &prune.out_obj })
        {
            resolve(*p);
        }
        return tetrecon::cmd_prune(prune);
    }
    return 1;
}
