#pragma once

#include <string>
#include <vector>

namespace tetrecon
{
    // Subcommand entry points shared by the CLI and the test suite. Each
    // returns a process exit code: 0 success, 1 validation/config error,
    // 2 numerical failure.

    struct RenderArgs
    {
        std::string mesh_path;
        std::string field_path;
        std::string camera_path;
        std::string out_normal_png;
        std::string out_depth_png; // optional
        std::string skeleton_path; // optional: skin the tet mesh before extraction
        std::string pose_path;     // required with skeleton_path
        bool use_oracle = false;
        int threads = 0; // 0 = leave as-is
    };

    struct GradcheckArgs
    {
        std::string mesh_path;
        std::string field_path;
        std::string term = "eikonal"; // eikonal|curvature|normal|shrink|expand
        std::string camera_path;      // required for term = normal
        int samples = 50;
        double h = 1e-6;
        double threshold = 1e-4;
        unsigned seed = 7;
    };

    struct EvalArgs
    {
        std::string pred_png;
        std::string target_png;
        std::string pred_depth_png;   // optional, with camera
        std::string target_depth_png; // optional
        std::string camera_path;      // optional
    };

    struct IcpRefineArgs
    {
        std::vector<std::string> mesh_paths;   // OBJ, one per view
        std::vector<std::string> camera_paths; // JSON, matched
        std::string out_dir;
        int max_outer_iters = 10;
    };

    struct PruneArgs
    {
        std::string mesh_path;
        std::string field_path;
        std::string camera_path;
        std::string target_png;
        std::string out_obj;
        double tol_deg = 30.0;
    };

    int cmd_template(const std::string & scene_toml, const std::string & workdir);
    int cmd_render(const RenderArgs & args);
    int cmd_fit(const std::string & scene_toml, const std::string & workdir, int threads = 0);
    int cmd_gradcheck(const GradcheckArgs & args);
    int cmd_eval(const EvalArgs & args);
    int cmd_icp_refine(const IcpRefineArgs & args);
    int cmd_prune(const PruneArgs & args);
}
