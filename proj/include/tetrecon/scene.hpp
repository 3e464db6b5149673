#pragma once

#include "tetrecon/optim.hpp"
#include "tetrecon/template_shape.hpp"

#include <optional>
#include <string>

namespace tetrecon
{
    /**
     * Batch-run description loaded from TOML: template shape, grid
     * parameters, energy/fit settings, supervision views and output
     * locations. Relative paths resolve against the file's work directory.
     */
    struct SceneConfig
    {
        struct ViewSpec
        {
            std::string camera_path;
            std::string target_path;
            std::string depth_path; // optional
        };

        TemplateShape shape = TemplateShape::sphere(Vec3::Zero(), 1.0);
        double cell_size = 0.15;
        double inflation = 0.1;
        FitConfig fit;
        std::vector<ViewSpec> views;
        std::string skeleton_path; // optional
        std::string pose_path;     // optional
        std::string output_dir = "out";
        std::string workdir;

        std::string resolve(const std::string & rel) const;

        /// Parses the TOML file; throws toml::parse_error (with a line
        /// number) on syntax errors and validation_error on bad content.
        static SceneConfig load(const std::string & path, const std::string & workdir);

        /// Checks that every view's files exist; run before any compute.
        void validate_views() const;
    };

    /// Loads the views (cameras + target normal maps + optional depth).
    std::vector<View> load_views(const SceneConfig & scene);
}
