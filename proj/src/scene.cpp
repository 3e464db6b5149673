#include "tetrecon/scene.hpp"

#include "tetrecon/io.hpp"
#include "tetrecon/toml.hpp"

#include <filesystem>

namespace tetrecon
{
    namespace fs = std::filesystem;

    namespace
    {
        Vec3 vec3_from(const toml::Value & v)
        {
            const auto arr = v.as_double_array();
            if (arr.size() != 3)
            {
                throw validation_error("scene: expected a 3-vector");
            }
            return Vec3(arr[0], arr[1], arr[2]);
        }

        TemplateShape shape_from(const toml::Table & t)
        {
            const std::string kind = t.get_string("kind", "sphere");
            if (kind == "sphere")
            {
                const Vec3 center = t.has("center") ? vec3_from(t.at("center")) : Vec3::Zero();
                return TemplateShape::sphere(center, t.get_double("radius", 1.0));
            }
            if (kind == "capsule")
            {
                if (!t.has("p0") || !t.has("p1"))
                {
                    throw validation_error("scene: capsule template needs p0 and p1");
                }
                return TemplateShape::capsule(vec3_from(t.at("p0")), vec3_from(t.at("p1")),
                                              t.get_double("radius", 0.2));
            }
            if (kind == "capsules")
            {
                auto it = t.table_arrays.find("capsules");
                if (it == t.table_arrays.end() || it->second.empty())
                {
                    throw validation_error("scene: capsules template needs [[template.capsules]] entries");
                }
                std::vector<Capsule> members;
                for (const toml::Table & ct : it->second)
                {
                    Capsule c;
                    if (!ct.has("p0") || !ct.has("p1"))
                    {
                        throw validation_error("scene: capsule entry needs p0 and p1");
                    }
                    c.p0 = vec3_from(ct.at("p0"));
                    c.p1 = vec3_from(ct.at("p1"));
                    c.radius = ct.get_double("radius", 0.2);
                    members.push_back(c);
                }
                return TemplateShape::capsule_union(std::move(members));
            }
            throw validation_error("scene: unknown template kind '" + kind + "'");
        }

        void energy_from(const toml::Table & t, EnergyConfig & e)
        {
            e.eps_clamp = t.get_double("eps_clamp", e.eps_clamp);
            e.eps_grad = t.get_double("eps_grad", e.eps_grad);
            e.eps_h = t.get_double("eps_h", e.eps_h);
            e.eps_s = t.get_double("eps_s", e.eps_s);
            e.grad_h_floor = t.get_double("grad_h_floor", e.grad_h_floor);
            e.w_normal = t.get_double("w_normal", e.w_normal);
            e.w_eikonal = t.get_double("w_eikonal", e.w_eikonal);
            e.w_curvature = t.get_double("w_curvature", e.w_curvature);
            e.w_shrink = t.get_double("w_shrink", e.w_shrink);
            e.w_expand = t.get_double("w_expand", e.w_expand);
            e.w_multiview = t.get_double("w_multiview", e.w_multiview);
            e.w_anchor = t.get_double("w_anchor", e.w_anchor);
        }

        void fit_from(const toml::Table & t, FitConfig & f)
        {
            f.step = t.get_double("step", f.step);
            f.step_decay = t.get_double("step_decay", f.step_decay);
            f.decay_every = static_cast<int>(t.get_int("decay_every", f.decay_every));
            f.iterations = static_cast<int>(t.get_int("iterations", f.iterations));
            f.grad_clip = t.get_double("grad_clip", f.grad_clip);
            f.momentum = t.get_double("momentum", f.momentum);
            f.divergence_loss = t.get_double("divergence_loss", f.divergence_loss);
            f.checkpoint_every = static_cast<int>(t.get_int("checkpoint_every", f.checkpoint_every));
            const std::string mode = t.get_string("mode", "shared");
            if (mode == "shared")
            {
                f.mode = MultiviewMode::shared;
            }
            else if (mode == "per_view")
            {
                f.mode = MultiviewMode::per_view;
            }
            else
            {
                throw validation_error("scene: fit.mode must be 'shared' or 'per_view'");
            }
        }
    }

    std::string SceneConfig::resolve(const std::string & rel) const
    {
        const fs::path p(rel);
        if (p.is_absolute() || workdir.empty())
        {
            return rel;
        }
        return (fs::path(workdir) / p).string();
    }

    SceneConfig SceneConfig::load(const std::string & path, const std::string & workdir)
    {
        const toml::Table root = toml::parse_file(path);
        SceneConfig scene;
        scene.workdir = workdir;

        if (auto it = root.tables.find("template"); it != root.tables.end())
        {
            scene.shape = shape_from(it->second);
        }
        if (auto it = root.tables.find("grid"); it != root.tables.end())
        {
            scene.cell_size = it->second.get_double("cell_size", scene.cell_size);
            scene.inflation = it->second.get_double("inflation", scene.inflation);
        }
        if (auto it = root.tables.find("energy"); it != root.tables.end())
        {
            energy_from(it->second, scene.fit.energy);
        }
        if (auto it = root.tables.find("fit"); it != root.tables.end())
        {
            fit_from(it->second, scene.fit);
        }
        if (auto it = root.tables.find("output"); it != root.tables.end())
        {
            scene.output_dir = it->second.get_string("dir", scene.output_dir);
        }
        scene.skeleton_path = root.get_string("skeleton", "");
        scene.pose_path = root.get_string("pose", "");

        if (auto it = root.table_arrays.find("view"); it != root.table_arrays.end())
        {
            for (const toml::Table & vt : it->second)
            {
                ViewSpec spec;
                spec.camera_path = vt.get_string("camera", "");
                spec.target_path = vt.get_string("target", "");
                spec.depth_path = vt.get_string("depth", "");
                if (spec.camera_path.empty() || spec.target_path.empty())
                {
                    throw validation_error("scene: every [[view]] needs camera and target");
                }
                scene.views.push_back(spec);
            }
        }

        if (!(scene.cell_size > 0.0))
        {
            throw validation_error("scene: grid.cell_size must be positive");
        }
        if (scene.inflation < 0.0)
        {
            throw validation_error("scene: grid.inflation must be non-negative");
        }
        scene.fit.validate();
        return scene;
    }

    void SceneConfig::validate_views() const
    {
        if (views.empty())
        {
            throw validation_error("scene: no [[view]] entries");
        }
        for (const ViewSpec & v : views)
        {
            for (const std::string & p : { resolve(v.camera_path), resolve(v.target_path) })
            {
                if (!fs::exists(p))
                {
                    throw validation_error("scene: missing file " + p);
                }
            }
            if (!v.depth_path.empty() && !fs::exists(resolve(v.depth_path)))
            {
                throw validation_error("scene: missing file " + resolve(v.depth_path));
            }
        }
    }

    std::vector<View> load_views(const SceneConfig & scene)
    {
        scene.validate_views();
        std::vector<View> views;
        views.reserve(scene.views.size());
        for (const SceneConfig::ViewSpec & spec : scene.views)
        {
            View view;
            view.camera = load_camera_json(scene.resolve(spec.camera_path));
            view.target = load_normal_png(scene.resolve(spec.target_path));
            if (view.target.width != view.camera.width || view.target.height != view.camera.height)
            {
                throw validation_error("scene: target " + spec.target_path +
                                       " does not match its camera's pixel dimensions");
            }
            if (!spec.depth_path.empty())
            {
                load_depth_png(view.target, scene.resolve(spec.depth_path));
            }
            views.push_back(std::move(view));
        }
        return views;
    }
}
