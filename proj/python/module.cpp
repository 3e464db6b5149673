#include "tetrecon/energy.hpp"
#include "tetrecon/icp.hpp"
#include "tetrecon/io.hpp"
#include "tetrecon/marching_tets.hpp"
#include "tetrecon/optim.hpp"
#include "tetrecon/parallel.hpp"
#include "tetrecon/render.hpp"
#include "tetrecon/skinning.hpp"
#include "tetrecon/tetmesh.hpp"

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace tetrecon;

namespace
{
    py::array_t<double> points_array(const std::vector<Vec3> & pts)
    {
        py::array_t<double> out({ static_cast<py::ssize_t>(pts.size()), py::ssize_t(3) });
        auto r = out.mutable_unchecked<2>();
        for (py::ssize_t i = 0; i < r.shape(0); ++i)
        {
            for (int c = 0; c < 3; ++c)
            {
                r(i, c) = pts[static_cast<size_t>(i)][c];
            }
        }
        return out;
    }

    std::vector<Vec3> points_from_array(const py::array_t<double, py::array::c_style | py::array::forcecast> & arr)
    {
        if (arr.ndim() != 2 || arr.shape(1) != 3)
        {
            throw validation_error("expected an (N, 3) float array");
        }
        auto r = arr.unchecked<2>();
        std::vector<Vec3> out(static_cast<size_t>(r.shape(0)));
        for (py::ssize_t i = 0; i < r.shape(0); ++i)
        {
            out[static_cast<size_t>(i)] = Vec3(r(i, 0), r(i, 1), r(i, 2));
        }
        return out;
    }

    template <typename T, size_t N>
    py::array_t<Index> index_array(const std::vector<std::array<T, N>> & rows)
    {
        py::array_t<Index> out({ static_cast<py::ssize_t>(rows.size()), static_cast<py::ssize_t>(N) });
        auto r = out.mutable_unchecked<2>();
        for (py::ssize_t i = 0; i < r.shape(0); ++i)
        {
            for (size_t c = 0; c < N; ++c)
            {
                r(i, static_cast<py::ssize_t>(c)) = rows[static_cast<size_t>(i)][c];
            }
        }
        return out;
    }

    ScalarField field_from_array(const py::array_t<double, py::array::c_style | py::array::forcecast> & arr)
    {
        if (arr.ndim() != 1)
        {
            throw validation_error("expected a 1-D float array of field values");
        }
        auto r = arr.unchecked<1>();
        ScalarField field;
        field.values.assign(r.data(0), r.data(0) + r.shape(0));
        return field;
    }

    py::array_t<double> field_array(const ScalarField & field)
    {
        return py::array_t<double>(static_cast<py::ssize_t>(field.values.size()), field.values.data());
    }

    NormalMap normal_map_from_dict(const py::dict & d, int width, int height)
    {
        const auto normals =
            d["normals"].cast<py::array_t<double, py::array::c_style | py::array::forcecast>>();
        const auto mask = d["mask"].cast<py::array_t<bool, py::array::c_style | py::array::forcecast>>();
        if (normals.ndim() != 3 || normals.shape(0) != height || normals.shape(1) != width ||
            normals.shape(2) != 3 || mask.ndim() != 2)
        {
            throw validation_error("normal map dict needs normals (H, W, 3) and mask (H, W)");
        }
        NormalMap nm(width, height);
        auto rn = normals.unchecked<3>();
        auto rm = mask.unchecked<2>();
        const bool has_depth = d.contains("depth");
        py::array_t<double, py::array::c_style | py::array::forcecast> depth;
        if (has_depth)
        {
            depth = d["depth"].cast<py::array_t<double, py::array::c_style | py::array::forcecast>>();
        }
        for (int y = 0; y < height; ++y)
        {
            for (int x = 0; x < width; ++x)
            {
                if (!rm(y, x))
                {
                    continue;
                }
                const size_t i = nm.index(x, y);
                nm.mask[i] = 1;
                nm.normals[i] = Vec3(rn(y, x, 0), rn(y, x, 1), rn(y, x, 2));
                if (has_depth)
                {
                    nm.depth[i] = depth.at(y, x);
                }
            }
        }
        return nm;
    }

    py::dict normal_map_dict(const NormalMap & nm)
    {
        py::array_t<double> normals({ py::ssize_t(nm.height), py::ssize_t(nm.width), py::ssize_t(3) });
        py::array_t<bool> mask({ py::ssize_t(nm.height), py::ssize_t(nm.width) });
        py::array_t<double> depth({ py::ssize_t(nm.height), py::ssize_t(nm.width) });
        py::array_t<Index> triangle({ py::ssize_t(nm.height), py::ssize_t(nm.width) });
        auto rn = normals.mutable_unchecked<3>();
        auto rm = mask.mutable_unchecked<2>();
        auto rd = depth.mutable_unchecked<2>();
        auto rt = triangle.mutable_unchecked<2>();
        for (int y = 0; y < nm.height; ++y)
        {
            for (int x = 0; x < nm.width; ++x)
            {
                const size_t i = nm.index(x, y);
                for (int c = 0; c < 3; ++c)
                {
                    rn(y, x, c) = nm.normals[i][c];
                }
                rm(y, x) = nm.mask[i] != 0;
                rd(y, x) = nm.depth[i];
                rt(y, x) = nm.mask[i] ? nm.fragments[i].triangle : Index(-1);
            }
        }
        py::dict out;
        out["normals"] = normals;
        out["mask"] = mask;
        out["depth"] = depth;
        out["triangle"] = triangle;
        return out;
    }
}

PYBIND11_MODULE(_core, m)
{
    m.doc() = "Tetrahedral-SDF surface extraction, differentiable normal-map rendering and fitting";

    py::register_exception<validation_error>(m, "ValidationError", PyExc_ValueError);
    py::register_exception<numerical_error>(m, "NumericalError", PyExc_ArithmeticError);

    py::class_<TemplateShape>(m, "TemplateShape")
        .def_static("sphere",
                    [](const std::vector<double> & center, double radius) {
                        return TemplateShape::sphere(Vec3(center.at(0), center.at(1), center.at(2)),
                                                     radius);
                    },
                    py::arg("center"), py::arg("radius"))
        .def_static("capsule",
                    [](const std::vector<double> & p0, const std::vector<double> & p1, double radius) {
                        return TemplateShape::capsule(Vec3(p0.at(0), p0.at(1), p0.at(2)),
                                                      Vec3(p1.at(0), p1.at(1), p1.at(2)), radius);
                    },
                    py::arg("p0"), py::arg("p1"), py::arg("radius"))
        .def("sdf", [](const TemplateShape & s, const std::vector<double> & p) {
            return s.sdf(Vec3(p.at(0), p.at(1), p.at(2)));
        });

    py::class_<TetMesh>(m, "TetMesh")
        .def_property_readonly("vertices", [](const TetMesh & mesh) { return points_array(mesh.vertices); })
        .def_property_readonly("tets", [](const TetMesh & mesh) { return index_array(mesh.tets); })
        .def_property_readonly("edges", [](const TetMesh & mesh) { return index_array(mesh.edges); })
        .def_property_readonly("avg_edge_length", [](const TetMesh & mesh) { return mesh.avg_edge_length; })
        .def("__repr__", [](const TetMesh & mesh) {
            return "TetMesh(" + std::to_string(mesh.num_vertices()) + " vertices, " +
                   std::to_string(mesh.num_tets()) + " tets)";
        });

    py::class_<TriMesh>(m, "TriMesh")
        .def_property_readonly("vertices", [](const TriMesh & tri) { return points_array(tri.vertices); })
        .def_property_readonly("triangles", [](const TriMesh & tri) { return index_array(tri.triangles); })
        .def_property_readonly("parent_edges",
                               [](const TriMesh & tri) {
                                   std::vector<std::array<Index, 2>> rows;
                                   rows.reserve(tri.provenance.size());
                                   for (const auto & p : tri.provenance)
                                   {
                                       rows.push_back({ p.k1, p.k2 });
                                   }
                                   return index_array(rows);
                               })
        .def("__repr__", [](const TriMesh & tri) {
            return "TriMesh(" + std::to_string(tri.num_vertices()) + " vertices, " +
                   std::to_string(tri.num_triangles()) + " triangles)";
        });

    py::class_<Camera>(m, "Camera")
        .def_static("look_at",
                    [](const std::vector<double> & target, double radius, double azimuth,
                       double elevation, double fov, int width, int height, double near_plane,
                       double far_plane) {
                        return Camera::look_at(Vec3(target.at(0), target.at(1), target.at(2)), radius,
                                               azimuth, elevation, fov, width, height, near_plane,
                                               far_plane);
                    },
                    py::arg("target"), py::arg("radius"), py::arg("azimuth"), py::arg("elevation"),
                    py::arg("fov"), py::arg("width"), py::arg("height"), py::arg("near") = 0.1,
                    py::arg("far") = 20.0)
        .def_readwrite("width", &Camera::width)
        .def_readwrite("height", &Camera::height);

    m.def("set_num_threads", &set_num_threads, py::arg("n"));

    m.def("build_band_tetmesh", &build_band_tetmesh, py::arg("shape"), py::arg("cell_size"),
          py::arg("inflation"));
    m.def("sample_exact_sdf",
          [](const TemplateShape & shape, const TetMesh & mesh) {
              return field_array(sample_exact_sdf(shape, mesh));
          },
          py::arg("shape"), py::arg("mesh"));
    m.def("average_edge_length", &average_edge_length, py::arg("mesh"));

    m.def("clamp_small_phi",
          [](const py::array_t<double, py::array::c_style | py::array::forcecast> & phi, double eps) {
              return field_array(clamp_small_phi(field_from_array(phi), eps));
          },
          py::arg("phi"), py::arg("eps") = 1e-8);
    m.def("marching_tetrahedra",
          [](const TetMesh & mesh,
             const py::array_t<double, py::array::c_style | py::array::forcecast> & phi, double eps) {
              return marching_tetrahedra(mesh, field_from_array(phi), eps);
          },
          py::arg("mesh"), py::arg("phi"), py::arg("eps") = 1e-8);
    m.def("mt_vertex_jacobian",
          [](const TetMesh & mesh,
             const py::array_t<double, py::array::c_style | py::array::forcecast> & phi,
             const TriMesh & tri, double eps_grad) {
              const SparseJacobian jac = mt_vertex_jacobian(mesh, field_from_array(phi), tri, eps_grad);
              py::array_t<double> d1({ static_cast<py::ssize_t>(jac.rows.size()), py::ssize_t(3) });
              py::array_t<double> d2({ static_cast<py::ssize_t>(jac.rows.size()), py::ssize_t(3) });
              auto r1 = d1.mutable_unchecked<2>();
              auto r2 = d2.mutable_unchecked<2>();
              for (size_t i = 0; i < jac.rows.size(); ++i)
              {
                  for (int c = 0; c < 3; ++c)
                  {
                      r1(static_cast<py::ssize_t>(i), c) = jac.rows[i].d_k1[c];
                      r2(static_cast<py::ssize_t>(i), c) = jac.rows[i].d_k2[c];
                  }
              }
              py::dict out;
              out["d_k1"] = d1;
              out["d_k2"] = d2;
              return out;
          },
          py::arg("mesh"), py::arg("phi"), py::arg("tri"), py::arg("eps_grad") = 1e-4);

    m.def("vertex_normals",
          [](const TriMesh & tri) { return points_array(vertex_normals(tri)); }, py::arg("tri"));
    m.def("rasterize",
          [](const TriMesh & tri, const Camera & cam) { return normal_map_dict(rasterize(tri, cam)); },
          py::arg("tri"), py::arg("camera"));
    m.def("raytrace_oracle",
          [](const TriMesh & tri, const Camera & cam) {
              return normal_map_dict(raytrace_oracle(tri, cam));
          },
          py::arg("tri"), py::arg("camera"));

    m.def("eikonal_energy",
          [](const TetMesh & mesh,
             const py::array_t<double, py::array::c_style | py::array::forcecast> & phi,
             const std::string & variant) {
              EikonalVariant v = EikonalVariant::e1c;
              if (variant == "e1a") v = EikonalVariant::e1a;
              else if (variant == "e1b") v = EikonalVariant::e1b;
              else if (variant != "e1c") throw validation_error("variant must be e1a|e1b|e1c");
              const EnergyResult r = eikonal_energy(mesh, field_from_array(phi), v);
              py::dict out;
              out["value"] = r.value;
              out["grad"] = py::array_t<double>(static_cast<py::ssize_t>(r.grad_phi.size()),
                                                r.grad_phi.data());
              return out;
          },
          py::arg("mesh"), py::arg("phi"), py::arg("variant") = "e1c");
    m.def("mean_curvature_energy",
          [](const TetMesh & mesh,
             const py::array_t<double, py::array::c_style | py::array::forcecast> & phi) {
              EnergyConfig cfg;
              const EnergyResult r = mean_curvature_energy(mesh, field_from_array(phi), cfg);
              py::dict out;
              out["value"] = r.value;
              out["grad"] = py::array_t<double>(static_cast<py::ssize_t>(r.grad_phi.size()),
                                                r.grad_phi.data());
              return out;
          },
          py::arg("mesh"), py::arg("phi"));

    m.def("redistance",
          [](const TetMesh & mesh,
             const py::array_t<double, py::array::c_style | py::array::forcecast> & phi) {
              return field_array(redistance(mesh, field_from_array(phi)));
          },
          py::arg("mesh"), py::arg("phi"));

    m.def("icp_rigid_align",
          [](const py::array_t<double, py::array::c_style | py::array::forcecast> & src,
             const py::array_t<double, py::array::c_style | py::array::forcecast> & dst) {
              const IcpResult r = icp_rigid_align(points_from_array(src), points_from_array(dst));
              py::array_t<double> rot({ py::ssize_t(3), py::ssize_t(3) });
              auto rr = rot.mutable_unchecked<2>();
              for (int i = 0; i < 3; ++i)
                  for (int j = 0; j < 3; ++j)
                      rr(i, j) = r.transform.rotation(i, j);
              py::dict out;
              out["rotation"] = rot;
              out["translation"] = py::array_t<double>(3, r.transform.translation.data());
              out["rms"] = r.rms;
              return out;
          },
          py::arg("src"), py::arg("dst"));

    m.def("save_obj", &save_obj, py::arg("tri"), py::arg("path"));
    m.def("load_obj", &load_obj, py::arg("path"));
    m.def("save_tetmesh", &save_tetmesh, py::arg("mesh"), py::arg("path"));
    m.def("load_tetmesh", &load_tetmesh, py::arg("path"));
    m.def("save_field",
          [](const py::array_t<double, py::array::c_style | py::array::forcecast> & phi,
             const std::string & path) { save_field(field_from_array(phi), path); },
          py::arg("phi"), py::arg("path"));
    m.def("load_field",
          [](const std::string & path) { return field_array(load_field(path)); }, py::arg("path"));

    py::class_<Skeleton>(m, "Skeleton")
        .def_static("from_json", &load_skeleton_json, py::arg("path"))
        .def_property_readonly("num_joints", &Skeleton::num_joints);
    py::class_<Pose>(m, "Pose")
        .def_static("rest", &Pose::rest, py::arg("skeleton"))
        .def_static("from_json", &load_pose_json, py::arg("path"), py::arg("skeleton"))
        .def("rotate_joint",
             [](Pose & pose, size_t joint, const std::vector<double> & axis, double angle,
                const std::vector<double> & translation) {
                 RigidTransform & t = pose.joint_transforms.at(joint);
                 const Mat3 r = Eigen::AngleAxisd(angle, Vec3(axis.at(0), axis.at(1), axis.at(2))
                                                             .normalized())
                                    .toRotationMatrix();
                 t.rotation = r * t.rotation;
                 t.translation = r * t.translation +
                                 Vec3(translation.at(0), translation.at(1), translation.at(2));
             },
             py::arg("joint"), py::arg("axis"), py::arg("angle"),
             py::arg("translation") = std::vector<double> { 0.0, 0.0, 0.0 });
    py::class_<SkinWeights>(m, "SkinWeights");

    m.def("compute_skin_weights", &compute_skin_weights, py::arg("mesh"), py::arg("skeleton"),
          py::arg("delta") = 1e-4);
    m.def("skin_tet_vertices",
          [](const TetMesh & mesh, const SkinWeights & w, const Skeleton & skel, const Pose & pose) {
              return points_array(skin_tet_vertices(mesh, w, skel, pose));
          },
          py::arg("mesh"), py::arg("weights"), py::arg("skeleton"), py::arg("pose"));
    m.def("march_skinned",
          [](const TetMesh & mesh,
             const py::array_t<double, py::array::c_style | py::array::forcecast> & phi,
             const SkinWeights & w, const Skeleton & skel, const Pose & pose) {
              return march_skinned(mesh, field_from_array(phi), w, skel, pose);
          },
          py::arg("mesh"), py::arg("phi"), py::arg("weights"), py::arg("skeleton"), py::arg("pose"));

    m.def("e_depth",
          [](const py::dict & pred, const py::dict & target, const Camera & cam) {
              return e_depth(normal_map_from_dict(pred, cam.width, cam.height),
                             normal_map_from_dict(target, cam.width, cam.height), cam);
          },
          py::arg("pred"), py::arg("target"), py::arg("camera"));
    m.def("save_normal_png",
          [](const py::dict & nm, int width, int height, const std::string & path) {
              save_normal_png(normal_map_from_dict(nm, width, height), path);
          },
          py::arg("nm"), py::arg("width"), py::arg("height"), py::arg("path"));
    m.def("load_normal_png",
          [](const std::string & path) { return normal_map_dict(load_normal_png(path)); },
          py::arg("path"));

    m.def("e_normal",
          [](const py::dict & pred, const py::dict & target, int width, int height) {
              return e_normal(normal_map_from_dict(pred, width, height),
                              normal_map_from_dict(target, width, height));
          },
          py::arg("pred"), py::arg("target"), py::arg("width"), py::arg("height"));

    m.def("fit_sdf",
          [](const TetMesh & mesh,
             const py::array_t<double, py::array::c_style | py::array::forcecast> & phi0,
             const std::vector<std::pair<Camera, py::dict>> & views, int iterations, double step,
             double momentum, double grad_clip, double w_normal, double w_eikonal,
             double w_curvature, double w_shrink, double w_expand, int redistance_every,
             double step_decay, int decay_every) {
              FitConfig cfg;
              cfg.iterations = iterations;
              cfg.step = step;
              cfg.momentum = momentum;
              cfg.grad_clip = grad_clip;
              cfg.redistance_every = redistance_every;
              cfg.step_decay = step_decay;
              cfg.decay_every = decay_every;
              cfg.energy.w_normal = w_normal;
              cfg.energy.w_eikonal = w_eikonal;
              cfg.energy.w_curvature = w_curvature;
              cfg.energy.w_shrink = w_shrink;
              cfg.energy.w_expand = w_expand;

              std::vector<View> native;
              native.reserve(views.size());
              for (const auto & [camera, target] : views)
              {
                  View view;
                  view.camera = camera;
                  view.target = normal_map_from_dict(target, camera.width, camera.height);
                  native.push_back(std::move(view));
              }
              const FitReport report = fit_sdf(mesh, field_from_array(phi0), native, cfg);
              py::dict out;
              out["field"] = field_array(report.final_field);
              out["iterations_run"] = report.iterations_run;
              out["aborted"] = report.aborted;
              out["total_series"] = py::array_t<double>(
                  static_cast<py::ssize_t>(report.total_series.size()), report.total_series.data());
              out["e_normal"] = report.e_normal_per_view;
              out["e_depth"] = report.e_depth_per_view;
              return out;
          },
          py::arg("mesh"), py::arg("phi0"), py::arg("views"), py::arg("iterations") = 100,
          py::arg("step") = 2e-3, py::arg("momentum") = 0.0, py::arg("grad_clip") = 50.0,
          py::arg("w_normal") = 1.0, py::arg("w_eikonal") = 0.0, py::arg("w_curvature") = 0.0,
          py::arg("w_shrink") = 1.0, py::arg("w_expand") = 1.0, py::arg("redistance_every") = 0,
          py::arg("step_decay") = 1.0, py::arg("decay_every") = 0);
}
