#include "tetrecon/parallel.hpp"
#include "support.hpp"

#include "tetrecon/icp.hpp"
#include "tetrecon/optim.hpp"

#include <doctest.h>

#include <random>

using namespace tetrecon;
using namespace tetrecon::testing;

namespace
{
    Camera front_camera(int size = 64)
    {
        return Camera::look_at(Vec3::Zero(), 3.0, 0.0, 0.0, 0.9, size, size, 0.1, 10.0);
    }

    RigidTransform small_rigid(double angle, const Vec3 & axis, const Vec3 & t)
    {
        RigidTransform rt;
        rt.rotation = Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix();
        rt.translation = t;
        return rt;
    }

    double rotation_angle_deg(const Mat3 & r)
    {
        const double c = std::clamp((r.trace() - 1.0) / 2.0, -1.0, 1.0);
        return std::acos(c) * 180.0 / M_PI;
    }
}

TEST_SUITE_BEGIN("optim");

TEST_CASE("fd_gradient_check is exact for quadratics")
{
    ScalarField phi(std::vector<double> { 0.3, -1.2, 0.7, 2.5, -0.4 });
    const auto loss = [](const ScalarField & f) {
        EnergyResult r(f.size());
        for (Index k = 0; k < f.size(); ++k)
        {
            r.value += 0.5 * f[k] * f[k];
            r.grad_phi[static_cast<size_t>(k)] = f[k];
        }
        return r;
    };
    std::vector<Index> all(static_cast<size_t>(phi.size()));
    std::iota(all.begin(), all.end(), 0);
    // Central differences have no truncation error on quadratics, so a
    // large h keeps cancellation roundoff below the bound.
    const GradCheckResult r = fd_gradient_check(loss, phi, all, 1e-2);
    CHECK(r.max_rel_error <= 1e-10);

    const auto bad = [](const ScalarField &) {
        EnergyResult r(5);
        r.value = std::numeric_limits<double>::quiet_NaN();
        return r;
    };
    CHECK_THROWS_AS(fd_gradient_check(bad, phi, all, 1e-6), numerical_error);
}

TEST_CASE("e_normal: frozen anchor cases")
{
    NormalMap a(4, 4);
    NormalMap b(4, 4);
    CHECK(e_normal(a, b) == doctest::Approx(0.0)); // nothing covered anywhere

    // One silhouette-mismatch pixel.
    a.mask[5] = 1;
    a.normals[5] = Vec3(0, 0, 1);
    CHECK(e_normal(a, b) == doctest::Approx(1.0 / 16.0));
    // Symmetric in the mismatch.
    CHECK(e_normal(b, a) == doctest::Approx(1.0 / 16.0));

    // Antipodal normals on shared coverage.
    NormalMap c(4, 4);
    NormalMap d(4, 4);
    for (size_t i = 0; i < 8; ++i)
    {
        c.mask[i] = d.mask[i] = 1;
        c.normals[i] = Vec3(0, 0, 1);
        d.normals[i] = Vec3(0, 0, -1);
    }
    CHECK(e_normal(c, d) == doctest::Approx(0.5)); // coverage fraction x 1

    // Identical maps score zero.
    CHECK(e_normal(c, c) == doctest::Approx(0.0));

    CHECK_THROWS_AS(e_normal(a, NormalMap(3, 4)), validation_error);
}

TEST_CASE("e_depth: frozen anchor cases")
{
    const Camera cam = front_camera(4);
    NormalMap a(4, 4);
    NormalMap b(4, 4);
    CHECK(e_depth(a, b, cam) == doctest::Approx(0.0));

    a.mask[3] = 1;
    CHECK(e_depth(a, b, cam) == doctest::Approx(0.04 / 16.0)); // 0.2 m substitution

    // Uniform 0.1 m offset over full coverage.
    NormalMap c(4, 4);
    NormalMap d(4, 4);
    for (size_t i = 0; i < c.pixel_count(); ++i)
    {
        c.mask[i] = d.mask[i] = 1;
        const double z0 = 2.0;
        c.depth[i] = project_to_screen(Vec3(0, 0, z0), cam).z_screen;
        d.depth[i] = project_to_screen(Vec3(0, 0, z0 + 0.1), cam).z_screen;
    }
    CHECK(e_depth(c, d, cam) == doctest::Approx(0.01).epsilon(1e-9));
}

TEST_CASE("procrustes and ICP")
{
    std::mt19937 rng(99);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<Vec3> cloud;
    for (int i = 0; i < 300; ++i)
    {
        cloud.push_back(Vec3(gauss(rng), 0.7 * gauss(rng), 1.3 * gauss(rng)));
    }

    SUBCASE("identity")
    {
        const IcpResult r = icp_rigid_align(cloud, cloud);
        CHECK((r.transform.rotation - Mat3::Identity()).cwiseAbs().maxCoeff() <= 1e-9);
        CHECK(r.transform.translation.norm() <= 1e-9);
        CHECK(r.rms <= 1e-12);
    }
    SUBCASE("known rigid transform is recovered")
    {
        const RigidTransform truth =
            small_rigid(0.4, Vec3(0.3, 1.0, -0.2), Vec3(0.15, -0.35, 0.2));
        std::vector<Vec3> moved;
        for (const Vec3 & p : cloud)
        {
            moved.push_back(truth(p));
        }
        const IcpResult r = icp_rigid_align(cloud, moved);
        CHECK((r.transform.rotation - truth.rotation).cwiseAbs().maxCoeff() <= 1e-6);
        CHECK((r.transform.translation - truth.translation).norm() <= 1e-6);
    }
    SUBCASE("noisy correspondence keeps RMS at the noise level")
    {
        const double sigma = 1e-3;
        for (unsigned seed = 0; seed < 10; ++seed)
        {
            std::mt19937 noise_rng(seed);
            std::normal_distribution<double> noise(0.0, sigma);
            std::vector<Vec3> noisy;
            for (const Vec3 & p : cloud)
            {
                noisy.push_back(p + Vec3(noise(noise_rng), noise(noise_rng), noise(noise_rng)));
            }
            const IcpResult r = icp_rigid_align(cloud, noisy);
            CHECK(r.rms <= 3.0 * sigma);
        }
    }
    SUBCASE("collinear input raises")
    {
        std::vector<Vec3> line;
        for (int i = 0; i < 10; ++i)
        {
            line.push_back(Vec3(i, 2.0 * i, -i));
        }
        CHECK_THROWS_AS(icp_rigid_align(line, cloud), validation_error);
        CHECK_THROWS_AS(icp_rigid_align(cloud, line), validation_error);
    }
}

TEST_CASE("camera refinement")
{
    const TriMesh sphere = icosphere(0.8, 3);
    std::vector<Camera> cameras;
    for (int v = 0; v < 4; ++v)
    {
        cameras.push_back(Camera::look_at(Vec3::Zero(), 3.0, v * M_PI / 2.0, 0.15, 0.9, 64, 64,
                                          0.1, 10.0));
    }

    SUBCASE("identical meshes leave cameras unchanged")
    {
        const std::vector<TriMesh> meshes(4, sphere);
        const std::vector<Camera> refined = refine_cameras(meshes, cameras);
        for (size_t v = 0; v < cameras.size(); ++v)
        {
            CHECK((refined[v].rotation - cameras[v].rotation).cwiseAbs().maxCoeff() <= 1e-9);
            CHECK((refined[v].translation - cameras[v].translation).norm() <= 1e-9);
        }
    }
    SUBCASE("a known rigid error on one view is folded into its camera")
    {
        const RigidTransform g = small_rigid(0.02, Vec3(0.1, 1.0, 0.3), Vec3(0.01, -0.02, 0.015));
        std::vector<TriMesh> meshes(4, sphere);
        for (Vec3 & v : meshes[2].vertices)
        {
            v = g(v);
        }
        const std::vector<Camera> refined = refine_cameras(meshes, cameras);

        // Expected: extrinsics composed with the view's displacement.
        const Mat3 expected_r = cameras[2].rotation * g.rotation;
        const Vec3 expected_t = cameras[2].rotation * g.translation + cameras[2].translation;
        CHECK(rotation_angle_deg(refined[2].rotation.transpose() * expected_r) <= 0.1);
        CHECK((refined[2].translation - expected_t).norm() <= 1e-4);

        // Untouched views stay put.
        for (size_t v : { size_t(0), size_t(1), size_t(3) })
        {
            CHECK(rotation_angle_deg(refined[v].rotation.transpose() * cameras[v].rotation) <= 1e-6);
            CHECK((refined[v].translation - cameras[v].translation).norm() <= 1e-7);
        }
    }
    SUBCASE("outer alignment strictly reduces inter-mesh RMS")
    {
        std::mt19937 rng(7);
        std::uniform_real_distribution<double> unit(-1.0, 1.0);
        std::vector<std::vector<Vec3>> clouds(4, sphere.vertices);
        for (size_t v = 1; v < clouds.size(); ++v)
        {
            const RigidTransform g = small_rigid(0.03 * unit(rng),
                                                 Vec3(unit(rng), unit(rng), unit(rng)),
                                                 0.02 * Vec3(unit(rng), unit(rng), unit(rng)));
            for (Vec3 & p : clouds[v])
            {
                p = g(p);
            }
        }
        const auto total_rms = [&] {
            double sq = 0.0;
            size_t n = 0;
            for (size_t v = 1; v < clouds.size(); ++v)
            {
                for (size_t i = 0; i < clouds[v].size(); ++i)
                {
                    sq += (clouds[v][i] - clouds[0][i]).squaredNorm();
                    ++n;
                }
            }
            return std::sqrt(sq / static_cast<double>(n));
        };

        double prev = total_rms();
        for (int outer = 0; outer < 3; ++outer)
        {
            for (size_t v = 1; v < clouds.size(); ++v)
            {
                const IcpResult icp = icp_rigid_align(clouds[v], clouds[0], 5);
                for (Vec3 & p : clouds[v])
                {
                    p = icp.transform(p);
                }
            }
            const double now = total_rms();
            if (prev > 1e-12)
            {
                CHECK(now < prev);
            }
            prev = now;
        }
    }
}

TEST_CASE("prune_inconsistent_triangles")
{
    const TriMesh sphere = icosphere(0.8, 2);
    const Camera cam = front_camera(96);
    const NormalMap self = rasterize(sphere, cam);

    SUBCASE("perfect agreement removes nothing")
    {
        const TriMesh kept = prune_inconsistent_triangles(sphere, cam, self, 30.0);
        CHECK(kept.num_triangles() == sphere.num_triangles());
    }
    SUBCASE("tiny tolerance removes exactly the visible triangles")
    {
        NormalMap noisy = self;
        std::mt19937 rng(15);
        std::normal_distribution<double> gauss(0.0, 0.05);
        for (Vec3 & n : noisy.normals)
        {
            if (n.norm() > 0)
            {
                n = (n + Vec3(gauss(rng), gauss(rng), gauss(rng))).normalized();
            }
        }
        const TriMesh kept = prune_inconsistent_triangles(sphere, cam, noisy, 0.01);
        std::set<Index> visible;
        for (size_t i = 0; i < self.pixel_count(); ++i)
        {
            if (self.mask[i])
            {
                visible.insert(self.fragments[i].triangle);
            }
        }
        CHECK(kept.num_triangles() == sphere.num_triangles() - static_cast<Index>(visible.size()));
    }
    SUBCASE("a flipped patch is removed at 30 degrees, the rest kept")
    {
        // Flip the target normals over a polar cap facing the camera.
        NormalMap flipped = self;
        const NormalMap oracle = self;
        std::set<Index> patch_triangles;
        for (size_t i = 0; i < flipped.pixel_count(); ++i)
        {
            if (!flipped.mask[i])
            {
                continue;
            }
            const Index t = oracle.fragments[i].triangle;
            const Tri & f = sphere.triangles[static_cast<size_t>(t)];
            const Vec3 centroid =
                (sphere.vertices[f[0]] + sphere.vertices[f[1]] + sphere.vertices[f[2]]) / 3.0;
            if (centroid.z() > 0.7) // cap toward the camera at +z
            {
                flipped.normals[i] = -flipped.normals[i];
                patch_triangles.insert(t);
            }
        }
        REQUIRE(!patch_triangles.empty());
        const TriMesh kept = prune_inconsistent_triangles(sphere, cam, flipped, 30.0);

        // Every patch triangle rendered mostly inside the cap disappears;
        // everything outside the cap stays.
        std::set<std::array<Index, 3>> kept_set;
        for (const Tri & t : kept.triangles)
        {
            kept_set.insert({ t[0], t[1], t[2] });
        }
        Index removed = sphere.num_triangles() - kept.num_triangles();
        CHECK(removed >= static_cast<Index>(patch_triangles.size()) / 2);
        for (size_t t = 0; t < sphere.triangles.size(); ++t)
        {
            const Tri & f = sphere.triangles[t];
            const Vec3 centroid =
                (sphere.vertices[f[0]] + sphere.vertices[f[1]] + sphere.vertices[f[2]]) / 3.0;
            if (centroid.z() < 0.55) // clearly outside the flipped cap
            {
                CHECK(kept_set.count({ f[0], f[1], f[2] }) == 1);
            }
        }
    }
    SUBCASE("never removes triangles with zero rendered pixels")
    {
        NormalMap hostile = self;
        for (Vec3 & n : hostile.normals)
        {
            n = -n; // every visible triangle disagrees completely
        }
        const TriMesh kept = prune_inconsistent_triangles(sphere, cam, hostile, 10.0);
        std::set<Index> visible;
        for (size_t i = 0; i < self.pixel_count(); ++i)
        {
            if (self.mask[i])
            {
                visible.insert(self.fragments[i].triangle);
            }
        }
        CHECK(kept.num_triangles() == sphere.num_triangles() - static_cast<Index>(visible.size()));
    }
}

TEST_CASE("fit_sdf: zero iterations, determinism, fixed-point start")
{
    const BandFixture f = sphere_band(0.5, 0.16, 0.15);
    const Camera cam = front_camera(48);
    const ScalarField target_phi = clamp_small_phi(f.exact, 1e-8);
    const TriMesh target_tri = marching_tetrahedra(f.mesh, target_phi);
    View view;
    view.camera = cam;
    view.target = rasterize(target_tri, cam);

    FitConfig cfg;
    cfg.iterations = 0;
    cfg.energy.w_normal = 1.0;
    SUBCASE("zero iterations returns the clamped input")
    {
        const FitReport report = fit_sdf(f.mesh, f.exact, { view }, cfg);
        const ScalarField expected = clamp_small_phi(f.exact, cfg.energy.eps_grad);
        REQUIRE(report.final_field.size() == expected.size());
        for (Index k = 0; k < expected.size(); ++k)
        {
            CHECK(report.final_field[k] == expected[k]);
        }
        CHECK(report.iterations_run == 0);
    }
    SUBCASE("bitwise deterministic in single-thread mode")
    {
        set_num_threads(1);
        cfg.iterations = 3;
        cfg.energy.w_eikonal = 0.1;
        const FitReport a = fit_sdf(f.mesh, f.exact, { view }, cfg);
        const FitReport b = fit_sdf(f.mesh, f.exact, { view }, cfg);
        set_num_threads(0);
        REQUIRE(a.final_field.size() == b.final_field.size());
        for (Index k = 0; k < a.final_field.size(); ++k)
        {
            CHECK(a.final_field[k] == b.final_field[k]);
        }
        CHECK(a.total_series == b.total_series);
    }
    SUBCASE("starting at the target stays near the loss floor")
    {
        cfg.iterations = 20;
        cfg.step = 1e-3;
        const FitReport report = fit_sdf(f.mesh, f.exact, { view }, cfg);
        REQUIRE(report.iterations_run == 20);
        // Loss starts at ~0 (prediction == target) and must stay tiny.
        CHECK(report.total_series.front() <= 1e-6);
        CHECK(report.total_series.back() <= 1e-4);
        CHECK(report.e_normal_per_view[0] <= 0.005);
    }
}

TEST_CASE("per-view mode couples fields through the consistency term")
{
    const BandFixture f = sphere_band(0.5, 0.2, 0.12);
    const ScalarField target_phi = clamp_small_phi(f.exact, 1e-8);
    const TriMesh target_tri = marching_tetrahedra(f.mesh, target_phi);

    std::vector<View> views;
    for (int v = 0; v < 2; ++v)
    {
        View view;
        view.camera = Camera::look_at(Vec3::Zero(), 3.0, v * M_PI, 0.2, 0.9, 32, 32, 0.1, 10.0);
        view.target = rasterize(target_tri, view.camera);
        views.push_back(std::move(view));
    }

    FitConfig cfg;
    cfg.mode = MultiviewMode::per_view;
    cfg.iterations = 8;
    cfg.step = 5e-3;
    cfg.energy.w_normal = 1.0;
    cfg.energy.w_multiview = 0.5;

    // Start the shared initial field slightly off the target.
    ScalarField phi0 = f.exact;
    for (double & v : phi0.values)
    {
        v -= 0.02;
    }
    const FitReport report = fit_sdf(f.mesh, phi0, views, cfg);
    REQUIRE(report.per_view_fields.size() == 2);
    REQUIRE(report.final_field.size() == f.mesh.num_vertices());
    CHECK(report.term_series.count("multiview") == 1);
    // The consensus output is the mean of the per-view fields.
    for (Index k = 0; k < report.final_field.size(); ++k)
    {
        const double mean =
            0.5 * (report.per_view_fields[0][k] + report.per_view_fields[1][k]);
        CHECK(report.final_field[k] == doctest::Approx(mean).epsilon(1e-12));
    }
}

TEST_CASE("an active eikonal weight keeps the field SDF-like throughout fitting")
{
    const BandFixture f = sphere_band(0.5, 0.16, 0.15);
    const ScalarField target_phi = clamp_small_phi(f.exact, 1e-8);
    View view;
    view.camera = Camera::look_at(Vec3::Zero(), 3.0, 0.4, 0.2, 0.9, 48, 48, 0.1, 10.0);
    view.target = rasterize(marching_tetrahedra(f.mesh, target_phi), view.camera);

    const auto sdf_deviation = [&](const ScalarField & phi) {
        double total = 0.0;
        for (Index t = 0; t < f.mesh.num_tets(); ++t)
        {
            const Tet & k = f.mesh.tets[static_cast<size_t>(t)];
            const Vec4 c = tet_linear_coeffs(
                { f.mesh.vertices[k[0]], f.mesh.vertices[k[1]], f.mesh.vertices[k[2]],
                  f.mesh.vertices[k[3]] },
                Vec4(phi[k[0]], phi[k[1]], phi[k[2]], phi[k[3]]));
            total += std::abs(c.head<3>().squaredNorm() - 1.0);
        }
        return total / static_cast<double>(f.mesh.num_tets());
    };

    ScalarField phi0 = f.exact;
    for (double & v : phi0.values)
    {
        v -= 0.03;
    }
    const double initial = sdf_deviation(phi0);

    FitConfig cfg;
    cfg.iterations = 20;
    cfg.step = 5e-3;
    cfg.checkpoint_every = 1;
    cfg.energy.w_normal = 1.0;
    cfg.energy.w_eikonal = 0.5;
    cfg.energy.w_shrink = 1.0;
    cfg.energy.w_expand = 1.0;

    double worst = 0.0;
    fit_sdf(f.mesh, phi0, { view }, cfg, [&](int, const ScalarField & phi) {
        worst = std::max(worst, sdf_deviation(phi));
    });
    CHECK(worst <= 2.0 * initial);
}

TEST_CASE("redistance rebuilds a unit-gradient field around the same surface")
{
    const BandFixture f = sphere_band(0.5, 0.1, 0.2);
    // Monotone distortion: same zero set, badly scaled values.
    ScalarField warped = f.exact;
    for (double & v : warped.values)
    {
        v = v * (1.0 + 8.0 * std::abs(v));
    }
    const ScalarField restored = redistance(f.mesh, warped);

    for (Index k = 0; k < restored.size(); ++k)
    {
        CHECK((restored[k] < 0.0) == (warped[k] < 0.0)); // signs preserved
    }
    // Restored values approximate the true distance near the surface; the
    // extracted surface is piecewise linear, so allow discretization slack.
    for (Index k = 0; k < restored.size(); ++k)
    {
        if (std::abs(f.exact[k]) < 0.15)
        {
            CHECK(std::abs(restored[k] - f.exact[k]) <= 0.02);
        }
    }
    // The zero crossing stays in place: re-extracting yields vertices on the
    // same sphere.
    const TriMesh tri = marching_tetrahedra(f.mesh, clamp_small_phi(restored, 1e-8));
    for (const Vec3 & v : tri.vertices)
    {
        CHECK(std::abs(v.norm() - 0.5) <= 0.02);
    }
}

TEST_CASE("fit_sdf: divergence aborts with a partial report")
{
    const BandFixture f = sphere_band(0.5, 0.2, 0.12);
    const Camera cam = front_camera(32);
    View view;
    view.camera = cam;
    view.target = rasterize(marching_tetrahedra(f.mesh, clamp_small_phi(f.exact, 1e-8)), cam);

    FitConfig cfg;
    cfg.iterations = 50;
    cfg.step = 1e9; // guaranteed blow-up
    cfg.grad_clip = 0.0;
    cfg.energy.w_eikonal = 10.0;
    cfg.divergence_loss = 1e4;
    const FitReport report = fit_sdf(f.mesh, f.exact, { view }, cfg);
    CHECK(report.aborted);
    CHECK(!report.abort_reason.empty());
    CHECK(report.iterations_run < 50);
}

TEST_SUITE_END();
