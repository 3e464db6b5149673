#include "support.hpp"

#include "tetrecon/marching_tets.hpp"

#include <doctest.h>

#include <random>

using namespace tetrecon;
using namespace tetrecon::testing;

namespace
{
    TetMesh single_unit_tet()
    {
        TetMesh mesh;
        mesh.vertices = { Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, 1) };
        mesh.tets = { { 0, 1, 2, 3 } };
        mesh.build_edge_tables();
        return mesh;
    }

    bool has_vertex_near(const TriMesh & tri, const Vec3 & p, double tol = 1e-12)
    {
        for (const Vec3 & v : tri.vertices)
        {
            if ((v - p).norm() < tol)
            {
                return true;
            }
        }
        return false;
    }
}

TEST_SUITE_BEGIN("marching_tets");

TEST_CASE("clamp_small_phi")
{
    ScalarField field({ 1e-10, -0.5, 0.0, -1e-9, 0.25 });
    const ScalarField clamped = clamp_small_phi(field, 1e-8);
    CHECK(clamped[0] == doctest::Approx(1e-8));
    CHECK(clamped[1] == doctest::Approx(-0.5));
    CHECK(clamped[2] == doctest::Approx(1e-8)); // sign(0) := +1
    CHECK(clamped[3] == doctest::Approx(-1e-8));
    CHECK(clamped[4] == doctest::Approx(0.25));
}

TEST_CASE("single-tet 3-crossing case: symmetric midpoints")
{
    const TetMesh mesh = single_unit_tet();
    const ScalarField field({ -1.0, 1.0, 1.0, 1.0 });
    const TriMesh tri = marching_tetrahedra(mesh, field);
    REQUIRE(tri.num_triangles() == 1);
    REQUIRE(tri.num_vertices() == 3);
    CHECK(has_vertex_near(tri, Vec3(0.5, 0, 0)));
    CHECK(has_vertex_near(tri, Vec3(0, 0.5, 0)));
    CHECK(has_vertex_near(tri, Vec3(0, 0, 0.5)));
}

TEST_CASE("single-tet 4-crossing case: quad split along the fixed diagonal")
{
    const TetMesh mesh = single_unit_tet();
    const ScalarField field({ -1.0, -1.0, 1.0, 1.0 });
    const TriMesh tri = marching_tetrahedra(mesh, field);
    REQUIRE(tri.num_triangles() == 2);
    REQUIRE(tri.num_vertices() == 4);

    // Crossing edges by hand: (0,2), (0,3), (1,2), (1,3); lex order gives
    // ordinals 1 < 2 < 3 < 4, so the diagonal joins the crossings on (0,2)
    // and (1,3). Both triangles must use it.
    Index lo = -1, hi = -1;
    for (size_t i = 0; i < tri.provenance.size(); ++i)
    {
        if (tri.provenance[i].k1 == 0 && tri.provenance[i].k2 == 2)
        {
            lo = static_cast<Index>(i);
        }
        if (tri.provenance[i].k1 == 1 && tri.provenance[i].k2 == 3)
        {
            hi = static_cast<Index>(i);
        }
    }
    REQUIRE(lo >= 0);
    REQUIRE(hi >= 0);
    for (const Tri & t : tri.triangles)
    {
        const bool uses_lo = t[0] == lo || t[1] == lo || t[2] == lo;
        const bool uses_hi = t[0] == hi || t[1] == hi || t[2] == hi;
        CHECK(uses_lo);
        CHECK(uses_hi);
    }
    CHECK(has_vertex_near(tri, Vec3(0, 0.5, 0)));
    CHECK(has_vertex_near(tri, Vec3(0, 0, 0.5)));
    CHECK(has_vertex_near(tri, Vec3(0.5, 0.5, 0)));
    CHECK(has_vertex_near(tri, Vec3(0.5, 0, 0.5)));
}

TEST_CASE("sphere extraction is a closed genus-0 surface")
{
    const BandFixture f = sphere_band();
    const ScalarField clamped = clamp_small_phi(f.exact, 1e-8);
    const TriMesh tri = marching_tetrahedra(f.mesh, clamped);
    REQUIRE(!tri.empty());
    CHECK(check_watertight(tri).empty());
    CHECK(euler_characteristic(tri) == 2);

    // Exactly one vertex per sign-change edge.
    std::set<Index> parent_edges;
    for (const VertexProvenance & p : tri.provenance)
    {
        CHECK(parent_edges.insert(p.edge).second);
    }
}

TEST_CASE("outward orientation: stepping along a face normal increases the field")
{
    const BandFixture f = sphere_band();
    std::mt19937 rng(3);
    const ScalarField field = clamp_small_phi(random_smooth_field(f, rng), 1e-8);
    const TriMesh tri = marching_tetrahedra(f.mesh, field);
    REQUIRE(!tri.empty());
    const double delta = 1e-6;
    for (size_t t = 0; t < tri.triangles.size(); ++t)
    {
        const Tri & face = tri.triangles[t];
        const Vec3 centroid =
            (tri.vertices[face[0]] + tri.vertices[face[1]] + tri.vertices[face[2]]) / 3.0;
        const Vec3 n = (tri.vertices[face[1]] - tri.vertices[face[0]])
                           .cross(tri.vertices[face[2]] - tri.vertices[face[0]])
                           .normalized();
        const Index tet = tri.source_tet[t];
        const double before = interpolate_in_tet(f.mesh, field, tet, centroid);
        const double after = interpolate_in_tet(f.mesh, field, tet, centroid + delta * n);
        CHECK(after > before);
    }
}

TEST_CASE("watertight for 100 random smooth fields")
{
    const BandFixture f = sphere_band();
    std::mt19937 rng(2024);
    for (int trial = 0; trial < 100; ++trial)
    {
        const ScalarField field = clamp_small_phi(random_smooth_field(f, rng), 1e-8);
        const TriMesh tri = marching_tetrahedra(f.mesh, field);
        REQUIRE(!tri.empty());
        const std::string diag = check_watertight(tri);
        if (!diag.empty())
        {
            FAIL("trial ", trial, ": ", diag);
        }
    }
}

TEST_CASE("determinism and scale invariance")
{
    const BandFixture f = sphere_band();
    std::mt19937 rng(5);
    const ScalarField field = clamp_small_phi(random_smooth_field(f, rng), 1e-8);
    const TriMesh a = marching_tetrahedra(f.mesh, field);
    const TriMesh b = marching_tetrahedra(f.mesh, field);
    REQUIRE(a.num_vertices() == b.num_vertices());
    CHECK(a.triangles == b.triangles);
    for (size_t i = 0; i < a.vertices.size(); ++i)
    {
        CHECK(a.vertices[i] == b.vertices[i]); // bitwise
    }

    ScalarField scaled = field;
    for (double & v : scaled.values)
    {
        v *= 7.5;
    }
    const TriMesh c = marching_tetrahedra(f.mesh, scaled);
    REQUIRE(c.num_vertices() == a.num_vertices());
    CHECK(c.triangles == a.triangles);
    for (size_t i = 0; i < a.vertices.size(); ++i)
    {
        CHECK((c.vertices[i] - a.vertices[i]).norm() <= 1e-12);
    }
}

TEST_CASE("negating the field flips every face and keeps vertex positions")
{
    const BandFixture f = sphere_band();
    std::mt19937 rng(8);
    const ScalarField field = clamp_small_phi(random_smooth_field(f, rng), 1e-8);
    ScalarField negated = field;
    for (double & v : negated.values)
    {
        v = -v;
    }
    const TriMesh pos = marching_tetrahedra(f.mesh, field);
    const TriMesh neg = marching_tetrahedra(f.mesh, negated);
    REQUIRE(pos.num_vertices() == neg.num_vertices());
    REQUIRE(pos.num_triangles() == neg.num_triangles());
    for (size_t i = 0; i < pos.vertices.size(); ++i)
    {
        CHECK((pos.vertices[i] - neg.vertices[i]).norm() <= 1e-15);
    }
    for (size_t t = 0; t < pos.triangles.size(); ++t)
    {
        const Tri & a = pos.triangles[t];
        const Tri & b = neg.triangles[t];
        // Same vertex set, opposite winding.
        CHECK(std::set<Index> { a[0], a[1], a[2] } == std::set<Index> { b[0], b[1], b[2] });
        const Vec3 na = (pos.vertices[a[1]] - pos.vertices[a[0]])
                            .cross(pos.vertices[a[2]] - pos.vertices[a[0]]);
        const Vec3 nb = (neg.vertices[b[1]] - neg.vertices[b[0]])
                            .cross(neg.vertices[b[2]] - neg.vertices[b[0]]);
        CHECK(na.dot(nb) < 0.0);
    }
}

TEST_CASE("unclamped field is rejected")
{
    const TetMesh mesh = single_unit_tet();
    const ScalarField field({ -1e-9, 1e-10, 1.0, 1.0 });
    CHECK_THROWS_AS(marching_tetrahedra(mesh, field), validation_error);
    CHECK_THROWS_AS(marching_tetrahedra(mesh, ScalarField(std::vector<double> { 1.0, 1.0 })),
                    validation_error);
}

TEST_CASE("vertex Jacobian: frozen examples and symmetry")
{
    TetMesh mesh = single_unit_tet();
    SUBCASE("symmetric crossing")
    {
        const ScalarField field({ -1.0, 1.0, 1.0, 1.0 });
        const TriMesh tri = marching_tetrahedra(mesh, field);
        const SparseJacobian jac = mt_vertex_jacobian(mesh, field, tri);
        for (size_t i = 0; i < jac.rows.size(); ++i)
        {
            const VertexProvenance & p = tri.provenance[i];
            if (p.k1 == 0 && p.k2 == 1) // edge (0,0,0)-(1,0,0), phi = (-1, 1)
            {
                CHECK(jac.rows[i].d_k1.x() == doctest::Approx(-0.25));
                CHECK(jac.rows[i].d_k1.y() == doctest::Approx(0.0));
                CHECK(jac.rows[i].d_k2.x() == doctest::Approx(-0.25));
            }
        }
    }
    SUBCASE("asymmetric crossing")
    {
        const ScalarField field({ -1.0, 3.0, 3.0, 3.0 });
        const TriMesh tri = marching_tetrahedra(mesh, field);
        const SparseJacobian jac = mt_vertex_jacobian(mesh, field, tri);
        for (size_t i = 0; i < jac.rows.size(); ++i)
        {
            const VertexProvenance & p = tri.provenance[i];
            if (p.k1 == 0 && p.k2 == 1)
            {
                CHECK(tri.vertices[i].x() == doctest::Approx(0.25));
                CHECK(jac.rows[i].d_k1.x() == doctest::Approx(-3.0 / 16.0));
                CHECK(jac.rows[i].d_k2.x() == doctest::Approx(-1.0 / 16.0));
            }
        }
    }
}

TEST_CASE("vertex Jacobian sum identity: shifting both field values moves the crossing")
{
    // d v / d phi_k1 + d v / d phi_k2 = (phi_k2 - phi_k1)(u_k1 - u_k2) / gap^2
    //                                 = (u_k1 - u_k2) / (phi_k2 - phi_k1),
    // the velocity of the crossing under a common shift of both values. It
    // is never zero on a sign-change edge (confirmed against central
    // differences of the common-shift perturbation below).
    TetMesh mesh = single_unit_tet();
    for (const double phi2 : { 0.7, 0.9 })
    {
        const ScalarField field({ -0.7, phi2, 1.0, 1.0 });
        const TriMesh tri = marching_tetrahedra(mesh, field);
        const SparseJacobian jac = mt_vertex_jacobian(mesh, field, tri);
        for (size_t i = 0; i < jac.rows.size(); ++i)
        {
            const VertexProvenance & p = tri.provenance[i];
            if (p.k1 != 0 || p.k2 != 1)
            {
                continue;
            }
            const Vec3 sum = jac.rows[i].d_k1 + jac.rows[i].d_k2;
            const Vec3 expected = (field[p.k2] - field[p.k1]) *
                                  (mesh.vertices[p.k1] - mesh.vertices[p.k2]) /
                                  std::pow(field[p.k1] - field[p.k2], 2);
            CHECK((sum - expected).norm() <= 1e-12);
            CHECK(sum.norm() > 1e-3);

            const double h = 1e-6;
            ScalarField plus = field;
            ScalarField minus = field;
            plus[p.k1] += h;
            plus[p.k2] += h;
            minus[p.k1] -= h;
            minus[p.k2] -= h;
            const auto crossing = [&](const ScalarField & fld) {
                const double p1 = fld[p.k1];
                const double p2 = fld[p.k2];
                return Vec3((-p2 / (p1 - p2)) * mesh.vertices[p.k1] +
                            (p1 / (p1 - p2)) * mesh.vertices[p.k2]);
            };
            const Vec3 fd = (crossing(plus) - crossing(minus)) / (2.0 * h);
            CHECK((sum - fd).norm() <= 1e-6);
        }
    }
}

TEST_CASE("vertex Jacobian matches central finite differences on 1000 random edges")
{
    // The finite-difference oracle re-runs the full extraction and locates
    // the perturbed vertex by its parent edge ordinal.
    const BandFixture f = sphere_band(0.5, 0.18, 0.15);
    std::mt19937 rng(17);
    const double h = 1e-6;

    const auto vertex_on_edge = [](const TriMesh & tri, Index edge) -> Vec3 {
        for (size_t i = 0; i < tri.provenance.size(); ++i)
        {
            if (tri.provenance[i].edge == edge)
            {
                return tri.vertices[i];
            }
        }
        REQUIRE(false);
        return Vec3::Zero();
    };

    int checked = 0;
    while (checked < 1000)
    {
        const ScalarField field = clamp_small_phi(random_smooth_field(f, rng), 1e-8);
        const TriMesh tri = marching_tetrahedra(f.mesh, field);
        const SparseJacobian jac = mt_vertex_jacobian(f.mesh, field, tri);
        std::uniform_int_distribution<size_t> pick(0, tri.vertices.size() - 1);
        for (int s = 0; s < 125 && checked < 1000; ++s)
        {
            const size_t i = pick(rng);
            const VertexProvenance & p = tri.provenance[i];
            if (std::abs(field[p.k1] - field[p.k2]) < 0.1)
            {
                continue;
            }
            for (const Index k : { p.k1, p.k2 })
            {
                ScalarField plus = field;
                ScalarField minus = field;
                plus[k] += h;
                minus[k] -= h;
                const Vec3 v_plus = vertex_on_edge(marching_tetrahedra(f.mesh, plus), p.edge);
                const Vec3 v_minus = vertex_on_edge(marching_tetrahedra(f.mesh, minus), p.edge);
                const Vec3 fd = (v_plus - v_minus) / (2.0 * h);
                const Vec3 analytic = k == p.k1 ? jac.rows[i].d_k1 : jac.rows[i].d_k2;
                const double denom = std::max(fd.norm(), 1e-12);
                CHECK((fd - analytic).norm() / denom <= 1e-5);
            }
            ++checked;
        }
    }
}

TEST_CASE("gradient clamp violation raises")
{
    TetMesh mesh = single_unit_tet();
    const ScalarField field({ -1e-5, 1e-5, 1.0, 1.0 });
    const TriMesh tri = marching_tetrahedra(mesh, field);
    CHECK_THROWS_WITH_AS(mt_vertex_jacobian(mesh, field, tri, 1e-4),
                         doctest::Contains("gradient clamp"), numerical_error);
}

TEST_SUITE_END();
