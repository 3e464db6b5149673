#pragma once

// Shared fixtures and independent oracles for the test suites. Everything
// here is deliberately simple and brute-force; the library must agree with
// it, not the other way round.

#include "tetrecon/energy.hpp"
#include "tetrecon/marching_tets.hpp"
#include "tetrecon/render.hpp"
#include "tetrecon/tetmesh.hpp"

#include <map>
#include <random>
#include <set>

namespace tetrecon::testing
{
    struct BandFixture
    {
        TemplateShape shape = TemplateShape::sphere(Vec3::Zero(), 0.5);
        TetMesh mesh;
        ScalarField exact;
        double inflation = 0.0;
    };

    inline BandFixture sphere_band(double radius = 0.5, double cell = 0.12, double inflation = 0.15)
    {
        BandFixture f;
        f.shape = TemplateShape::sphere(Vec3::Zero(), radius);
        f.mesh = build_band_tetmesh(f.shape, cell, inflation);
        f.exact = sample_exact_sdf(f.shape, f.mesh);
        f.inflation = inflation;
        return f;
    }

    /// Smooth random field whose zero level set stays strictly inside the
    /// band: the exact SDF plus low-frequency bumps of bounded amplitude.
    inline ScalarField random_smooth_field(const BandFixture & f, std::mt19937 & rng, int n_bumps = 4)
    {
        std::uniform_real_distribution<double> unit(-1.0, 1.0);
        const double amp_budget = 0.6 * f.inflation;
        ScalarField field = f.exact;
        for (int b = 0; b < n_bumps; ++b)
        {
            const Vec3 center(unit(rng) * 0.6, unit(rng) * 0.6, unit(rng) * 0.6);
            const double amp = unit(rng) * amp_budget / n_bumps;
            const double sigma = 0.25 + 0.15 * std::abs(unit(rng));
            for (Index k = 0; k < field.size(); ++k)
            {
                const double d2 = (f.mesh.vertices[static_cast<size_t>(k)] - center).squaredNorm();
                field[k] += amp * std::exp(-d2 / (2.0 * sigma * sigma));
            }
        }
        return field;
    }

    /// Watertightness: every undirected triangle edge shared by exactly two
    /// triangles, and every directed edge used exactly once (consistent
    /// winding). Returns an empty string on success, a diagnosis otherwise.
    inline std::string check_watertight(const TriMesh & tri)
    {
        std::map<std::pair<Index, Index>, int> undirected;
        std::set<std::pair<Index, Index>> directed;
        for (const Tri & t : tri.triangles)
        {
            for (int e = 0; e < 3; ++e)
            {
                const Index a = t[static_cast<size_t>(e)];
                const Index b = t[static_cast<size_t>((e + 1) % 3)];
                undirected[{ std::min(a, b), std::max(a, b) }] += 1;
                if (!directed.insert({ a, b }).second)
                {
                    return "directed edge used twice (inconsistent winding)";
                }
            }
        }
        for (const auto & [edge, count] : undirected)
        {
            if (count != 2)
            {
                return "undirected edge shared by " + std::to_string(count) + " triangles";
            }
        }
        return {};
    }

    inline long euler_characteristic(const TriMesh & tri)
    {
        std::set<std::pair<Index, Index>> edges;
        std::set<Index> used;
        for (const Tri & t : tri.triangles)
        {
            for (int e = 0; e < 3; ++e)
            {
                const Index a = t[static_cast<size_t>(e)];
                const Index b = t[static_cast<size_t>((e + 1) % 3)];
                edges.insert({ std::min(a, b), std::max(a, b) });
                used.insert(a);
            }
        }
        return static_cast<long>(used.size()) - static_cast<long>(edges.size()) +
               static_cast<long>(tri.triangles.size());
    }

    /// Brute-force point-in-tet containment over the whole mesh.
    inline bool point_in_some_tet(const TetMesh & mesh, const Vec3 & p, double tol = 1e-9)
    {
        for (Index t = 0; t < mesh.num_tets(); ++t)
        {
            const Tet & k = mesh.tets[static_cast<size_t>(t)];
            const Vec3 & a = mesh.vertices[k[0]];
            const Vec3 & b = mesh.vertices[k[1]];
            const Vec3 & c = mesh.vertices[k[2]];
            const Vec3 & d = mesh.vertices[k[3]];
            const auto vol = [](const Vec3 & p0, const Vec3 & p1, const Vec3 & p2, const Vec3 & p3) {
                return (p1 - p0).cross(p2 - p0).dot(p3 - p0);
            };
            const double v = vol(a, b, c, d);
            if (vol(p, b, c, d) >= -tol * std::abs(v) && vol(a, p, c, d) >= -tol * std::abs(v) &&
                vol(a, b, p, d) >= -tol * std::abs(v) && vol(a, b, c, p) >= -tol * std::abs(v))
            {
                return true;
            }
        }
        return false;
    }

    /// Affine interpolant of the field within a tet, evaluated at p.
    inline double interpolate_in_tet(const TetMesh & mesh, const ScalarField & field, Index t,
                                     const Vec3 & p)
    {
        const Tet & k = mesh.tets[static_cast<size_t>(t)];
        const Vec4 coeffs = tet_linear_coeffs(
            { mesh.vertices[k[0]], mesh.vertices[k[1]], mesh.vertices[k[2]], mesh.vertices[k[3]] },
            Vec4(field[k[0]], field[k[1]], field[k[2]], field[k[3]]));
        return coeffs[0] * p.x() + coeffs[1] * p.y() + coeffs[2] * p.z() + coeffs[3];
    }

    /// Triangle mesh of a subdivided icosahedron (no provenance).
    TriMesh icosphere(double radius, int subdivisions);

    /// TriMesh vertices within `rings` triangle-adjacency rings of a
    /// silhouette (a rendered triangle bordering uncovered pixels). Used to
    /// pick coverage-stable vertices for finite-difference checks.
    std::vector<bool> near_silhouette_vertices(const TriMesh & tri, const Camera & cam, int rings);
}
