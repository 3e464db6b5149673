#include "tetrecon/tetmesh.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

namespace tetrecon
{
    namespace
    {
        // The 6 tetrahedra of a unit cube sharing the main diagonal
        // (corner 0 -> corner 7). Corner c encodes offsets (c&1, (c>>1)&1, (c>>2)&1).
        // Each tet follows one axis-order path 0 -> a -> ab -> 7.
        constexpr std::array<std::array<int, 4>, 6> kCubeTets = { {
            { 0, 1, 3, 7 }, // x, y, z
            { 0, 1, 5, 7 }, // x, z, y
            { 0, 2, 3, 7 }, // y, x, z
            { 0, 2, 6, 7 }, // y, z, x
            { 0, 4, 5, 7 }, // z, x, y
            { 0, 4, 6, 7 }, // z, y, x
        } };

        double signed_volume(const Vec3 & a, const Vec3 & b, const Vec3 & c, const Vec3 & d)
        {
            return (b - a).cross(c - a).dot(d - a) / 6.0;
        }

        struct CellKeyHash
        {
            size_t operator()(const std::array<std::int64_t, 3> & k) const
            {
                size_t h = 1469598103934665603ull;
                for (auto v : k)
                {
                    h ^= static_cast<size_t>(v) + 0x9e3779b97f4a7c15ull;
                    h *= 1099511628211ull;
                }
                return h;
            }
        };
    }

    double TetMesh::tet_volume(Index t) const
    {
        const Tet & k = tets[static_cast<size_t>(t)];
        return signed_volume(vertices[k[0]], vertices[k[1]], vertices[k[2]], vertices[k[3]]);
    }

    void TetMesh::build_edge_tables()
    {
        // Local edge order within a tet: (0,1),(0,2),(0,3),(1,2),(1,3),(2,3).
        static constexpr std::array<std::array<int, 2>, 6> local = { {
            { 0, 1 }, { 0, 2 }, { 0, 3 }, { 1, 2 }, { 1, 3 }, { 2, 3 } } };

        edges.clear();
        edges.reserve(tets.size() * 6);
        for (const Tet & t : tets)
        {
            for (const auto & le : local)
            {
                Index a = t[le[0]];
                Index b = t[le[1]];
                if (a > b) std::swap(a, b);
                edges.push_back({ a, b });
            }
        }
        std::sort(edges.begin(), edges.end());
        edges.erase(std::unique(edges.begin(), edges.end()), edges.end());

        std::unordered_map<std::uint64_t, Index> ordinal;
        ordinal.reserve(edges.size() * 2);
        const auto key = [](Index a, Index b) {
            return (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint32_t>(b);
        };
        for (size_t i = 0; i < edges.size(); ++i)
        {
            ordinal.emplace(key(edges[i][0], edges[i][1]), static_cast<Index>(i));
        }

        tet_edges.resize(tets.size());
        for (size_t t = 0; t < tets.size(); ++t)
        {
            for (int e = 0; e < 6; ++e)
            {
                Index a = tets[t][local[e][0]];
                Index b = tets[t][local[e][1]];
                if (a > b) std::swap(a, b);
                tet_edges[t][e] = ordinal.at(key(a, b));
            }
        }

        double total = 0.0;
        for (const Edge & e : edges)
        {
            total += (vertices[e[0]] - vertices[e[1]]).norm();
        }
        avg_edge_length = edges.empty() ? 0.0 : total / static_cast<double>(edges.size());
    }

    void TetMesh::validate() const
    {
        if (vertices.empty() || tets.empty())
        {
            throw validation_error("TetMesh: empty mesh");
        }
        for (const Vec3 & v : vertices)
        {
            if (!v.allFinite())
            {
                throw validation_error("TetMesh: non-finite vertex");
            }
        }
        for (size_t t = 0; t < tets.size(); ++t)
        {
            for (Index k : tets[t])
            {
                if (k < 0 || k >= num_vertices())
                {
                    throw validation_error("TetMesh: tet index out of range");
                }
            }
            const double vol = tet_volume(static_cast<Index>(t));
            if (!(vol > 1e-15))
            {
                throw validation_error("TetMesh: degenerate or negatively oriented tet");
            }
        }
        if (edges.size() < 6 || tet_edges.size() != tets.size())
        {
            throw validation_error("TetMesh: edge tables not built");
        }
        for (size_t i = 0; i + 1 < edges.size(); ++i)
        {
            if (!(edges[i] < edges[i + 1]))
            {
                throw validation_error("TetMesh: edge list not strictly lex-sorted");
            }
        }
        for (size_t t = 0; t < tets.size(); ++t)
        {
            for (Index e : tet_edges[t])
            {
                const Edge & edge = edges[static_cast<size_t>(e)];
                const Tet & tet = tets[t];
                const auto in_tet = [&](Index k) {
                    return k == tet[0] || k == tet[1] || k == tet[2] || k == tet[3];
                };
                if (!in_tet(edge[0]) || !in_tet(edge[1]))
                {
                    throw validation_error("TetMesh: tet edge references foreign vertices");
                }
            }
        }
        // Duplicate-vertex check on quantized coordinates (tolerance 1e-9 m).
        std::unordered_map<std::array<std::int64_t, 3>, Index, CellKeyHash> seen;
        seen.reserve(vertices.size() * 2);
        for (size_t i = 0; i < vertices.size(); ++i)
        {
            const std::array<std::int64_t, 3> q = {
                static_cast<std::int64_t>(std::llround(vertices[i].x() * 1e9)),
                static_cast<std::int64_t>(std::llround(vertices[i].y() * 1e9)),
                static_cast<std::int64_t>(std::llround(vertices[i].z() * 1e9)),
            };
            auto [it, inserted] = seen.emplace(q, static_cast<Index>(i));
            if (!inserted && (vertices[i] - vertices[it->second]).norm() < 1e-9)
            {
                throw validation_error("TetMesh: duplicate vertices within 1e-9 m");
            }
        }
    }

    TetMesh build_band_tetmesh(const TemplateShape & shape, double cell_size, double inflation)
    {
        if (!(cell_size > 0.0))
        {
            throw validation_error("build_band_tetmesh: cell_size must be positive");
        }
        if (inflation < 0.0)
        {
            throw validation_error("build_band_tetmesh: inflation must be non-negative");
        }

        Aabb box = shape.bounds();
        box.min -= Vec3::Constant(inflation);
        box.max += Vec3::Constant(inflation);

        const Vec3 origin = box.min;
        std::array<std::int64_t, 3> cells {};
        for (int a = 0; a < 3; ++a)
        {
            cells[a] = std::max<std::int64_t>(
                1, static_cast<std::int64_t>(std::ceil((box.max[a] - origin[a]) / cell_size)));
        }

        const auto corner_pos = [&](std::int64_t ix, std::int64_t iy, std::int64_t iz) {
            return Vec3(origin.x() + static_cast<double>(ix) * cell_size,
                        origin.y() + static_cast<double>(iy) * cell_size,
                        origin.z() + static_cast<double>(iz) * cell_size);
        };

        TetMesh mesh;
        std::unordered_map<std::array<std::int64_t, 3>, Index, CellKeyHash> vertex_id;

        const auto get_vertex = [&](std::int64_t ix, std::int64_t iy, std::int64_t iz) {
            const std::array<std::int64_t, 3> key = { ix, iy, iz };
            auto it = vertex_id.find(key);
            if (it != vertex_id.end())
            {
                return it->second;
            }
            const Index id = static_cast<Index>(mesh.vertices.size());
            mesh.vertices.push_back(corner_pos(ix, iy, iz));
            vertex_id.emplace(key, id);
            return id;
        };

        // Scan cells in lexicographic order so vertex and tet numbering is a
        // pure function of the inputs.
        for (std::int64_t ix = 0; ix < cells[0]; ++ix)
        {
            for (std::int64_t iy = 0; iy < cells[1]; ++iy)
            {
                for (std::int64_t iz = 0; iz < cells[2]; ++iz)
                {
                    bool any_inside = false;
                    for (int c = 0; c < 8 && !any_inside; ++c)
                    {
                        const Vec3 p = corner_pos(ix + (c & 1), iy + ((c >> 1) & 1), iz + ((c >> 2) & 1));
                        any_inside = shape.sdf(p) - inflation < 0.0;
                    }
                    if (!any_inside)
                    {
                        continue;
                    }

                    std::array<Index, 8> corner_ids {};
                    for (int c = 0; c < 8; ++c)
                    {
                        corner_ids[c] = get_vertex(ix + (c & 1), iy + ((c >> 1) & 1), iz + ((c >> 2) & 1));
                    }
                    for (const auto & ct : kCubeTets)
                    {
                        Tet tet = { corner_ids[ct[0]], corner_ids[ct[1]], corner_ids[ct[2]], corner_ids[ct[3]] };
                        if (signed_volume(mesh.vertices[tet[0]], mesh.vertices[tet[1]],
                                          mesh.vertices[tet[2]], mesh.vertices[tet[3]]) < 0.0)
                        {
                            std::swap(tet[2], tet[3]);
                        }
                        mesh.tets.push_back(tet);
                    }
                }
            }
        }

        if (mesh.tets.empty())
        {
            throw validation_error("build_band_tetmesh: empty domain");
        }
        mesh.build_edge_tables();
        return mesh;
    }

    ScalarField sample_exact_sdf(const TemplateShape & shape, const TetMesh & mesh)
    {
        if (mesh.vertices.empty())
        {
            throw validation_error("sample_exact_sdf: empty mesh");
        }
        ScalarField field;
        field.values.reserve(mesh.vertices.size());
        for (const Vec3 & v : mesh.vertices)
        {
            field.values.push_back(shape.sdf(v));
        }
        return field;
    }

    double average_edge_length(const TetMesh & mesh)
    {
        if (mesh.edges.empty())
        {
            throw validation_error("average_edge_length: mesh has no edges");
        }
        return mesh.avg_edge_length;
    }
}
