#include "support.hpp"

#include <map>

namespace tetrecon::testing
{
    TriMesh icosphere(double radius, int subdivisions)
    {
        const double t = (1.0 + std::sqrt(5.0)) / 2.0;
        std::vector<Vec3> verts = {
            { -1, t, 0 }, { 1, t, 0 }, { -1, -t, 0 }, { 1, -t, 0 },
            { 0, -1, t }, { 0, 1, t }, { 0, -1, -t }, { 0, 1, -t },
            { t, 0, -1 }, { t, 0, 1 }, { -t, 0, -1 }, { -t, 0, 1 },
        };
        std::vector<Tri> faces = {
            { 0, 11, 5 }, { 0, 5, 1 }, { 0, 1, 7 }, { 0, 7, 10 }, { 0, 10, 11 },
            { 1, 5, 9 }, { 5, 11, 4 }, { 11, 10, 2 }, { 10, 7, 6 }, { 7, 1, 8 },
            { 3, 9, 4 }, { 3, 4, 2 }, { 3, 2, 6 }, { 3, 6, 8 }, { 3, 8, 9 },
            { 4, 9, 5 }, { 2, 4, 11 }, { 6, 2, 10 }, { 8, 6, 7 }, { 9, 8, 1 },
        };
        for (Vec3 & v : verts)
        {
            v.normalize();
        }

        for (int s = 0; s < subdivisions; ++s)
        {
            std::map<std::pair<Index, Index>, Index> midpoint;
            const auto mid = [&](Index a, Index b) {
                const auto key = std::make_pair(std::min(a, b), std::max(a, b));
                auto it = midpoint.find(key);
                if (it != midpoint.end())
                {
                    return it->second;
                }
                const Index id = static_cast<Index>(verts.size());
                verts.push_back((verts[a] + verts[b]).normalized());
                midpoint.emplace(key, id);
                return id;
            };
            std::vector<Tri> next;
            next.reserve(faces.size() * 4);
            for (const Tri & f : faces)
            {
                const Index ab = mid(f[0], f[1]);
                const Index bc = mid(f[1], f[2]);
                const Index ca = mid(f[2], f[0]);
                next.push_back({ f[0], ab, ca });
                next.push_back({ f[1], bc, ab });
                next.push_back({ f[2], ca, bc });
                next.push_back({ ab, bc, ca });
            }
            faces = std::move(next);
        }

        TriMesh tri;
        tri.vertices.reserve(verts.size());
        for (const Vec3 & v : verts)
        {
            tri.vertices.push_back(radius * v);
        }
        tri.triangles = std::move(faces);
        tri.source_tet.assign(tri.triangles.size(), -1);
        return tri;
    }

    std::vector<bool> near_silhouette_vertices(const TriMesh & tri, const Camera & cam, int rings)
    {
        const NormalMap nm = rasterize(tri, cam);
        std::vector<bool> tri_on_silhouette(tri.triangles.size(), false);
        for (int y = 0; y < nm.height; ++y)
        {
            for (int x = 0; x < nm.width; ++x)
            {
                if (!nm.covered(x, y))
                {
                    continue;
                }
                bool boundary = x == 0 || y == 0 || x == nm.width - 1 || y == nm.height - 1;
                for (int dy = -1; dy <= 1 && !boundary; ++dy)
                {
                    for (int dx = -1; dx <= 1 && !boundary; ++dx)
                    {
                        boundary = !nm.covered(std::clamp(x + dx, 0, nm.width - 1),
                                               std::clamp(y + dy, 0, nm.height - 1));
                    }
                }
                if (boundary)
                {
                    tri_on_silhouette[static_cast<size_t>(nm.fragments[nm.index(x, y)].triangle)] = true;
                }
            }
        }
        // Triangles never rendered are treated as silhouette-unstable too
        // (back faces can become visible under perturbation).
        std::vector<bool> tri_rendered(tri.triangles.size(), false);
        for (size_t i = 0; i < nm.pixel_count(); ++i)
        {
            if (nm.mask[i])
            {
                tri_rendered[static_cast<size_t>(nm.fragments[i].triangle)] = true;
            }
        }

        std::vector<bool> flagged(tri.vertices.size(), false);
        for (size_t t = 0; t < tri.triangles.size(); ++t)
        {
            if (tri_on_silhouette[t] || !tri_rendered[t])
            {
                for (Index v : tri.triangles[t])
                {
                    flagged[static_cast<size_t>(v)] = true;
                }
            }
        }
        for (int r = 0; r < rings; ++r)
        {
            std::vector<bool> next = flagged;
            for (const Tri & f : tri.triangles)
            {
                const bool any = flagged[static_cast<size_t>(f[0])] ||
                                 flagged[static_cast<size_t>(f[1])] ||
                                 flagged[static_cast<size_t>(f[2])];
                if (any)
                {
                    for (Index v : f)
                    {
                        next[static_cast<size_t>(v)] = true;
                    }
                }
            }
            flagged = std::move(next);
        }
        return flagged;
    }
}
