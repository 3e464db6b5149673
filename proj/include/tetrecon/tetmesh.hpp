#pragma once

#include "tetrecon/template_shape.hpp"
#include "tetrecon/types.hpp"

namespace tetrecon
{
    /**
     * Fixed-topology tetrahedral mesh parameterizing the volume around a
     * template shape. Edges are numbered in a fixed manner: the edge list is
     * sorted lexicographically by (k1, k2) with k1 < k2 and ordinals are
     * contiguous from 0. Immutable after construction.
     */
    struct TetMesh
    {
        std::vector<Vec3> vertices;           // u_k, meters
        std::vector<Tet> tets;                // positively oriented
        std::vector<Edge> edges;              // deduplicated, lex-sorted
        std::vector<std::array<Index, 6>> tet_edges; // per tet, global edge ordinals
        double avg_edge_length = 0.0;

        Index num_vertices() const { return static_cast<Index>(vertices.size()); }
        Index num_tets() const { return static_cast<Index>(tets.size()); }
        Index num_edges() const { return static_cast<Index>(edges.size()); }

        double tet_volume(Index t) const;

        /// Rebuilds edges / tet_edges / avg_edge_length from vertices + tets.
        void build_edge_tables();

        /// Checks all structural invariants; throws validation_error on the
        /// first violation (duplicate vertices, non-positive volumes, ...).
        void validate() const;
    };

    /// One scalar per tet-mesh vertex (signed distance convention: negative inside).
    struct ScalarField
    {
        std::vector<double> values;

        ScalarField() = default;
        explicit ScalarField(std::vector<double> v) : values(std::move(v)) {}
        ScalarField(Index n, double fill) : values(static_cast<size_t>(n), fill) {}

        Index size() const { return static_cast<Index>(values.size()); }
        double & operator[](Index i) { return values[static_cast<size_t>(i)]; }
        double operator[](Index i) const { return values[static_cast<size_t>(i)]; }
    };

    /**
     * Builds a tetrahedral mesh of the region where `shape.sdf - inflation`
     * is negative, on a Cartesian grid of the given cell size anchored at the
     * inflated bounding-box corner. Every grid cell with at least one such
     * corner is split into 6 tetrahedra around the cube's main diagonal; all
     * cells use the same diagonal so faces conform across cells.
     *
     * Throws validation_error("empty domain") when no cell qualifies.
     */
    TetMesh build_band_tetmesh(const TemplateShape & shape, double cell_size, double inflation);

    /// Samples the analytic SDF of `shape` at every mesh vertex.
    ScalarField sample_exact_sdf(const TemplateShape & shape, const TetMesh & mesh);

    /// Arithmetic mean length of the deduplicated edge list.
    double average_edge_length(const TetMesh & mesh);
}
