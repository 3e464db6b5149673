#pragma once

#include "tetrecon/camera.hpp"
#include "tetrecon/marching_tets.hpp"
#include "tetrecon/skinning.hpp"
#include "tetrecon/tetmesh.hpp"

#include <string>

namespace tetrecon
{
    // Binary formats are little-endian with an 8-byte magic, u64 counts,
    // f64 vertex triples and u32 tet quadruples. Edge tables are rebuilt on
    // load (they are a pure function of the topology).

    void save_tetmesh(const TetMesh & mesh, const std::string & path);
    TetMesh load_tetmesh(const std::string & path);

    void save_field(const ScalarField & field, const std::string & path);
    ScalarField load_field(const std::string & path);

    /// Wavefront OBJ with 1-based indices (positions and faces only).
    void save_obj(const TriMesh & tri, const std::string & path);
    /// Reads positions and triangular faces; provenance is left empty.
    TriMesh load_obj(const std::string & path);

    /// Sidecar provenance table: one line per vertex,
    /// "vertex edge_ordinal k1 k2 weight".
    void save_provenance(const TriMesh & tri, const std::string & path);

    void save_camera_json(const Camera & cam, const std::string & path);
    Camera load_camera_json(const std::string & path);

    void save_skeleton_json(const Skeleton & skel, const std::string & path);
    Skeleton load_skeleton_json(const std::string & path);

    void save_pose_json(const Pose & pose, const std::string & path);
    Pose load_pose_json(const std::string & path, const Skeleton & skel);
}
