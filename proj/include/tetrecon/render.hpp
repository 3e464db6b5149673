#pragma once

#include "tetrecon/camera.hpp"
#include "tetrecon/marching_tets.hpp"
#include "tetrecon/normal_map.hpp"

namespace tetrecon
{
    /**
     * Area-averaged unit vertex normals: the sum of (unhalved) face normals
     * over incident faces, normalized. Throws numerical_error when a vertex
     * normal cancels to below 1e-12 (degenerate geometry should surface
     * early, not silently).
     */
    std::vector<Vec3> vertex_normals(const TriMesh & tri);

    /**
     * Scanline z-buffer rasterization of interpolated vertex normals.
     *
     * Per covered pixel center: the triangle with the smallest interpolated
     * screen depth wins (ties to the lower triangle index); un-normalized
     * world-space barycentrics are recovered from the screen-space edge
     * areas via the camera-depth multipliers; the pixel normal is the
     * barycentric blend of vertex normals, normalized and rotated into
     * camera space. Back-facing and behind-camera triangles are skipped.
     */
    NormalMap rasterize(const TriMesh & tri, const Camera & cam);

    /**
     * Reference renderer: casts a ray through every pixel center, takes the
     * nearest triangle intersection, and interpolates vertex normals with
     * world-space barycentric weights from sub-triangle areas. Slow; used to
     * cross-check rasterize.
     */
    NormalMap raytrace_oracle(const TriMesh & tri, const Camera & cam);

    /**
     * Backpropagates per-pixel normal gradients to world-space vertex
     * positions through the barycentric weights, the projection, and the
     * vertex-normal computation. Coverage changes contribute nothing (the
     * silhouette terms own those). `pixel_grads` has one dL/dn per pixel
     * (zero where the loss ignores the pixel).
     */
    std::vector<Vec3> backprop_pixels(const TriMesh & tri, const Camera & cam, const NormalMap & nm,
                                      const std::vector<Vec3> & pixel_grads);
}
