#pragma once

#include "tetrecon/types.hpp"

#include <cstdint>
#include <string>

namespace tetrecon
{
    /**
     * Per-pixel unit normals (camera space) with coverage, depth and the
     * fragment each pixel came from. Row-major storage, row 0 at the top.
     */
    struct NormalMap
    {
        struct Fragment
        {
            Index triangle = -1;
            Vec3 alpha = Vec3::Zero(); // un-normalized world-space barycentrics
        };

        int width = 0;
        int height = 0;
        std::vector<Vec3> normals;       // unit for covered pixels, zero otherwise
        std::vector<std::uint8_t> mask;  // 1 = covered
        std::vector<double> depth;       // z' in [0,1] for covered pixels
        std::vector<Fragment> fragments; // valid for covered pixels

        NormalMap() = default;
        NormalMap(int w, int h)
            : width(w), height(h),
              normals(static_cast<size_t>(w) * h, Vec3::Zero()),
              mask(static_cast<size_t>(w) * h, 0),
              depth(static_cast<size_t>(w) * h, 0.0),
              fragments(static_cast<size_t>(w) * h)
        {
        }

        size_t index(int x, int y) const { return static_cast<size_t>(y) * width + x; }
        bool covered(int x, int y) const { return mask[index(x, y)] != 0; }
        size_t pixel_count() const { return static_cast<size_t>(width) * height; }
        size_t covered_count() const;
    };

    /**
     * 8-bit RGB encoding: channel = round(255 * (n + 1) / 2), half away from
     * zero; uncovered pixels encode as (0, 0, 0).
     */
    std::vector<std::uint8_t> encode_normal_rgb(const NormalMap & nm);

    /// Inverse of encode_normal_rgb; decoded normals are renormalized to unit length.
    NormalMap decode_normal_rgb(const std::vector<std::uint8_t> & rgb, int width, int height);

    void save_normal_png(const NormalMap & nm, const std::string & path);
    NormalMap load_normal_png(const std::string & path);

    /// Depth written as 16-bit grayscale, value = round(65535 * z').
    void save_depth_png(const NormalMap & nm, const std::string & path);
    /// Loads z' for covered (nonzero) pixels into `nm.depth`; zero stays uncovered.
    void load_depth_png(NormalMap & nm, const std::string & path);
}
