#pragma once

// Minimal PNG reader/writer over zlib: enough for 8-bit RGB(A) / gray and
// 16-bit gray images, no interlacing. The writer always emits filter-0 rows
// at a fixed compression level so identical images produce identical files.

#include <cstdint>
#include <string>
#include <vector>

namespace tetrecon::png
{
    struct Image
    {
        int width = 0;
        int height = 0;
        int channels = 0;      // 1 or 3
        int bit_depth = 0;     // 8 or 16
        std::vector<std::uint8_t> data; // big-endian samples for 16-bit
    };

    void write(const std::string & path, const Image & img);
    Image read(const std::string & path);
}
