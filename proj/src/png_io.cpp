#include "png_io.hpp"

#include <zlib.h>

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace tetrecon::png
{
    namespace
    {
        void put_u32(std::vector<std::uint8_t> & out, std::uint32_t v)
        {
            out.push_back(static_cast<std::uint8_t>(v >> 24));
            out.push_back(static_cast<std::uint8_t>(v >> 16));
            out.push_back(static_cast<std::uint8_t>(v >> 8));
            out.push_back(static_cast<std::uint8_t>(v));
        }

        std::uint32_t get_u32(const std::uint8_t * p)
        {
            return (std::uint32_t(p[0]) << 24) | (std::uint32_t(p[1]) << 16) |
                   (std::uint32_t(p[2]) << 8) | std::uint32_t(p[3]);
        }

        void append_chunk(std::vector<std::uint8_t> & out, const char type[4],
                          const std::uint8_t * payload, size_t len)
        {
            put_u32(out, static_cast<std::uint32_t>(len));
            const size_t start = out.size();
            out.insert(out.end(), type, type + 4);
            out.insert(out.end(), payload, payload + len);
            const uLong crc = crc32(0, out.data() + start, static_cast<uInt>(4 + len));
            put_u32(out, static_cast<std::uint32_t>(crc));
        }

        int paeth(int a, int b, int c)
        {
            const int p = a + b - c;
            const int pa = std::abs(p - a);
            const int pb = std::abs(p - b);
            const int pc = std::abs(p - c);
            if (pa <= pb && pa <= pc) return a;
            if (pb <= pc) return b;
            return c;
        }
    }

    void write(const std::string & path, const Image & img)
    {
        if (img.width <= 0 || img.height <= 0 ||
            (img.channels != 1 && img.channels != 3) ||
            (img.bit_depth != 8 && img.bit_depth != 16))
        {
            throw std::runtime_error("png::write: unsupported image format");
        }
        const size_t bytes_per_px = static_cast<size_t>(img.channels) * (img.bit_depth / 8);
        const size_t row_bytes = bytes_per_px * img.width;
        if (img.data.size() != row_bytes * img.height)
        {
            throw std::runtime_error("png::write: pixel buffer size mismatch");
        }

        // Filter 0 on every row.
        std::vector<std::uint8_t> raw;
        raw.reserve((row_bytes + 1) * img.height);
        for (int y = 0; y < img.height; ++y)
        {
            raw.push_back(0);
            raw.insert(raw.end(), img.data.begin() + y * row_bytes,
                       img.data.begin() + (y + 1) * row_bytes);
        }

        uLongf comp_len = compressBound(static_cast<uLong>(raw.size()));
        std::vector<std::uint8_t> compressed(comp_len);
        if (compress2(compressed.data(), &comp_len, raw.data(), static_cast<uLong>(raw.size()), 6) != Z_OK)
        {
            throw std::runtime_error("png::write: deflate failed");
        }
        compressed.resize(comp_len);

        std::vector<std::uint8_t> out;
        static const std::uint8_t sig[8] = { 137, 80, 78, 71, 13, 10, 26, 10 };
        out.insert(out.end(), sig, sig + 8);

        std::uint8_t ihdr[13];
        ihdr[0] = static_cast<std::uint8_t>(img.width >> 24);
        ihdr[1] = static_cast<std::uint8_t>(img.width >> 16);
        ihdr[2] = static_cast<std::uint8_t>(img.width >> 8);
        ihdr[3] = static_cast<std::uint8_t>(img.width);
        ihdr[4] = static_cast<std::uint8_t>(img.height >> 24);
        ihdr[5] = static_cast<std::uint8_t>(img.height >> 16);
        ihdr[6] = static_cast<std::uint8_t>(img.height >> 8);
        ihdr[7] = static_cast<std::uint8_t>(img.height);
        ihdr[8] = static_cast<std::uint8_t>(img.bit_depth);
        ihdr[9] = img.channels == 3 ? 2 : 0; // truecolor or grayscale
        ihdr[10] = 0;
        ihdr[11] = 0;
        ihdr[12] = 0;
        append_chunk(out, "IHDR", ihdr, sizeof(ihdr));
        append_chunk(out, "IDAT", compressed.data(), compressed.size());
        append_chunk(out, "IEND", nullptr, 0);

        std::ofstream file(path, std::ios::binary | std::ios::trunc);
        if (!file)
        {
            throw std::runtime_error("png::write: cannot open " + path);
        }
        file.write(reinterpret_cast<const char *>(out.data()), static_cast<std::streamsize>(out.size()));
        if (!file)
        {
            throw std::runtime_error("png::write: write failed for " + path);
        }
    }

    Image read(const std::string & path)
    {
        std::ifstream file(path, std::ios::binary);
        if (!file)
        {
            throw std::runtime_error("png::read: cannot open " + path);
        }
        std::vector<std::uint8_t> buf((std::istreambuf_iterator<char>(file)),
                                      std::istreambuf_iterator<char>());
        static const std::uint8_t sig[8] = { 137, 80, 78, 71, 13, 10, 26, 10 };
        if (buf.size() < 8 || std::memcmp(buf.data(), sig, 8) != 0)
        {
            throw std::runtime_error("png::read: not a PNG file: " + path);
        }

        Image img;
        int color_type = -1;
        int src_channels = 0;
        std::vector<std::uint8_t> idat;
        size_t pos = 8;
        while (pos + 8 <= buf.size())
        {
            const std::uint32_t len = get_u32(&buf[pos]);
            if (pos + 12 + len > buf.size())
            {
                throw std::runtime_error("png::read: truncated chunk");
            }
            const char * type = reinterpret_cast<const char *>(&buf[pos + 4]);
            const std::uint8_t * payload = &buf[pos + 8];
            if (std::memcmp(type, "IHDR", 4) == 0)
            {
                img.width = static_cast<int>(get_u32(payload));
                img.height = static_cast<int>(get_u32(payload + 4));
                img.bit_depth = payload[8];
                color_type = payload[9];
                if (payload[12] != 0)
                {
                    throw std::runtime_error("png::read: interlaced PNG not supported");
                }
                switch (color_type)
                {
                    case 0: src_channels = 1; break;
                    case 2: src_channels = 3; break;
                    case 6: src_channels = 4; break;
                    default:
                        throw std::runtime_error("png::read: unsupported color type");
                }
                if (img.bit_depth != 8 && img.bit_depth != 16)
                {
                    throw std::runtime_error("png::read: unsupported bit depth");
                }
            }
            else if (std::memcmp(type, "IDAT", 4) == 0)
            {
                idat.insert(idat.end(), payload, payload + len);
            }
            else if (std::memcmp(type, "IEND", 4) == 0)
            {
                break;
            }
            pos += 12 + len;
        }
        if (img.width <= 0 || img.height <= 0 || idat.empty())
        {
            throw std::runtime_error("png::read: missing IHDR/IDAT");
        }

        const size_t bytes_per_px = static_cast<size_t>(src_channels) * (img.bit_depth / 8);
        const size_t row_bytes = bytes_per_px * img.width;
        std::vector<std::uint8_t> raw((row_bytes + 1) * img.height);
        uLongf raw_len = static_cast<uLongf>(raw.size());
        const int rc = uncompress(raw.data(), &raw_len, idat.data(), static_cast<uLong>(idat.size()));
        if (rc != Z_OK || raw_len != raw.size())
        {
            throw std::runtime_error("png::read: inflate failed");
        }

        // Undo per-row filters in place.
        std::vector<std::uint8_t> pixels(row_bytes * img.height);
        const size_t bpp = bytes_per_px;
        for (int y = 0; y < img.height; ++y)
        {
            const std::uint8_t filter = raw[y * (row_bytes + 1)];
            const std::uint8_t * src = &raw[y * (row_bytes + 1) + 1];
            std::uint8_t * dst = &pixels[y * row_bytes];
            const std::uint8_t * prev = y > 0 ? &pixels[(y - 1) * row_bytes] : nullptr;
            for (size_t i = 0; i < row_bytes; ++i)
            {
                const int a = i >= bpp ? dst[i - bpp] : 0;
                const int b = prev ? prev[i] : 0;
                const int c = (prev && i >= bpp) ? prev[i - bpp] : 0;
                int v = src[i];
                switch (filter)
                {
                    case 0: break;
                    case 1: v += a; break;
                    case 2: v += b; break;
                    case 3: v += (a + b) / 2; break;
                    case 4: v += paeth(a, b, c); break;
                    default:
                        throw std::runtime_error("png::read: unknown filter type");
                }
                dst[i] = static_cast<std::uint8_t>(v);
            }
        }

        // Drop alpha if present.
        if (src_channels == 4)
        {
            const int sample_bytes = img.bit_depth / 8;
            std::vector<std::uint8_t> rgb(static_cast<size_t>(img.width) * img.height * 3 * sample_bytes);
            for (size_t p = 0; p < static_cast<size_t>(img.width) * img.height; ++p)
            {
                std::memcpy(&rgb[p * 3 * sample_bytes], &pixels[p * 4 * sample_bytes],
                            3 * static_cast<size_t>(sample_bytes));
            }
            pixels = std::move(rgb);
            src_channels = 3;
        }
        img.channels = src_channels;
        img.data = std::move(pixels);
        return img;
    }
}
