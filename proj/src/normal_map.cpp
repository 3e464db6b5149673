#include "tetrecon/normal_map.hpp"

#include "png_io.hpp"

#include <cmath>

namespace tetrecon
{
    size_t NormalMap::covered_count() const
    {
        size_t n = 0;
        for (std::uint8_t m : mask)
        {
            n += m != 0;
        }
        return n;
    }

    std::vector<std::uint8_t> encode_normal_rgb(const NormalMap & nm)
    {
        std::vector<std::uint8_t> rgb(nm.pixel_count() * 3, 0);
        for (size_t i = 0; i < nm.pixel_count(); ++i)
        {
            if (!nm.mask[i])
            {
                continue;
            }
            for (int c = 0; c < 3; ++c)
            {
                const double v = 255.0 * (nm.normals[i][c] + 1.0) / 2.0;
                rgb[i * 3 + c] = static_cast<std::uint8_t>(std::clamp(std::round(v), 0.0, 255.0));
            }
        }
        return rgb;
    }

    NormalMap decode_normal_rgb(const std::vector<std::uint8_t> & rgb, int width, int height)
    {
        if (rgb.size() != static_cast<size_t>(width) * height * 3)
        {
            throw validation_error("decode_normal_rgb: buffer size mismatch");
        }
        NormalMap nm(width, height);
        for (size_t i = 0; i < nm.pixel_count(); ++i)
        {
            const std::uint8_t r = rgb[i * 3 + 0];
            const std::uint8_t g = rgb[i * 3 + 1];
            const std::uint8_t b = rgb[i * 3 + 2];
            if (r == 0 && g == 0 && b == 0)
            {
                continue; // uncovered sentinel
            }
            Vec3 n(2.0 * r / 255.0 - 1.0, 2.0 * g / 255.0 - 1.0, 2.0 * b / 255.0 - 1.0);
            const double len = n.norm();
            if (len < 1e-12)
            {
                continue;
            }
            nm.mask[i] = 1;
            nm.normals[i] = n / len;
        }
        return nm;
    }

    void save_normal_png(const NormalMap & nm, const std::string & path)
    {
        png::Image img;
        img.width = nm.width;
        img.height = nm.height;
        img.channels = 3;
        img.bit_depth = 8;
        img.data = encode_normal_rgb(nm);
        png::write(path, img);
    }

    NormalMap load_normal_png(const std::string & path)
    {
        const png::Image img = png::read(path);
        if (img.channels != 3 || img.bit_depth != 8)
        {
            throw validation_error("load_normal_png: expected 8-bit RGB: " + path);
        }
        return decode_normal_rgb(img.data, img.width, img.height);
    }

    void save_depth_png(const NormalMap & nm, const std::string & path)
    {
        png::Image img;
        img.width = nm.width;
        img.height = nm.height;
        img.channels = 1;
        img.bit_depth = 16;
        img.data.assign(nm.pixel_count() * 2, 0);
        for (size_t i = 0; i < nm.pixel_count(); ++i)
        {
            if (!nm.mask[i])
            {
                continue;
            }
            const double z = std::clamp(nm.depth[i], 0.0, 1.0);
            const auto v = static_cast<std::uint16_t>(std::lround(z * 65535.0));
            img.data[i * 2] = static_cast<std::uint8_t>(v >> 8);
            img.data[i * 2 + 1] = static_cast<std::uint8_t>(v & 0xff);
        }
        png::write(path, img);
    }

    void load_depth_png(NormalMap & nm, const std::string & path)
    {
        const png::Image img = png::read(path);
        if (img.channels != 1 || img.bit_depth != 16)
        {
            throw validation_error("load_depth_png: expected 16-bit grayscale: " + path);
        }
        if (img.width != nm.width || img.height != nm.height)
        {
            throw validation_error("load_depth_png: dimension mismatch with normal map");
        }
        for (size_t i = 0; i < nm.pixel_count(); ++i)
        {
            const std::uint16_t v = static_cast<std::uint16_t>((img.data[i * 2] << 8) | img.data[i * 2 + 1]);
            nm.depth[i] = v / 65535.0;
        }
    }
}
