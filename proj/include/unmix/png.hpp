#pragma once

// Minimal deterministic PNG writer for 8-bit RGB images: unfiltered rows,
// one zlib stream at a fixed compression level, no ancillary chunks.

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <vector>

#include <zlib.h>

#include "unmix/common.hpp"

namespace unmix {

struct RgbImage {
    index_t height = 0;
    index_t width = 0;
    std::vector<std::uint8_t> pixels;  // height * width * 3, row-major RGB

    std::uint8_t& at(index_t row, index_t col, int channel) {
        return pixels[static_cast<std::size_t>((row * width + col) * 3 + channel)];
    }
    std::uint8_t at(index_t row, index_t col, int channel) const {
        return pixels[static_cast<std::size_t>((row * width + col) * 3 + channel)];
    }
};

namespace detail {

inline void put_u32_be(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 24));
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
}

inline void put_chunk(std::vector<std::uint8_t>& out, const char type[4],
                      const std::vector<std::uint8_t>& payload) {
    put_u32_be(out, static_cast<std::uint32_t>(payload.size()));
    const std::size_t crc_start = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), payload.begin(), payload.end());
    const std::uint32_t crc = static_cast<std::uint32_t>(
        ::crc32(0, out.data() + crc_start, static_cast<uInt>(out.size() - crc_start)));
    put_u32_be(out, crc);
}

}  // namespace detail

inline std::vector<std::uint8_t> encode_png(const RgbImage& img) {
    if (img.height <= 0 || img.width <= 0) throw DimensionError("PNG image must be non-empty");
    if (img.pixels.size() != static_cast<std::size_t>(img.height * img.width * 3))
        throw DimensionError("PNG pixel buffer size mismatch");

    // Raw scanlines with filter byte 0 per row.
    const std::size_t stride = static_cast<std::size_t>(img.width) * 3;
    std::vector<std::uint8_t> raw((stride + 1) * static_cast<std::size_t>(img.height));
    for (index_t r = 0; r < img.height; ++r) {
        std::uint8_t* dst = raw.data() + static_cast<std::size_t>(r) * (stride + 1);
        *dst = 0;
        std::memcpy(dst + 1, img.pixels.data() + static_cast<std::size_t>(r) * stride, stride);
    }

    uLongf bound = ::compressBound(static_cast<uLong>(raw.size()));
    std::vector<std::uint8_t> compressed(bound);
    if (::compress2(compressed.data(), &bound, raw.data(), static_cast<uLong>(raw.size()), 6) != Z_OK)
        throw Error("zlib compression failed");
    compressed.resize(bound);

    std::vector<std::uint8_t> out;
    const std::uint8_t signature[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
    out.insert(out.end(), signature, signature + 8);

    std::vector<std::uint8_t> ihdr;
    detail::put_u32_be(ihdr, static_cast<std::uint32_t>(img.width));
    detail::put_u32_be(ihdr, static_cast<std::uint32_t>(img.height));
    ihdr.push_back(8);  // bit depth
    ihdr.push_back(2);  // color type: truecolor
    ihdr.push_back(0);  // compression
    ihdr.push_back(0);  // filter
    ihdr.push_back(0);  // interlace
    detail::put_chunk(out, "IHDR", ihdr);
    detail::put_chunk(out, "IDAT", compressed);
    detail::put_chunk(out, "IEND", {});
    return out;
}

inline void save_png(const RgbImage& img, const std::filesystem::path& path) {
    const std::vector<std::uint8_t> bytes = encode_png(img);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write PNG: " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("failed writing PNG: " + path.string());
}

}  // namespace unmix
