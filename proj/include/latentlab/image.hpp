#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "latentlab/binary_io.hpp"
#include "latentlab/error.hpp"

namespace latentlab {

struct ImageDims {
    std::size_t height = 32;
    std::size_t width = 32;
    std::size_t channels = 3;

    [[nodiscard]] std::size_t size() const { return height * width * channels; }
    friend bool operator==(const ImageDims&, const ImageDims&) = default;

    [[nodiscard]] std::string str() const {
        return std::to_string(height) + "x" + std::to_string(width) + "x" + std::to_string(channels);
    }
};

/// H x W x C image, interleaved channels, row-major, values in [0,1].
struct Image {
    ImageDims dims;
    std::vector<float> pixels;

    Image() = default;
    explicit Image(ImageDims d, float fill = 0.0f) : dims(d), pixels(d.size(), fill) {}
    Image(ImageDims d, std::vector<float> data) : dims(d), pixels(std::move(data)) {
        if (pixels.size() != dims.size())
            throw DimensionError("image " + dims.str() + " needs " + std::to_string(dims.size()) +
                                 " values, got " + std::to_string(pixels.size()));
    }

    float& at(std::size_t y, std::size_t x, std::size_t c) {
        return pixels[(y * dims.width + x) * dims.channels + c];
    }
    [[nodiscard]] float at(std::size_t y, std::size_t x, std::size_t c) const {
        return pixels[(y * dims.width + x) * dims.channels + c];
    }

    friend bool operator==(const Image&, const Image&) = default;
};

inline std::uint8_t quantize_u8(float v) {
    return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
}

inline float dequantize_u8(std::uint8_t v) { return static_cast<float>(v) / 255.0f; }

/// Snaps every pixel onto the 8-bit grid so a pixmap round-trip is lossless.
inline void quantize_in_place(Image& image) {
    for (auto& p : image.pixels) p = dequantize_u8(quantize_u8(p));
}

/// Binary portable pixmap: P6 for 3 channels, P5 (graymap) for 1.
inline Bytes encode_pnm(const Image& image) {
    const auto& d = image.dims;
    std::string magic;
    if (d.channels == 3) magic = "P6";
    else if (d.channels == 1) magic = "P5";
    else throw DimensionError("pixmap needs 1 or 3 channels, got " + std::to_string(d.channels));
    std::string header = magic + "\n" + std::to_string(d.width) + " " + std::to_string(d.height) + "\n255\n";
    Bytes out(header.begin(), header.end());
    out.reserve(out.size() + image.pixels.size());
    for (float p : image.pixels) out.push_back(quantize_u8(p));
    return out;
}

namespace detail {

inline std::size_t pnm_token(std::span<const std::uint8_t> data, std::size_t& pos) {
    auto is_space = [](std::uint8_t c) { return c == ' ' || c == '\n' || c == '\r' || c == '\t'; };
    while (pos < data.size()) {
        if (data[pos] == '#') {
            while (pos < data.size() && data[pos] != '\n') ++pos;
        } else if (is_space(data[pos])) {
            ++pos;
        } else {
            break;
        }
    }
    std::size_t value = 0;
    std::size_t digits = 0;
    while (pos < data.size() && data[pos] >= '0' && data[pos] <= '9') {
        value = value * 10 + (data[pos] - '0');
        ++pos;
        ++digits;
    }
    if (digits == 0) throw ParseError("pixmap header: expected a number");
    return value;
}

}  // namespace detail

inline Image decode_pnm(std::span<const std::uint8_t> data) {
    if (data.size() < 2 || data[0] != 'P' || (data[1] != '6' && data[1] != '5'))
        throw ParseError("pixmap: expected P6 or P5 magic");
    std::size_t channels = data[1] == '6' ? 3 : 1;
    std::size_t pos = 2;
    std::size_t width = detail::pnm_token(data, pos);
    std::size_t height = detail::pnm_token(data, pos);
    std::size_t maxval = detail::pnm_token(data, pos);
    if (maxval != 255) throw ParseError("pixmap: only maxval 255 is supported");
    if (pos >= data.size()) throw ParseError("pixmap: truncated header");
    ++pos;  // single whitespace before raster
    ImageDims dims{height, width, channels};
    if (data.size() - pos < dims.size())
        throw ParseError("pixmap: truncated raster, expected " + std::to_string(dims.size()) + " bytes, got " +
                         std::to_string(data.size() - pos));
    Image image(dims);
    for (std::size_t i = 0; i < dims.size(); ++i) image.pixels[i] = dequantize_u8(data[pos + i]);
    return image;
}

}  // namespace latentlab
