#pragma once

// False-color RGB rendering: trapezoidal integration of each pixel spectrum
// against the CIE 1931 color matching functions, XYZ -> sRGB with a single
// cube-global scale, then 8-bit quantization.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <vector>

#include "unmix/cie1931.hpp"
#include "unmix/common.hpp"
#include "unmix/hypercube.hpp"
#include "unmix/png.hpp"

namespace unmix {

namespace detail {

// Linear interpolation of one CMF column at wavelength w; zero outside the
// table support.
inline double interp_cmf(const std::vector<double>& grid, const std::vector<double>& values,
                         double w) {
    if (w < grid.front() || w > grid.back()) return 0.0;
    const auto it = std::upper_bound(grid.begin(), grid.end(), w);
    if (it == grid.begin()) return values.front();
    if (it == grid.end()) return values.back();
    const std::size_t hi = static_cast<std::size_t>(it - grid.begin());
    const std::size_t lo = hi - 1;
    const double t = (w - grid[lo]) / (grid[hi] - grid[lo]);
    return values[lo] + t * (values[hi] - values[lo]);
}

}  // namespace detail

struct XyzImage {
    index_t height = 0;
    index_t width = 0;
    std::vector<double> values;  // height * width * 3

    double& at(index_t row, index_t col, int channel) {
        return values[static_cast<std::size_t>((row * width + col) * 3 + channel)];
    }
    double at(index_t row, index_t col, int channel) const {
        return values[static_cast<std::size_t>((row * width + col) * 3 + channel)];
    }
};

inline XyzImage spectral_to_xyz(const HyperCube& cube, const CmfTable& cmf = cie1931_observer()) {
    cmf.validate();
    const index_t bands = cube.bands();
    // CMFs sampled onto the cube's wavelength grid; trapezoid weights on the
    // same grid. Bands outside the CMF support contribute zero.
    std::vector<double> xb(static_cast<std::size_t>(bands)), yb(xb.size()), zb(xb.size()),
        wgt(xb.size(), 0.0);
    const std::vector<double>& wl = cube.wavelengths();
    for (index_t b = 0; b < bands; ++b) {
        xb[static_cast<std::size_t>(b)] = detail::interp_cmf(cmf.wavelengths, cmf.xbar, wl[static_cast<std::size_t>(b)]);
        yb[static_cast<std::size_t>(b)] = detail::interp_cmf(cmf.wavelengths, cmf.ybar, wl[static_cast<std::size_t>(b)]);
        zb[static_cast<std::size_t>(b)] = detail::interp_cmf(cmf.wavelengths, cmf.zbar, wl[static_cast<std::size_t>(b)]);
    }
    if (bands == 1) {
        wgt[0] = 1.0;  // single band: no interval to integrate over, use the value
    } else {
        for (index_t b = 0; b < bands; ++b) {
            double w = 0.0;
            if (b > 0) w += 0.5 * (wl[static_cast<std::size_t>(b)] - wl[static_cast<std::size_t>(b - 1)]);
            if (b + 1 < bands) w += 0.5 * (wl[static_cast<std::size_t>(b + 1)] - wl[static_cast<std::size_t>(b)]);
            wgt[static_cast<std::size_t>(b)] = w;
        }
    }

    XyzImage img;
    img.height = cube.lines();
    img.width = cube.samples();
    img.values.assign(static_cast<std::size_t>(img.height * img.width * 3), 0.0);
    for (index_t l = 0; l < cube.lines(); ++l) {
        for (index_t s = 0; s < cube.samples(); ++s) {
            const double* spec = cube.spectrum(l, s);
            double x = 0.0, y = 0.0, z = 0.0;
            for (index_t b = 0; b < bands; ++b) {
                const double sw = spec[b] * wgt[static_cast<std::size_t>(b)];
                x += sw * xb[static_cast<std::size_t>(b)];
                y += sw * yb[static_cast<std::size_t>(b)];
                z += sw * zb[static_cast<std::size_t>(b)];
            }
            img.at(l, s, 0) = x;
            img.at(l, s, 1) = y;
            img.at(l, s, 2) = z;
        }
    }
    return img;
}

namespace detail {

inline double srgb_transfer(double c) {
    return c <= 0.0031308 ? 12.92 * c : 1.055 * std::pow(c, 1.0 / 2.4) - 0.055;
}

}  // namespace detail

// XYZ -> linear sRGB (D65), scaled by the global maximum over the whole
// image before the transfer curve, so uniform scaling of the input cube
// leaves the output bytes unchanged.
inline RgbImage xyz_to_srgb(const XyzImage& xyz) {
    for (double v : xyz.values)
        if (!std::isfinite(v)) throw NumericError("xyz_to_srgb: non-finite input");

    const index_t n = xyz.height * xyz.width;
    std::vector<double> linear(static_cast<std::size_t>(n * 3));
    double max_linear = 0.0;
    for (index_t p = 0; p < n; ++p) {
        const double x = xyz.values[static_cast<std::size_t>(3 * p)];
        const double y = xyz.values[static_cast<std::size_t>(3 * p + 1)];
        const double z = xyz.values[static_cast<std::size_t>(3 * p + 2)];
        const double r = 3.2404542 * x - 1.5371385 * y - 0.4985314 * z;
        const double g = -0.9692660 * x + 1.8760108 * y + 0.0415560 * z;
        const double b = 0.0556434 * x - 0.2040259 * y + 1.0572252 * z;
        linear[static_cast<std::size_t>(3 * p)] = r;
        linear[static_cast<std::size_t>(3 * p + 1)] = g;
        linear[static_cast<std::size_t>(3 * p + 2)] = b;
        max_linear = std::max({max_linear, r, g, b});
    }

    RgbImage img;
    img.height = xyz.height;
    img.width = xyz.width;
    img.pixels.assign(static_cast<std::size_t>(n * 3), 0);
    if (max_linear <= 0.0) return img;  // all-black image, not an error

    for (std::size_t i = 0; i < linear.size(); ++i) {
        const double c = std::clamp(linear[i] / max_linear, 0.0, 1.0);
        img.pixels[i] = static_cast<std::uint8_t>(std::lround(255.0 * detail::srgb_transfer(c)));
    }
    return img;
}

inline RgbImage render_rgb_image(const HyperCube& cube, const CmfTable& cmf = cie1931_observer()) {
    return xyz_to_srgb(spectral_to_xyz(cube, cmf));
}

inline void render_rgb(const HyperCube& cube, const std::filesystem::path& out_path,
                       const CmfTable& cmf = cie1931_observer()) {
    save_png(render_rgb_image(cube, cmf), out_path);
}

}  // namespace unmix
