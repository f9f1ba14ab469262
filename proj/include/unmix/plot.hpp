#pragma once

// Small line-plot rasterizer for the per-class endmember comparison images:
// predicted signature vs class mean vs the +-k*sigma envelope.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <vector>

#include <Eigen/Dense>

#include "unmix/common.hpp"
#include "unmix/png.hpp"

namespace unmix {

struct PlotSeries {
    std::vector<double> y;
    std::uint8_t r = 0, g = 0, b = 0;
};

namespace detail {

inline void draw_line(RgbImage& img, double x0, double y0, double x1, double y1,
                      std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    const int steps = static_cast<int>(std::max(std::abs(x1 - x0), std::abs(y1 - y0))) + 1;
    for (int s = 0; s <= steps; ++s) {
        const double t = static_cast<double>(s) / static_cast<double>(steps);
        const index_t x = static_cast<index_t>(std::lround(x0 + t * (x1 - x0)));
        const index_t y = static_cast<index_t>(std::lround(y0 + t * (y1 - y0)));
        if (x < 0 || x >= img.width || y < 0 || y >= img.height) continue;
        img.at(y, x, 0) = r;
        img.at(y, x, 1) = g;
        img.at(y, x, 2) = b;
    }
}

}  // namespace detail

// All series share the x axis (band index -> wavelength order). The image is
// deterministic for fixed inputs.
inline void plot_series_png(const std::vector<PlotSeries>& series,
                            const std::filesystem::path& path, index_t width = 480,
                            index_t height = 320) {
    RgbImage img;
    img.height = height;
    img.width = width;
    img.pixels.assign(static_cast<std::size_t>(height * width * 3), 255);

    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    std::size_t n = 0;
    for (const auto& s : series) {
        n = std::max(n, s.y.size());
        for (double v : s.y) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    }
    if (n < 2 || !std::isfinite(lo) || !std::isfinite(hi)) throw BadInputError("plot: need data");
    if (hi - lo < 1e-12) hi = lo + 1e-12;

    const double margin = 24.0;
    const double plot_w = static_cast<double>(width) - 2 * margin;
    const double plot_h = static_cast<double>(height) - 2 * margin;

    // Axes.
    detail::draw_line(img, margin, margin, margin, margin + plot_h, 0, 0, 0);
    detail::draw_line(img, margin, margin + plot_h, margin + plot_w, margin + plot_h, 0, 0, 0);

    for (const auto& s : series) {
        if (s.y.size() < 2) continue;
        for (std::size_t i = 0; i + 1 < s.y.size(); ++i) {
            const double x0 = margin + plot_w * static_cast<double>(i) / static_cast<double>(n - 1);
            const double x1 = margin + plot_w * static_cast<double>(i + 1) / static_cast<double>(n - 1);
            const double y0 = margin + plot_h * (1.0 - (s.y[i] - lo) / (hi - lo));
            const double y1 = margin + plot_h * (1.0 - (s.y[i + 1] - lo) / (hi - lo));
            detail::draw_line(img, x0, y0, x1, y1, s.r, s.g, s.b);
        }
    }
    save_png(img, path);
}

}  // namespace unmix
