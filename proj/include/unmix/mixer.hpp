#pragma once

// Mixed-dataset construction: non-overlapping kernel x kernel windows are
// averaged into one pixel each, and the window's class fractions become the
// abundance ground truth. Trailing rows/columns that do not fill a window are
// dropped, which is what reproduces the published mixed cube sizes.

#include <string>
#include <utility>
#include <vector>

#include "unmix/abundance.hpp"
#include "unmix/common.hpp"
#include "unmix/groundtruth.hpp"
#include "unmix/hypercube.hpp"

namespace unmix {

inline std::pair<HyperCube, AbundanceMap> mix_cube(const HyperCube& cube, const ClassMap& map,
                                                   index_t kernel) {
    if (kernel < 2 || kernel > std::min(cube.lines(), cube.samples()))
        throw BadInputError("mix_cube: kernel must be in [2, min(lines, samples)]");
    if (map.lines != cube.lines() || map.samples != cube.samples())
        throw DimensionError("mix_cube: class map shape does not match cube");

    const index_t out_lines = cube.lines() / kernel;
    const index_t out_samples = cube.samples() / kernel;
    const index_t bands = cube.bands();
    const index_t e_count = static_cast<index_t>(map.class_names.size());
    const double inv_window = 1.0 / static_cast<double>(kernel * kernel);

    HyperCube mixed(out_lines, out_samples, bands, cube.wavelengths(), cube.units());
    AbundanceMap abundance;
    abundance.lines = out_lines;
    abundance.samples = out_samples;
    abundance.classes = e_count;
    abundance.class_names = map.class_names;
    abundance.values.assign(static_cast<std::size_t>(out_lines * out_samples * e_count), 0.0);

    for (index_t ol = 0; ol < out_lines; ++ol) {
        for (index_t os = 0; os < out_samples; ++os) {
            double* spec = mixed.spectrum(ol, os);
            double* abund = abundance.values.data() +
                            static_cast<std::size_t>((ol * out_samples + os) * e_count);
            for (index_t di = 0; di < kernel; ++di) {
                const index_t l = ol * kernel + di;
                for (index_t dj = 0; dj < kernel; ++dj) {
                    const index_t s = os * kernel + dj;
                    const double* src = cube.spectrum(l, s);
                    for (index_t b = 0; b < bands; ++b) spec[b] += src[b];
                    abund[map.label(l, s)] += 1.0;
                }
            }
            for (index_t b = 0; b < bands; ++b) spec[b] *= inv_window;
            for (index_t e = 0; e < e_count; ++e) abund[e] *= inv_window;
        }
    }
    return {std::move(mixed), std::move(abundance)};
}

}  // namespace unmix
