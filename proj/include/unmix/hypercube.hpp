#pragma once

// Hyperspectral cube data model: a dense (line, sample, band) array with
// wavelength metadata, plus patch extraction / stitching and the eight
// dihedral augmentations used by training.

#include <algorithm>
#include <cstring>
#include <utility>
#include <vector>

#include "unmix/common.hpp"

namespace unmix {

enum class Units { RawDn, Radiance, Reflectance };

enum class PadMode { Reflect, Zero };

inline const char* units_name(Units u) {
    switch (u) {
        case Units::RawDn: return "raw_dn";
        case Units::Radiance: return "radiance";
        case Units::Reflectance: return "reflectance";
    }
    return "raw_dn";
}

inline Units units_from_name(const std::string& s) {
    if (s == "raw_dn") return Units::RawDn;
    if (s == "radiance") return Units::Radiance;
    if (s == "reflectance") return Units::Reflectance;
    throw FormatError("unknown units tag: " + s);
}

// Tolerance above 1.0 allowed in reflectance cubes; field calibration can
// overshoot on specular pixels. Values beyond it are clipped.
constexpr double kReflectanceClipTolerance = 0.05;

class HyperCube {
  public:
    HyperCube() = default;

    HyperCube(index_t lines, index_t samples, index_t bands,
              std::vector<double> wavelengths, Units units)
        : lines_(lines),
          samples_(samples),
          bands_(bands),
          units_(units),
          wavelengths_(std::move(wavelengths)),
          data_(static_cast<std::size_t>(lines * samples * bands), 0.0) {
        validate_shape();
    }

    HyperCube(index_t lines, index_t samples, index_t bands,
              std::vector<double> wavelengths, Units units, std::vector<double> data)
        : lines_(lines),
          samples_(samples),
          bands_(bands),
          units_(units),
          wavelengths_(std::move(wavelengths)),
          data_(std::move(data)) {
        validate_shape();
        if (data_.size() != static_cast<std::size_t>(lines_ * samples_ * bands_))
            throw DimensionError("cube data size does not match declared dimensions");
    }

    index_t lines() const { return lines_; }
    index_t samples() const { return samples_; }
    index_t bands() const { return bands_; }
    index_t pixel_count() const { return lines_ * samples_; }
    Units units() const { return units_; }
    void set_units(Units u) { units_ = u; }

    const std::vector<double>& wavelengths() const { return wavelengths_; }
    const std::vector<double>& data() const { return data_; }
    std::vector<double>& data() { return data_; }

    double operator()(index_t line, index_t sample, index_t band) const {
        return data_[static_cast<std::size_t>((line * samples_ + sample) * bands_ + band)];
    }
    double& operator()(index_t line, index_t sample, index_t band) {
        return data_[static_cast<std::size_t>((line * samples_ + sample) * bands_ + band)];
    }

    // Pointer to the B contiguous values of one pixel.
    const double* spectrum(index_t line, index_t sample) const {
        return data_.data() + static_cast<std::size_t>((line * samples_ + sample) * bands_);
    }
    double* spectrum(index_t line, index_t sample) {
        return data_.data() + static_cast<std::size_t>((line * samples_ + sample) * bands_);
    }
    const double* spectrum(index_t pixel) const {
        return data_.data() + static_cast<std::size_t>(pixel * bands_);
    }

  private:
    void validate_shape() const {
        if (lines_ <= 0 || samples_ <= 0 || bands_ <= 0)
            throw DimensionError("cube dimensions must be positive");
        if (static_cast<index_t>(wavelengths_.size()) != bands_)
            throw DimensionError("wavelength count does not match band count");
        for (index_t b = 1; b < bands_; ++b)
            if (!(wavelengths_[b] > wavelengths_[b - 1]))
                throw FormatError("wavelengths must be strictly increasing");
    }

    index_t lines_ = 0;
    index_t samples_ = 0;
    index_t bands_ = 0;
    Units units_ = Units::RawDn;
    std::vector<double> wavelengths_;
    std::vector<double> data_;
};

inline std::vector<double> even_wavelengths(index_t bands, double lo = 400.0, double hi = 1000.0) {
    std::vector<double> w(static_cast<std::size_t>(bands));
    if (bands == 1) {
        w[0] = lo;
        return w;
    }
    for (index_t b = 0; b < bands; ++b)
        w[static_cast<std::size_t>(b)] = lo + (hi - lo) * static_cast<double>(b) / static_cast<double>(bands - 1);
    return w;
}

struct ClipStats {
    std::size_t clamped_negative = 0;
    std::size_t clipped_overshoot = 0;
};

// Enforce the [0, 1+tol] range on a reflectance cube. Returns how many values
// were touched so callers can surface a warning.
inline ClipStats enforce_reflectance_range(HyperCube& cube,
                                           double tol = kReflectanceClipTolerance) {
    ClipStats stats;
    const double hi = 1.0 + tol;
    for (double& v : cube.data()) {
        if (v < 0.0) {
            v = 0.0;
            ++stats.clamped_negative;
        } else if (v > hi) {
            v = hi;
            ++stats.clipped_overshoot;
        }
    }
    return stats;
}

// ---------------------------------------------------------------------------
// Patches

struct PatchSet {
    // Each patch is patch_size x patch_size x bands, (row, col, band) order.
    std::vector<std::vector<double>> patches;
    std::vector<std::pair<index_t, index_t>> origins;  // (line, sample) offsets
    index_t patch_size = 0;
    index_t bands = 0;
    PadMode pad_mode = PadMode::Reflect;
};

// Fold an out-of-range index back into [0, n) by mirroring at the borders
// (edge-inclusive). Works for any overshoot, including n == 1.
inline index_t reflect_index(index_t i, index_t n) {
    if (n == 1) return 0;
    while (i < 0 || i >= n) {
        if (i < 0) i = -i - 1;
        if (i >= n) i = 2 * n - 1 - i;
    }
    return i;
}

inline PatchSet extract_patches(const HyperCube& cube, index_t patch_size, index_t stride,
                                PadMode pad_mode = PadMode::Reflect) {
    if (patch_size < 1) throw DimensionError("patch_size must be >= 1");
    if (stride < 1) throw DimensionError("stride must be >= 1");
    if (pad_mode != PadMode::Zero && patch_size > cube.lines() && patch_size > cube.samples())
        throw DimensionError("patch_size exceeds both cube dimensions and zero padding is disabled");

    const index_t B = cube.bands();
    const index_t n_l = (cube.lines() + stride - 1) / stride;
    const index_t n_s = (cube.samples() + stride - 1) / stride;

    PatchSet set;
    set.patch_size = patch_size;
    set.bands = B;
    set.pad_mode = pad_mode;
    set.patches.reserve(static_cast<std::size_t>(n_l * n_s));
    set.origins.reserve(static_cast<std::size_t>(n_l * n_s));

    for (index_t tl = 0; tl < n_l; ++tl) {
        for (index_t ts = 0; ts < n_s; ++ts) {
            const index_t ol = tl * stride;
            const index_t os = ts * stride;
            std::vector<double> patch(static_cast<std::size_t>(patch_size * patch_size * B), 0.0);
            for (index_t i = 0; i < patch_size; ++i) {
                const index_t li = ol + i;
                for (index_t j = 0; j < patch_size; ++j) {
                    const index_t sj = os + j;
                    double* dst = patch.data() + static_cast<std::size_t>((i * patch_size + j) * B);
                    if (li < cube.lines() && sj < cube.samples()) {
                        std::memcpy(dst, cube.spectrum(li, sj), sizeof(double) * static_cast<std::size_t>(B));
                    } else if (pad_mode == PadMode::Reflect) {
                        const index_t ri = reflect_index(li, cube.lines());
                        const index_t rj = reflect_index(sj, cube.samples());
                        std::memcpy(dst, cube.spectrum(ri, rj), sizeof(double) * static_cast<std::size_t>(B));
                    }  // zero padding: leave zeros
                }
            }
            set.patches.push_back(std::move(patch));
            set.origins.emplace_back(ol, os);
        }
    }
    return set;
}

// Write per-patch planes back at their recorded origins, cropping anything
// that falls outside (lines, samples). Exact inverse of extract_patches for
// stride == patch_size.
inline std::vector<double> stitch_patches(const std::vector<std::vector<double>>& patches,
                                          const std::vector<std::pair<index_t, index_t>>& origins,
                                          index_t patch_size, index_t channels,
                                          index_t lines, index_t samples) {
    if (patches.size() != origins.size())
        throw DimensionError("patch/origin count mismatch in stitch");
    std::vector<double> out(static_cast<std::size_t>(lines * samples * channels), 0.0);
    for (std::size_t n = 0; n < patches.size(); ++n) {
        const auto [ol, os] = origins[n];
        const std::vector<double>& patch = patches[n];
        for (index_t i = 0; i < patch_size; ++i) {
            const index_t li = ol + i;
            if (li >= lines) break;
            for (index_t j = 0; j < patch_size; ++j) {
                const index_t sj = os + j;
                if (sj >= samples) break;
                std::memcpy(out.data() + static_cast<std::size_t>((li * samples + sj) * channels),
                            patch.data() + static_cast<std::size_t>((i * patch_size + j) * channels),
                            sizeof(double) * static_cast<std::size_t>(channels));
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Dihedral augmentations

// op_code 0..3: counterclockwise rotation by 90*op_code degrees.
// op_code 4..7: horizontal mirror followed by the same rotations.
// Spatial axes only; the spectral axis is untouched.
inline void augment_coords(int op_code, index_t p, index_t i, index_t j, index_t& oi, index_t& oj) {
    if (op_code & 4) j = p - 1 - j;  // mirror columns
    switch (op_code & 3) {
        case 0: oi = i; oj = j; break;
        case 1: oi = p - 1 - j; oj = i; break;
        case 2: oi = p - 1 - i; oj = p - 1 - j; break;
        default: oi = j; oj = p - 1 - i; break;
    }
}

inline std::vector<double> augment(const std::vector<double>& patch, index_t patch_size,
                                   index_t bands, int op_code) {
    if (op_code < 0 || op_code > 7) throw BadInputError("augment op_code must be in 0..7");
    if (patch.size() != static_cast<std::size_t>(patch_size * patch_size * bands))
        throw DimensionError("augment requires a square patch of the declared size");
    if (op_code == 0) return patch;
    std::vector<double> out(patch.size());
    for (index_t i = 0; i < patch_size; ++i) {
        for (index_t j = 0; j < patch_size; ++j) {
            index_t oi = 0, oj = 0;
            augment_coords(op_code, patch_size, i, j, oi, oj);
            std::memcpy(out.data() + static_cast<std::size_t>((oi * patch_size + oj) * bands),
                        patch.data() + static_cast<std::size_t>((i * patch_size + j) * bands),
                        sizeof(double) * static_cast<std::size_t>(bands));
        }
    }
    return out;
}

}  // namespace unmix
