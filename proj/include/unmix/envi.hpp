#pragma once

// ENVI-style reader/writer: a "key = value" text header next to a headerless
// binary in bsq/bil/bip layout. Cubes are reordered to the internal
// (line, sample, band) storage on load regardless of the stored interleave.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include "unmix/common.hpp"
#include "unmix/hypercube.hpp"

namespace unmix {

enum class Interleave { Bsq, Bil, Bip };

inline const char* interleave_name(Interleave il) {
    switch (il) {
        case Interleave::Bsq: return "bsq";
        case Interleave::Bil: return "bil";
        case Interleave::Bip: return "bip";
    }
    return "bsq";
}

inline Interleave interleave_from_name(std::string s) {
    for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (s == "bsq") return Interleave::Bsq;
    if (s == "bil") return Interleave::Bil;
    if (s == "bip") return Interleave::Bip;
    throw FormatError("unsupported interleave: " + s);
}

// Supported ENVI data type codes.
enum class EnviDataType : int {
    U8 = 1,
    I16 = 2,
    F32 = 4,
    U16 = 12,
};

inline std::size_t envi_type_size(EnviDataType t) {
    switch (t) {
        case EnviDataType::U8: return 1;
        case EnviDataType::I16: return 2;
        case EnviDataType::F32: return 4;
        case EnviDataType::U16: return 2;
    }
    return 0;
}

struct EnviHeader {
    index_t samples = 0;
    index_t lines = 0;
    index_t bands = 0;
    EnviDataType data_type = EnviDataType::F32;
    Interleave interleave = Interleave::Bsq;
    int byte_order = 0;  // 0 little endian, 1 big endian
    index_t header_offset = 0;
    std::vector<double> wavelengths;  // empty when the header has none
    std::string units;                // optional custom tag, empty when absent
};

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return {};
    std::size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

inline std::string lower(std::string s) {
    for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

inline std::vector<double> parse_double_list(const std::string& body, const std::string& key) {
    std::vector<double> vals;
    std::string item;
    std::stringstream ss(body);
    while (std::getline(ss, item, ',')) {
        const std::string t = trim(item);
        if (t.empty()) continue;
        try {
            vals.push_back(std::stod(t));
        } catch (const std::exception&) {
            throw FormatError("bad numeric entry '" + t + "' in header key " + key);
        }
    }
    return vals;
}

}  // namespace detail

inline EnviHeader read_envi_header(const std::filesystem::path& header_path) {
    std::ifstream in(header_path);
    if (!in) throw IoError("cannot open header file: " + header_path.string());

    // Collect logical "key = value" entries; {...} values may span lines.
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    EnviHeader hdr;
    bool has_samples = false, has_lines = false, has_bands = false, has_type = false,
         has_interleave = false;

    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t eol = text.find('\n', pos);
        if (eol == std::string::npos) eol = text.size();
        std::string line = text.substr(pos, eol - pos);
        pos = eol + 1;

        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) continue;  // "ENVI" magic or commentary
        std::string key = detail::lower(detail::trim(line.substr(0, eq)));
        std::string value = detail::trim(line.substr(eq + 1));

        if (!value.empty() && value.front() == '{') {
            // Accumulate until the closing brace.
            while (value.find('}') == std::string::npos && pos < text.size()) {
                eol = text.find('\n', pos);
                if (eol == std::string::npos) eol = text.size();
                value += " " + detail::trim(text.substr(pos, eol - pos));
                pos = eol + 1;
            }
            const std::size_t close = value.find('}');
            if (close == std::string::npos)
                throw FormatError("unterminated { } value for header key " + key);
            value = detail::trim(value.substr(1, close - 1));
        }

        try {
            if (key == "samples") { hdr.samples = std::stoll(value); has_samples = true; }
            else if (key == "lines") { hdr.lines = std::stoll(value); has_lines = true; }
            else if (key == "bands") { hdr.bands = std::stoll(value); has_bands = true; }
            else if (key == "header offset") { hdr.header_offset = std::stoll(value); }
            else if (key == "data type") {
                const int code = std::stoi(value);
                switch (code) {
                    case 1: hdr.data_type = EnviDataType::U8; break;
                    case 2: hdr.data_type = EnviDataType::I16; break;
                    case 4: hdr.data_type = EnviDataType::F32; break;
                    case 12: hdr.data_type = EnviDataType::U16; break;
                    default:
                        throw FormatError("unsupported ENVI data type code " + value);
                }
                has_type = true;
            } else if (key == "interleave") {
                hdr.interleave = interleave_from_name(value);
                has_interleave = true;
            } else if (key == "byte order") {
                hdr.byte_order = std::stoi(value);
                if (hdr.byte_order != 0 && hdr.byte_order != 1)
                    throw FormatError("byte order must be 0 or 1");
            } else if (key == "wavelength") {
                hdr.wavelengths = detail::parse_double_list(value, key);
            } else if (key == "units") {
                hdr.units = value;
            }
            // Unknown keys are ignored.
        } catch (const FormatError&) {
            throw;
        } catch (const std::exception&) {
            throw FormatError("bad value for header key '" + key + "': " + value);
        }
    }

    if (!has_samples || !has_lines || !has_bands || !has_type || !has_interleave)
        throw FormatError("header missing a required key (samples/lines/bands/data type/interleave): " +
                          header_path.string());
    if (hdr.samples <= 0 || hdr.lines <= 0 || hdr.bands <= 0)
        throw FormatError("header declares a non-positive dimension");
    return hdr;
}

namespace detail {

inline std::filesystem::path envi_binary_path(const std::filesystem::path& header_path) {
    std::filesystem::path stem = header_path;
    if (stem.extension() == ".hdr") {
        stem.replace_extension();
        if (std::filesystem::exists(stem)) return stem;
        for (const char* ext : {".img", ".raw", ".bin", ".dat"}) {
            std::filesystem::path alt = stem;
            alt += ext;
            if (std::filesystem::exists(alt)) return alt;
        }
        return stem;  // report the canonical candidate in the error message
    }
    return header_path;  // header path given without .hdr: treat as data path
}

inline std::uint16_t swap16(std::uint16_t v) {
    return static_cast<std::uint16_t>((v >> 8) | (v << 8));
}
inline std::uint32_t swap32(std::uint32_t v) {
    return ((v >> 24) & 0xffu) | ((v >> 8) & 0xff00u) | ((v << 8) & 0xff0000u) | (v << 24);
}

// Raw element -> double, index order as stored on disk.
inline std::vector<double> decode_elements(const std::vector<char>& raw, EnviDataType type,
                                           bool swap, std::size_t count) {
    std::vector<double> vals(count);
    switch (type) {
        case EnviDataType::U8: {
            const auto* p = reinterpret_cast<const std::uint8_t*>(raw.data());
            for (std::size_t i = 0; i < count; ++i) vals[i] = static_cast<double>(p[i]);
            break;
        }
        case EnviDataType::I16: {
            for (std::size_t i = 0; i < count; ++i) {
                std::uint16_t u;
                std::memcpy(&u, raw.data() + 2 * i, 2);
                if (swap) u = swap16(u);
                std::int16_t s;
                std::memcpy(&s, &u, 2);
                vals[i] = static_cast<double>(s);
            }
            break;
        }
        case EnviDataType::U16: {
            for (std::size_t i = 0; i < count; ++i) {
                std::uint16_t u;
                std::memcpy(&u, raw.data() + 2 * i, 2);
                if (swap) u = swap16(u);
                vals[i] = static_cast<double>(u);
            }
            break;
        }
        case EnviDataType::F32: {
            for (std::size_t i = 0; i < count; ++i) {
                std::uint32_t u;
                std::memcpy(&u, raw.data() + 4 * i, 4);
                if (swap) u = swap32(u);
                float f;
                std::memcpy(&f, &u, 4);
                vals[i] = static_cast<double>(f);
            }
            break;
        }
    }
    return vals;
}

// Disk index for (line l, sample s, band b) under the given interleave.
inline std::size_t disk_index(Interleave il, index_t l, index_t s, index_t b,
                              index_t lines, index_t samples, index_t bands) {
    switch (il) {
        case Interleave::Bsq: return static_cast<std::size_t>((b * lines + l) * samples + s);
        case Interleave::Bil: return static_cast<std::size_t>((l * bands + b) * samples + s);
        case Interleave::Bip: return static_cast<std::size_t>((l * samples + s) * bands + b);
    }
    return 0;
}

}  // namespace detail

inline HyperCube load_envi(const std::filesystem::path& header_path) {
    const EnviHeader hdr = read_envi_header(header_path);
    const std::filesystem::path bin_path = detail::envi_binary_path(header_path);

    std::ifstream bin(bin_path, std::ios::binary);
    if (!bin) throw IoError("cannot open companion binary: " + bin_path.string());
    bin.seekg(0, std::ios::end);
    const std::uint64_t file_size = static_cast<std::uint64_t>(bin.tellg());
    bin.seekg(hdr.header_offset, std::ios::beg);

    const std::size_t n_elems =
        static_cast<std::size_t>(hdr.samples) * static_cast<std::size_t>(hdr.lines) *
        static_cast<std::size_t>(hdr.bands);
    const std::size_t expected = n_elems * envi_type_size(hdr.data_type);
    if (file_size != expected + static_cast<std::uint64_t>(hdr.header_offset))
        throw FormatError("binary size mismatch for " + bin_path.string() + ": expected " +
                          std::to_string(expected) + " data bytes, found " +
                          std::to_string(file_size - hdr.header_offset));

    std::vector<char> raw(expected);
    bin.read(raw.data(), static_cast<std::streamsize>(expected));
    if (!bin) throw IoError("short read on " + bin_path.string());

    const bool swap = hdr.byte_order == 1;  // stored big endian, host is little endian
    const std::vector<double> disk = detail::decode_elements(raw, hdr.data_type, swap, n_elems);

    std::vector<double> wl = hdr.wavelengths;
    if (wl.empty()) {
        wl = even_wavelengths(hdr.bands);
    } else if (static_cast<index_t>(wl.size()) != hdr.bands) {
        throw FormatError("header wavelength count does not match band count");
    } else {
        for (index_t b = 1; b < hdr.bands; ++b)
            if (!(wl[static_cast<std::size_t>(b)] > wl[static_cast<std::size_t>(b - 1)]))
                throw FormatError("header wavelengths are not strictly increasing");
    }

    const Units units = hdr.units.empty() ? Units::RawDn : units_from_name(hdr.units);
    HyperCube cube(hdr.lines, hdr.samples, hdr.bands, std::move(wl), units);

    if (hdr.interleave == Interleave::Bip) {
        std::copy(disk.begin(), disk.end(), cube.data().begin());
    } else {
        for (index_t l = 0; l < hdr.lines; ++l)
            for (index_t s = 0; s < hdr.samples; ++s)
                for (index_t b = 0; b < hdr.bands; ++b)
                    cube(l, s, b) = disk[detail::disk_index(hdr.interleave, l, s, b, hdr.lines,
                                                            hdr.samples, hdr.bands)];
    }
    return cube;
}

namespace detail {

inline void encode_element(double v, EnviDataType type, std::vector<char>& out, std::size_t i) {
    switch (type) {
        case EnviDataType::U8: {
            long r = std::lround(v);
            r = std::clamp(r, 0l, 255l);
            out[i] = static_cast<char>(static_cast<std::uint8_t>(r));
            break;
        }
        case EnviDataType::I16: {
            long r = std::lround(v);
            r = std::clamp(r, -32768l, 32767l);
            const std::int16_t s = static_cast<std::int16_t>(r);
            std::memcpy(out.data() + 2 * i, &s, 2);
            break;
        }
        case EnviDataType::U16: {
            long r = std::lround(v);
            r = std::clamp(r, 0l, 65535l);
            const std::uint16_t u = static_cast<std::uint16_t>(r);
            std::memcpy(out.data() + 2 * i, &u, 2);
            break;
        }
        case EnviDataType::F32: {
            const float f = static_cast<float>(v);
            std::memcpy(out.data() + 4 * i, &f, 4);
            break;
        }
    }
}

}  // namespace detail

// Writes `path` (binary) and `path.hdr`. Output is always little endian.
inline void save_envi(const HyperCube& cube, const std::filesystem::path& path,
                      Interleave interleave = Interleave::Bsq,
                      EnviDataType data_type = EnviDataType::F32) {
    if (cube.lines() <= 0 || cube.samples() <= 0 || cube.bands() <= 0)
        throw DimensionError("refusing to save a cube with an empty dimension");

    std::filesystem::path hdr_path = path;
    hdr_path += ".hdr";

    {
        std::ofstream hdr(hdr_path);
        if (!hdr) throw IoError("cannot write header: " + hdr_path.string());
        hdr << "ENVI\n";
        hdr << "samples = " << cube.samples() << "\n";
        hdr << "lines = " << cube.lines() << "\n";
        hdr << "bands = " << cube.bands() << "\n";
        hdr << "header offset = 0\n";
        hdr << "data type = " << static_cast<int>(data_type) << "\n";
        hdr << "interleave = " << interleave_name(interleave) << "\n";
        hdr << "byte order = 0\n";
        if (cube.units() != Units::RawDn) hdr << "units = " << units_name(cube.units()) << "\n";
        hdr << "wavelength = {";
        char buf[64];
        for (index_t b = 0; b < cube.bands(); ++b) {
            std::snprintf(buf, sizeof buf, "%.17g", cube.wavelengths()[static_cast<std::size_t>(b)]);
            hdr << (b ? ", " : " ") << buf;
        }
        hdr << " }\n";
        if (!hdr) throw IoError("failed writing header: " + hdr_path.string());
    }

    const std::size_t n_elems = static_cast<std::size_t>(cube.pixel_count() * cube.bands());
    std::vector<char> raw(n_elems * envi_type_size(data_type));
    for (index_t l = 0; l < cube.lines(); ++l)
        for (index_t s = 0; s < cube.samples(); ++s)
            for (index_t b = 0; b < cube.bands(); ++b)
                detail::encode_element(cube(l, s, b), data_type, raw,
                                       detail::disk_index(interleave, l, s, b, cube.lines(),
                                                          cube.samples(), cube.bands()));

    std::ofstream bin(path, std::ios::binary);
    if (!bin) throw IoError("cannot write binary: " + path.string());
    bin.write(raw.data(), static_cast<std::streamsize>(raw.size()));
    if (!bin) throw IoError("failed writing binary: " + path.string());
}

}  // namespace unmix
