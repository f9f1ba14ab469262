#include <array>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <set>

#include <gtest/gtest.h>

#include "test_util.hpp"
#include "unmix/envi.hpp"
#include "unmix/hypercube.hpp"

using namespace unmix;
using testutil::TempDir;

namespace {

void write_file(const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p);
    out << text;
}

void write_floats(const std::filesystem::path& p, const std::vector<float>& values) {
    std::ofstream out(p, std::ios::binary);
    out.write(reinterpret_cast<const char*>(values.data()),
              static_cast<std::streamsize>(values.size() * sizeof(float)));
}

}  // namespace

// Bytes written by hand per the interleave definition, checked element by
// element after load.
TEST(EnviIo, LoadBsqMatchesHandWrittenLayout) {
    TempDir dir;
    // 2 lines, 2 samples, 3 bands. BSQ stores band-major: all of band 0
    // (line-major), then band 1, then band 2.
    std::vector<float> disk;
    for (int b = 0; b < 3; ++b)
        for (int l = 0; l < 2; ++l)
            for (int s = 0; s < 2; ++s)
                disk.push_back(static_cast<float>(100 * b + 10 * l + s));
    write_floats(dir / "cube", disk);
    write_file(dir / "cube.hdr",
               "ENVI\nsamples = 2\nlines = 2\nbands = 3\ndata type = 4\n"
               "interleave = bsq\nbyte order = 0\n");

    const HyperCube cube = load_envi(dir / "cube.hdr");
    ASSERT_EQ(cube.lines(), 2);
    ASSERT_EQ(cube.samples(), 2);
    ASSERT_EQ(cube.bands(), 3);
    for (index_t l = 0; l < 2; ++l)
        for (index_t s = 0; s < 2; ++s)
            for (index_t b = 0; b < 3; ++b)
                EXPECT_EQ(cube(l, s, b), 100.0 * static_cast<double>(b) + 10.0 * static_cast<double>(l) +
                                             static_cast<double>(s));
}

TEST(EnviIo, LoadBilAndBipMatchHandWrittenLayout) {
    TempDir dir;
    auto value = [](int l, int s, int b) { return static_cast<float>(100 * b + 10 * l + s); };

    // BIL: per line, per band, per sample.
    std::vector<float> bil;
    for (int l = 0; l < 2; ++l)
        for (int b = 0; b < 3; ++b)
            for (int s = 0; s < 2; ++s) bil.push_back(value(l, s, b));
    write_floats(dir / "bil", bil);
    write_file(dir / "bil.hdr",
               "samples = 2\nlines = 2\nbands = 3\ndata type = 4\ninterleave = bil\nbyte order = 0\n");

    // BIP: per line, per sample, per band.
    std::vector<float> bip;
    for (int l = 0; l < 2; ++l)
        for (int s = 0; s < 2; ++s)
            for (int b = 0; b < 3; ++b) bip.push_back(value(l, s, b));
    write_floats(dir / "bip", bip);
    write_file(dir / "bip.hdr",
               "samples = 2\nlines = 2\nbands = 3\ndata type = 4\ninterleave = bip\nbyte order = 0\n");

    const HyperCube a = load_envi(dir / "bil.hdr");
    const HyperCube b = load_envi(dir / "bip.hdr");
    for (index_t l = 0; l < 2; ++l)
        for (index_t s = 0; s < 2; ++s)
            for (index_t k = 0; k < 3; ++k) {
                EXPECT_EQ(a(l, s, k), static_cast<double>(value(static_cast<int>(l), static_cast<int>(s), static_cast<int>(k))));
                EXPECT_EQ(b(l, s, k), static_cast<double>(value(static_cast<int>(l), static_cast<int>(s), static_cast<int>(k))));
            }
}

TEST(EnviIo, SinglePixelIdentity) {
    TempDir dir;
    write_floats(dir / "one", {0.5f});
    write_file(dir / "one.hdr",
               "samples = 1\nlines = 1\nbands = 1\ndata type = 4\ninterleave = bsq\nbyte order = 0\n");
    const HyperCube cube = load_envi(dir / "one.hdr");
    EXPECT_EQ(cube.lines(), 1);
    EXPECT_EQ(cube.samples(), 1);
    EXPECT_EQ(cube.bands(), 1);
    EXPECT_DOUBLE_EQ(cube(0, 0, 0), 0.5);
}

TEST(EnviIo, RoundTripAllInterleavesBitExact) {
    TempDir dir;
    Rng rng(7);
    int case_id = 0;
    for (const auto [lines, samples, bands] :
         {std::array<index_t, 3>{4, 5, 6}, {1, 9, 3}, {7, 1, 2}, {3, 3, 17}}) {
        const HyperCube cube = testutil::random_cube(lines, samples, bands, rng);
        for (Interleave il : {Interleave::Bsq, Interleave::Bil, Interleave::Bip}) {
            const auto path =
                dir / ("rt_" + std::to_string(case_id++) + "_" + interleave_name(il));
            save_envi(cube, path, il);
            const HyperCube back = load_envi(path.string() + ".hdr");
            ASSERT_EQ(back.data().size(), cube.data().size());
            for (std::size_t i = 0; i < cube.data().size(); ++i)
                ASSERT_EQ(back.data()[i], cube.data()[i]) << "interleave " << interleave_name(il);
            EXPECT_EQ(back.wavelengths(), cube.wavelengths());
        }
    }
}

// Field cubes from the push-broom camera: 1024 samples per line, 224 bands,
// length set by the flight line.
TEST(EnviIo, SurveyScaleHeaderParses) {
    TempDir dir;
    write_file(dir / "cube1.hdr",
               "ENVI\nsamples = 1024\nlines = 3177\nbands = 224\ndata type = 4\n"
               "interleave = bil\nbyte order = 0\n");
    const EnviHeader hdr = read_envi_header(dir / "cube1.hdr");
    EXPECT_EQ(hdr.lines, 3177);
    EXPECT_EQ(hdr.samples, 1024);
    EXPECT_EQ(hdr.bands, 224);
    EXPECT_EQ(hdr.interleave, Interleave::Bil);
}

TEST(EnviIo, SizeMismatchRejected) {
    TempDir dir;
    write_floats(dir / "bad", {1.0f, 2.0f, 3.0f});  // header declares 4 values
    write_file(dir / "bad.hdr",
               "samples = 2\nlines = 2\nbands = 1\ndata type = 4\ninterleave = bsq\nbyte order = 0\n");
    EXPECT_THROW(load_envi(dir / "bad.hdr"), FormatError);
}

TEST(EnviIo, UnsupportedDataTypeRejected) {
    TempDir dir;
    write_floats(dir / "f64", {1.0f, 2.0f});
    write_file(dir / "f64.hdr",
               "samples = 2\nlines = 1\nbands = 1\ndata type = 5\ninterleave = bsq\nbyte order = 0\n");
    EXPECT_THROW(load_envi(dir / "f64.hdr"), FormatError);
}

TEST(EnviIo, NonIncreasingWavelengthsRejected) {
    TempDir dir;
    write_floats(dir / "wl", {1.0f, 2.0f});
    write_file(dir / "wl.hdr",
               "samples = 1\nlines = 1\nbands = 2\ndata type = 4\ninterleave = bsq\nbyte order = 0\n"
               "wavelength = { 700.0, 600.0 }\n");
    EXPECT_THROW(load_envi(dir / "wl.hdr"), FormatError);
}

TEST(EnviIo, MissingWavelengthsSynthesizedEvenlySpaced) {
    TempDir dir;
    write_floats(dir / "nw", {1.0f, 2.0f, 3.0f});
    write_file(dir / "nw.hdr",
               "samples = 1\nlines = 1\nbands = 3\ndata type = 4\ninterleave = bsq\nbyte order = 0\n");
    const HyperCube cube = load_envi(dir / "nw.hdr");
    ASSERT_EQ(cube.wavelengths().size(), 3u);
    EXPECT_DOUBLE_EQ(cube.wavelengths()[0], 400.0);
    EXPECT_DOUBLE_EQ(cube.wavelengths()[1], 700.0);
    EXPECT_DOUBLE_EQ(cube.wavelengths()[2], 1000.0);
}

TEST(EnviIo, BigEndianFloatDecoded) {
    TempDir dir;
    const float v = 1.5f;
    std::uint32_t u;
    std::memcpy(&u, &v, 4);
    const std::uint8_t be[4] = {static_cast<std::uint8_t>(u >> 24), static_cast<std::uint8_t>(u >> 16),
                                static_cast<std::uint8_t>(u >> 8), static_cast<std::uint8_t>(u)};
    std::ofstream(dir / "be", std::ios::binary).write(reinterpret_cast<const char*>(be), 4);
    write_file(dir / "be.hdr",
               "samples = 1\nlines = 1\nbands = 1\ndata type = 4\ninterleave = bsq\nbyte order = 1\n");
    const HyperCube cube = load_envi(dir / "be.hdr");
    EXPECT_DOUBLE_EQ(cube(0, 0, 0), 1.5);
}

TEST(EnviIo, EmptyDimensionRejectedOnSave) {
    EXPECT_THROW(HyperCube(0, 2, 2, even_wavelengths(2), Units::RawDn), DimensionError);
}

TEST(EnviIo, Uint8RoundTripForLabels) {
    TempDir dir;
    HyperCube cube(3, 2, 1, {500.0}, Units::RawDn);
    for (index_t l = 0; l < 3; ++l)
        for (index_t s = 0; s < 2; ++s) cube(l, s, 0) = static_cast<double>((l * 2 + s) % 5);
    save_envi(cube, dir / "labels", Interleave::Bsq, EnviDataType::U8);
    const HyperCube back = load_envi((dir / "labels").string() + ".hdr");
    for (index_t l = 0; l < 3; ++l)
        for (index_t s = 0; s < 2; ++s) EXPECT_EQ(back(l, s, 0), cube(l, s, 0));
}

// --- patches ---------------------------------------------------------------

TEST(Patches, CountMatchesCeilArithmetic) {
    HyperCube cube(95, 95, 2, even_wavelengths(2), Units::Reflectance);
    const PatchSet set = extract_patches(cube, 32, 32, PadMode::Reflect);
    EXPECT_EQ(set.patches.size(), 9u);  // ceil(95/32) = 3 per axis

    HyperCube mixed(1059, 341, 2, even_wavelengths(2), Units::Reflectance);
    const PatchSet set64 = extract_patches(mixed, 64, 64, PadMode::Reflect);
    EXPECT_EQ(set64.patches.size(), static_cast<std::size_t>(17 * 6));  // ceil(1059/64)*ceil(341/64)
}

TEST(Patches, ExactTilingIsIdentity) {
    Rng rng(3);
    const HyperCube cube = testutil::random_cube(32, 32, 4, rng);
    const PatchSet set = extract_patches(cube, 32, 32, PadMode::Reflect);
    ASSERT_EQ(set.patches.size(), 1u);
    EXPECT_EQ(set.patches[0], cube.data());
}

TEST(Patches, StitchReproducesCube) {
    Rng rng(11);
    const HyperCube cube = testutil::random_cube(37, 23, 3, rng);
    for (PadMode mode : {PadMode::Reflect, PadMode::Zero}) {
        const PatchSet set = extract_patches(cube, 16, 16, mode);
        const std::vector<double> back =
            stitch_patches(set.patches, set.origins, 16, 3, cube.lines(), cube.samples());
        EXPECT_EQ(back, cube.data());
    }
}

TEST(Patches, OversizedPatchNeedsZeroPadding) {
    HyperCube cube(4, 4, 1, {500.0}, Units::RawDn);
    EXPECT_THROW(extract_patches(cube, 8, 8, PadMode::Reflect), DimensionError);
    EXPECT_NO_THROW(extract_patches(cube, 8, 8, PadMode::Zero));
}

// --- augmentations ----------------------------------------------------------

namespace {

std::vector<double> index_patch(index_t p, index_t bands) {
    std::vector<double> patch(static_cast<std::size_t>(p * p * bands));
    for (std::size_t i = 0; i < patch.size(); ++i) patch[i] = static_cast<double>(i);
    return patch;
}

}  // namespace

TEST(Augment, OpZeroIsIdentity) {
    const auto patch = index_patch(5, 3);
    EXPECT_EQ(augment(patch, 5, 3, 0), patch);
}

TEST(Augment, RotationHasOrderFour) {
    const auto patch = index_patch(6, 2);
    auto cur = patch;
    for (int i = 0; i < 4; ++i) cur = augment(cur, 6, 2, 1);
    EXPECT_EQ(cur, patch);
}

TEST(Augment, MirrorActsPerBand) {
    Rng rng(5);
    const index_t p = 4, bands = 3;
    std::vector<double> patch(static_cast<std::size_t>(p * p * bands));
    for (double& v : patch) v = rng.uniform();
    const auto mirrored = augment(patch, p, bands, 4);
    for (index_t b = 0; b < bands; ++b) {
        // Band b of the mirrored patch equals band b of the input, mirrored.
        for (index_t i = 0; i < p; ++i)
            for (index_t j = 0; j < p; ++j)
                EXPECT_EQ(mirrored[static_cast<std::size_t>((i * p + (p - 1 - j)) * bands + b)],
                          patch[static_cast<std::size_t>((i * p + j) * bands + b)]);
    }
}

TEST(Augment, EightOpsFormClosedGroup) {
    const index_t p = 4;
    const auto base = index_patch(p, 1);
    std::vector<std::vector<double>> images;
    for (int op = 0; op < 8; ++op) images.push_back(augment(base, p, 1, op));

    // All eight images distinct, and composing any two lands back in the set.
    std::set<std::vector<double>> image_set(images.begin(), images.end());
    EXPECT_EQ(image_set.size(), 8u);
    for (int op1 = 0; op1 < 8; ++op1)
        for (int op2 = 0; op2 < 8; ++op2) {
            const auto composed = augment(augment(base, p, 1, op1), p, 1, op2);
            EXPECT_TRUE(image_set.count(composed)) << "ops " << op1 << "," << op2;
        }
}

TEST(Augment, PreservesSpectraMultiset) {
    Rng rng(9);
    const index_t p = 4, bands = 5;
    std::vector<double> patch(static_cast<std::size_t>(p * p * bands));
    for (double& v : patch) v = rng.uniform();
    for (int op = 0; op < 8; ++op) {
        const auto out = augment(patch, p, bands, op);
        std::multiset<std::vector<double>> in_spectra, out_spectra;
        for (index_t px = 0; px < p * p; ++px) {
            in_spectra.insert(std::vector<double>(patch.begin() + px * bands,
                                                  patch.begin() + (px + 1) * bands));
            out_spectra.insert(std::vector<double>(out.begin() + px * bands,
                                                   out.begin() + (px + 1) * bands));
        }
        EXPECT_EQ(in_spectra, out_spectra);
    }
}

TEST(Augment, NonSquarePatchRejected) {
    std::vector<double> patch(2 * 3, 0.0);
    EXPECT_THROW(augment(patch, 2, 2, 1), DimensionError);
}

TEST(ReflectanceRange, ClipsAndCounts) {
    HyperCube cube(1, 1, 3, even_wavelengths(3), Units::Reflectance);
    cube(0, 0, 0) = -0.2;
    cube(0, 0, 1) = 0.5;
    cube(0, 0, 2) = 1.2;
    const ClipStats stats = enforce_reflectance_range(cube);
    EXPECT_EQ(stats.clamped_negative, 1u);
    EXPECT_EQ(stats.clipped_overshoot, 1u);
    EXPECT_DOUBLE_EQ(cube(0, 0, 0), 0.0);
    EXPECT_DOUBLE_EQ(cube(0, 0, 2), 1.05);
}
