#include <gtest/gtest.h>

#include "test_util.hpp"
#include "unmix/mixer.hpp"

using namespace unmix;

namespace {

ClassMap random_classmap(index_t lines, index_t samples, index_t classes, Rng& rng) {
    ClassMap map;
    map.lines = lines;
    map.samples = samples;
    map.class_names.clear();
    for (index_t e = 0; e < classes; ++e) map.class_names.push_back("c" + std::to_string(e));
    map.labels.resize(static_cast<std::size_t>(lines * samples));
    for (auto& l : map.labels) l = static_cast<int>(rng.below(static_cast<std::uint64_t>(classes)));
    return map;
}

}  // namespace

TEST(MixCube, PublishedCubeOneGeometry) {
    Rng rng(1);
    HyperCube cube(3177, 1024, 2, even_wavelengths(2), Units::Reflectance);
    for (double& v : cube.data()) v = rng.uniform();
    const ClassMap map = random_classmap(3177, 1024, 6, rng);
    const auto [mixed, abundance] = mix_cube(cube, map, 3);
    EXPECT_EQ(mixed.lines(), 1059);
    EXPECT_EQ(mixed.samples(), 341);
    EXPECT_EQ(abundance.lines, 1059);
    EXPECT_EQ(abundance.samples, 341);
    EXPECT_EQ(abundance.classes, 6);
}

TEST(MixCube, FloorDivisionForAllKernels) {
    Rng rng(2);
    HyperCube cube(11, 13, 2, even_wavelengths(2), Units::Reflectance);
    for (double& v : cube.data()) v = rng.uniform();
    const ClassMap map = random_classmap(11, 13, 3, rng);
    for (index_t kernel : {2, 3, 4}) {
        const auto [mixed, abundance] = mix_cube(cube, map, kernel);
        EXPECT_EQ(mixed.lines(), 11 / kernel);
        EXPECT_EQ(mixed.samples(), 13 / kernel);
    }
}

TEST(MixCube, PureWindowGivesUnitAbundance) {
    Rng rng(3);
    HyperCube cube(3, 3, 4, even_wavelengths(4), Units::Reflectance);
    for (double& v : cube.data()) v = rng.uniform();
    ClassMap map;
    map.lines = 3;
    map.samples = 3;
    map.labels.assign(9, 2);
    map.class_names = {"a", "b", "c"};

    const auto [mixed, abundance] = mix_cube(cube, map, 3);
    ASSERT_EQ(mixed.pixel_count(), 1);
    EXPECT_DOUBLE_EQ(abundance(0, 0, 0), 0.0);
    EXPECT_DOUBLE_EQ(abundance(0, 0, 1), 0.0);
    EXPECT_DOUBLE_EQ(abundance(0, 0, 2), 1.0);
    for (index_t b = 0; b < 4; ++b) {
        double mean = 0.0;
        for (index_t l = 0; l < 3; ++l)
            for (index_t s = 0; s < 3; ++s) mean += cube(l, s, b);
        EXPECT_NEAR(mixed(0, 0, b), mean / 9.0, 1e-15);
    }
}

TEST(MixCube, CountFractionsComeOutExact) {
    HyperCube cube(3, 3, 1, {500.0}, Units::Reflectance);
    ClassMap map;
    map.lines = 3;
    map.samples = 3;
    // Six pixels of class 0, three of class 1.
    map.labels = {0, 0, 0, 0, 0, 0, 1, 1, 1};
    map.class_names = {"zero", "one", "two"};
    const auto [mixed, abundance] = mix_cube(cube, map, 3);
    EXPECT_DOUBLE_EQ(abundance(0, 0, 0), 2.0 / 3.0);
    EXPECT_DOUBLE_EQ(abundance(0, 0, 1), 1.0 / 3.0);
    EXPECT_DOUBLE_EQ(abundance(0, 0, 2), 0.0);
}

TEST(MixCube, AbundancesAlwaysOnSimplex) {
    Rng rng(4);
    HyperCube cube(17, 19, 3, even_wavelengths(3), Units::Reflectance);
    for (double& v : cube.data()) v = rng.uniform();
    const ClassMap map = random_classmap(17, 19, 4, rng);
    for (index_t kernel : {2, 3, 4}) {
        const auto [mixed, abundance] = mix_cube(cube, map, kernel);
        abundance.validate_simplex();
    }
}

// If every pixel equals its class signature exactly, each mixed spectrum is
// the abundance-weighted endmember sum to machine precision.
TEST(MixCube, LinearMixingConsistency) {
    Rng rng(5);
    const index_t bands = 16, classes = 4;
    Eigen::MatrixXd signatures(classes, bands);
    for (index_t e = 0; e < classes; ++e)
        for (index_t b = 0; b < bands; ++b) signatures(e, b) = rng.uniform();

    HyperCube cube(9, 12, bands, even_wavelengths(bands), Units::Reflectance);
    const ClassMap map = random_classmap(9, 12, classes, rng);
    for (index_t p = 0; p < cube.pixel_count(); ++p)
        for (index_t b = 0; b < bands; ++b)
            cube.data()[static_cast<std::size_t>(p * bands + b)] =
                signatures(map.labels[static_cast<std::size_t>(p)], b);

    const auto [mixed, abundance] = mix_cube(cube, map, 3);
    for (index_t p = 0; p < mixed.pixel_count(); ++p) {
        for (index_t b = 0; b < bands; ++b) {
            double expected = 0.0;
            for (index_t e = 0; e < classes; ++e)
                expected += abundance.values[static_cast<std::size_t>(p * classes + e)] * signatures(e, b);
            EXPECT_NEAR(mixed.spectrum(p)[b], expected, 1e-12);
        }
    }
}

TEST(MixCube, KernelBoundsEnforced) {
    Rng rng(6);
    HyperCube cube(4, 4, 2, even_wavelengths(2), Units::Reflectance);
    const ClassMap map = random_classmap(4, 4, 2, rng);
    EXPECT_THROW(mix_cube(cube, map, 1), BadInputError);
    EXPECT_THROW(mix_cube(cube, map, 5), BadInputError);
}

TEST(AbundanceIo, RoundTripWithSidecar) {
    testutil::TempDir dir;
    Rng rng(7);
    AbundanceMap map;
    map.lines = 3;
    map.samples = 2;
    map.classes = 3;
    map.class_names = {"x", "y", "z"};
    map.values.resize(18);
    for (index_t p = 0; p < 6; ++p) {
        // float32-representable simplex entries so the f32 file round-trips
        float a = static_cast<float>(0.25), b = static_cast<float>(0.5);
        map.values[static_cast<std::size_t>(3 * p)] = a;
        map.values[static_cast<std::size_t>(3 * p + 1)] = b;
        map.values[static_cast<std::size_t>(3 * p + 2)] = 1.0 - a - b;
    }
    save_abundance(map, dir / "abund");
    const AbundanceMap back = load_abundance(dir / "abund");
    EXPECT_EQ(back.classes, 3);
    EXPECT_EQ(back.class_names, map.class_names);
    EXPECT_EQ(back.values, map.values);
    back.validate_simplex();
}
