#include <cmath>

#include <gtest/gtest.h>

#include "test_util.hpp"
#include "unmix/groundtruth.hpp"

using namespace unmix;

namespace {

EndmemberSet two_separated_endmembers(index_t bands) {
    EndmemberSet set;
    set.signatures.resize(2, bands);
    for (index_t b = 0; b < bands; ++b) {
        set.signatures(0, b) = 0.1;
        set.signatures(1, b) = 0.9;
    }
    set.names = {"low", "high"};
    return set;
}

}  // namespace

TEST(ClassifyCube, ExactEndmemberPixelGetsItsLabel) {
    Rng rng(1);
    EndmemberSet set;
    set.signatures.resize(5, 12);
    for (index_t e = 0; e < 5; ++e)
        for (index_t b = 0; b < 12; ++b) set.signatures(e, b) = rng.uniform();
    set.names = {"a", "b", "c", "d", "e"};

    HyperCube cube(1, 1, 12, even_wavelengths(12), Units::Reflectance);
    for (index_t b = 0; b < 12; ++b) cube(0, 0, b) = set.signatures(3, b);

    const ClassMap map = classify_cube(cube, set);
    EXPECT_EQ(map.label(0, 0), 3);
    EXPECT_NEAR(map.rmse_map[0], 0.0, 1e-9);
}

TEST(ClassifyCube, MixturePixelGoesToCloserEndmember) {
    const EndmemberSet set = two_separated_endmembers(8);
    HyperCube cube(1, 1, 8, even_wavelengths(8), Units::Reflectance);
    // 0.4*low + 0.6*high sits closer to "high".
    for (index_t b = 0; b < 8; ++b)
        cube(0, 0, b) = 0.4 * set.signatures(0, b) + 0.6 * set.signatures(1, b);

    // Verify the expected label by computing both RMSE values explicitly.
    double d0 = 0.0, d1 = 0.0;
    for (index_t b = 0; b < 8; ++b) {
        d0 += std::pow(cube(0, 0, b) - set.signatures(0, b), 2);
        d1 += std::pow(cube(0, 0, b) - set.signatures(1, b), 2);
    }
    ASSERT_LT(d1, d0);

    const ClassMap map = classify_cube(cube, set);
    EXPECT_EQ(map.label(0, 0), 1);
    EXPECT_NEAR(map.rmse_map[0], std::sqrt(d1 / 8.0), 1e-12);
}

TEST(ClassifyCube, IdempotentAndTieBreaksLow) {
    Rng rng(2);
    const HyperCube cube = testutil::random_cube(6, 7, 8, rng);
    EndmemberSet set = two_separated_endmembers(8);
    const ClassMap first = classify_cube(cube, set);
    const ClassMap second = classify_cube(cube, set);
    EXPECT_EQ(first.labels, second.labels);

    // Duplicate endmembers: ties must keep the lowest index.
    set.signatures.row(1) = set.signatures.row(0);
    const ClassMap tied = classify_cube(cube, set);
    for (int label : tied.labels) EXPECT_EQ(label, 0);
}

TEST(ClassifyCube, BandMismatchRejected) {
    HyperCube cube(1, 1, 4, even_wavelengths(4), Units::Reflectance);
    EXPECT_THROW(classify_cube(cube, two_separated_endmembers(5)), DimensionError);
}

TEST(ClassStatistics, SinglePixelClassHasZeroSigma) {
    const EndmemberSet set = two_separated_endmembers(3);
    HyperCube cube(1, 2, 3, even_wavelengths(3), Units::Reflectance);
    for (index_t b = 0; b < 3; ++b) {
        cube(0, 0, b) = 0.1;
        cube(0, 1, b) = 0.9;
    }
    const ClassMap map = classify_cube(cube, set);
    const ClassStats stats = class_statistics(cube, map);
    EXPECT_EQ(stats.count, (std::vector<index_t>{1, 1}));
    EXPECT_NEAR(stats.sigma.cwiseAbs().maxCoeff(), 0.0, 1e-12);
}

TEST(ClassStatistics, HandComputedMeanAndSigma) {
    ClassMap map;
    map.lines = 1;
    map.samples = 2;
    map.labels = {0, 0};
    map.class_names = {"only"};
    HyperCube cube(1, 2, 4, even_wavelengths(4), Units::Reflectance);
    for (index_t b = 0; b < 4; ++b) {
        cube(0, 0, b) = 0.0;
        cube(0, 1, b) = 2.0;
    }
    const ClassStats stats = class_statistics(cube, map);
    for (index_t b = 0; b < 4; ++b) {
        EXPECT_DOUBLE_EQ(stats.mean(0, b), 1.0);
        EXPECT_DOUBLE_EQ(stats.sigma(0, b), 1.0);  // population sigma
    }
}

TEST(ClassStatistics, MonteCarloGaussianWithinFivePercent) {
    Rng rng(123);
    const index_t n = 10000, bands = 4;
    const double mu = 0.6, sig = 0.12;
    HyperCube cube(100, 100, bands, even_wavelengths(bands), Units::Reflectance);
    for (double& v : cube.data()) v = mu + sig * rng.normal();
    ClassMap map;
    map.lines = 100;
    map.samples = 100;
    map.labels.assign(static_cast<std::size_t>(n), 0);
    map.class_names = {"gauss"};
    const ClassStats stats = class_statistics(cube, map);
    for (index_t b = 0; b < bands; ++b) {
        EXPECT_NEAR(stats.mean(0, b), mu, 0.05 * mu);
        EXPECT_NEAR(stats.sigma(0, b), sig, 0.05 * sig);
    }
}

TEST(ClassStatistics, CountsSumToPixelsAndMeanInsideRange) {
    Rng rng(7);
    const HyperCube cube = testutil::random_cube(9, 11, 5, rng);
    const EndmemberSet set = two_separated_endmembers(5);
    const ClassMap map = classify_cube(cube, set);
    const ClassStats stats = class_statistics(cube, map);

    index_t total = 0;
    for (index_t c : stats.count) total += c;
    EXPECT_EQ(total, cube.pixel_count());

    for (index_t e = 0; e < 2; ++e) {
        if (stats.count[static_cast<std::size_t>(e)] == 0) continue;
        for (index_t b = 0; b < 5; ++b) {
            double lo = 1e18, hi = -1e18;
            for (index_t p = 0; p < cube.pixel_count(); ++p)
                if (map.labels[static_cast<std::size_t>(p)] == static_cast<int>(e)) {
                    lo = std::min(lo, cube.spectrum(p)[b]);
                    hi = std::max(hi, cube.spectrum(p)[b]);
                }
            EXPECT_GE(stats.mean(e, b), lo - 1e-12);
            EXPECT_LE(stats.mean(e, b), hi + 1e-12);
        }
    }
}

TEST(WithinVarianceCheck, DefaultEnvelopeIsOnePointFiveSigma) {
    EXPECT_DOUBLE_EQ(kDefaultVarianceK, 1.5);
}

TEST(WithinVarianceCheck, EnvelopeFractions) {
    ClassStats stats;
    stats.mean = Eigen::MatrixXd::Constant(1, 4, 0.5);
    stats.sigma = Eigen::MatrixXd::Constant(1, 4, 0.1);
    stats.count = {10};

    EXPECT_DOUBLE_EQ(within_variance_check(Eigen::VectorXd::Constant(4, 0.5), stats, 0), 1.0);

    const double k = kDefaultVarianceK;
    Eigen::VectorXd off = Eigen::VectorXd::Constant(4, 0.5 + 2.0 * k * 0.1);
    EXPECT_DOUBLE_EQ(within_variance_check(off, stats, 0, k), 0.0);

    Eigen::VectorXd half(4);
    half << 0.5, 0.5, 0.5 + 2.0 * k * 0.1, 0.5 - 2.0 * k * 0.1;
    EXPECT_DOUBLE_EQ(within_variance_check(half, stats, 0, k), 0.5);

    EXPECT_THROW(within_variance_check(half, stats, 3, k), BadInputError);
}

TEST(ResampleOutliers, NoOutliersMeansIdentity) {
    const EndmemberSet set = two_separated_endmembers(3);
    HyperCube cube(2, 2, 3, even_wavelengths(3), Units::Reflectance);
    for (index_t p = 0; p < 4; ++p)
        for (index_t b = 0; b < 3; ++b)
            cube.data()[static_cast<std::size_t>(p * 3 + b)] = (p < 2) ? 0.1 : 0.9;
    const ClassMap map = classify_cube(cube, set);
    const ClassStats stats = class_statistics(cube, map);
    const HyperCube out = resample_outliers(cube, map, stats, 1.5, 3);
    EXPECT_EQ(out.data(), cube.data());
}

TEST(ResampleOutliers, InjectedOutlierReplacedByInVariancePixel) {
    Rng rng(31);
    const index_t bands = 6;
    HyperCube cube(10, 10, bands, even_wavelengths(bands), Units::Reflectance);
    for (double& v : cube.data()) v = 0.5 + 0.02 * rng.normal();

    ClassMap map;
    map.lines = 10;
    map.samples = 10;
    map.labels.assign(100, 0);
    map.class_names = {"all"};
    ClassStats stats = class_statistics(cube, map);

    // Push one pixel to mean + 10 sigma in one band.
    HyperCube spiked = cube;
    spiked(4, 7, 2) = stats.mean(0, 2) + 10.0 * stats.sigma(0, 2);
    stats = class_statistics(spiked, map);  // stats of the spiked cube

    const HyperCube out = resample_outliers(spiked, map, stats, 1.5, 17);
    EXPECT_TRUE(within_variance(out.spectrum(4, 7), stats, 0, 1.5));
    // Replacement must copy a whole existing in-class pixel.
    bool found = false;
    for (index_t p = 0; p < 100 && !found; ++p) {
        bool same = true;
        for (index_t b = 0; b < bands; ++b)
            same = same && spiked.spectrum(p)[b] == out.spectrum(4, 7)[b];
        found = same;
    }
    EXPECT_TRUE(found);

    // Full-cube invariant: every pixel passes the k-sigma predicate afterward.
    for (index_t p = 0; p < 100; ++p)
        EXPECT_TRUE(within_variance(out.spectrum(p), stats, 0, 1.5));
}

TEST(ResampleOutliers, DeterministicForFixedSeed) {
    Rng rng(37);
    HyperCube cube(8, 8, 4, even_wavelengths(4), Units::Reflectance);
    for (double& v : cube.data()) v = rng.uniform();
    ClassMap map;
    map.lines = 8;
    map.samples = 8;
    map.labels.assign(64, 0);
    map.class_names = {"c"};
    const ClassStats stats = class_statistics(cube, map);
    const HyperCube a = resample_outliers(cube, map, stats, 0.8, 5);
    const HyperCube b = resample_outliers(cube, map, stats, 0.8, 5);
    EXPECT_EQ(a.data(), b.data());
}

TEST(ResampleOutliers, ClassWithoutInVariancePixelsIsAnError) {
    HyperCube cube(1, 2, 2, even_wavelengths(2), Units::Reflectance);
    cube(0, 0, 0) = 0.1;
    cube(0, 0, 1) = 0.1;
    cube(0, 1, 0) = 0.9;
    cube(0, 1, 1) = 0.9;
    ClassMap map;
    map.lines = 1;
    map.samples = 2;
    map.labels = {0, 0};
    map.class_names = {"c"};
    // Stats not derived from the cube: mean far away, tiny sigma.
    ClassStats stats;
    stats.mean = Eigen::MatrixXd::Constant(1, 2, 10.0);
    stats.sigma = Eigen::MatrixXd::Constant(1, 2, 1e-3);
    stats.count = {2};
    EXPECT_THROW(resample_outliers(cube, map, stats, 1.5, 0), NumericError);
}

TEST(ClassMapIo, RoundTripWithSidecar) {
    testutil::TempDir dir;
    ClassMap map;
    map.lines = 3;
    map.samples = 4;
    map.labels = {0, 1, 2, 1, 0, 0, 2, 2, 1, 0, 1, 2};
    map.class_names = {"soil", "grass", "water"};
    map.rmse_map.assign(12, 0.0);
    save_classmap(map, dir / "classes");
    const ClassMap back = load_classmap(dir / "classes");
    EXPECT_EQ(back.labels, map.labels);
    EXPECT_EQ(back.class_names, map.class_names);
}
