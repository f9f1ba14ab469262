#include <gtest/gtest.h>

#include "unmix/registry.hpp"

using namespace unmix;

TEST(Registry, KnownDatasetsCarryExpectedShapes) {
    const auto samson = find_dataset("samson");
    ASSERT_TRUE(samson.has_value());
    EXPECT_EQ(samson->lines, 95);
    EXPECT_EQ(samson->samples, 95);
    EXPECT_EQ(samson->bands, 156);
    EXPECT_EQ(samson->class_count, 3);

    const auto apex = find_dataset("apex");
    ASSERT_TRUE(apex.has_value());
    EXPECT_EQ(apex->bands, 285);

    const auto dc = find_dataset("dc_mall");
    ASSERT_TRUE(dc.has_value());
    EXPECT_EQ(dc->lines, 1208);
    EXPECT_EQ(dc->samples, 307);

    for (int i = 1; i <= 3; ++i) {
        const auto cube = find_dataset("blueberry_cube" + std::to_string(i));
        ASSERT_TRUE(cube.has_value()) << i;
        EXPECT_EQ(cube->samples, 1024);
        EXPECT_EQ(cube->bands, 224);
        EXPECT_EQ(cube->class_count, 6);
    }
    EXPECT_EQ(find_dataset("blueberry_cube1")->lines, 3177);
    EXPECT_EQ(find_dataset("blueberry_cube2")->lines, 3047);
    EXPECT_EQ(find_dataset("blueberry_cube3")->lines, 2815);

    EXPECT_FALSE(find_dataset("nonesuch").has_value());
}

TEST(Registry, ReferenceRowsMatchPublishedNumbers) {
    auto row = [](const std::string& dataset, const std::string& model) {
        for (const auto& r : reference_results())
            if (r.dataset == dataset && r.model == model) return r;
        ADD_FAILURE() << "missing row " << dataset << "/" << model;
        return ReferenceResult{};
    };

    const ReferenceResult samson = row("samson", "proposed");
    EXPECT_DOUBLE_EQ(samson.mrmse, 0.4301);
    EXPECT_DOUBLE_EQ(samson.msad, 0.1507);
    EXPECT_DOUBLE_EQ(samson.re, 0.0526);
    EXPECT_EQ(samson.epochs, 1001);

    const ReferenceResult blueberry = row("blueberry_cube1", "proposed");
    EXPECT_DOUBLE_EQ(blueberry.mrmse, 0.3112);
    EXPECT_DOUBLE_EQ(blueberry.re, 0.0752);
    EXPECT_EQ(blueberry.epochs, 3001);

    const ReferenceResult transformer = row("samson", "transformer");
    EXPECT_DOUBLE_EQ(transformer.re, 0.1675);
    EXPECT_EQ(transformer.epochs, 1000);

    // Each known dataset has both comparison rows.
    for (const auto& d : dataset_registry()) {
        int count = 0;
        for (const auto& r : reference_results())
            if (r.dataset == d.name) ++count;
        EXPECT_EQ(count, 2) << d.name;
    }
}
