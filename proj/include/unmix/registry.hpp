#pragma once

// Built-in dataset descriptors and published reference results. The registry
// only validates shapes; obtaining the cubes themselves is manual.

#include <optional>
#include <string>
#include <vector>

#include "unmix/common.hpp"

namespace unmix {

struct DatasetDescriptor {
    std::string name;
    index_t lines = 0;
    index_t samples = 0;
    index_t bands = 0;
    index_t class_count = 0;
};

inline const std::vector<DatasetDescriptor>& dataset_registry() {
    static const std::vector<DatasetDescriptor> registry = {
        {"samson", 95, 95, 156, 3},
        {"apex", 110, 110, 285, 4},
        {"dc_mall", 1208, 307, 191, 7},
        {"blueberry_cube1", 3177, 1024, 224, 6},
        {"blueberry_cube2", 3047, 1024, 224, 6},
        {"blueberry_cube3", 2815, 1024, 224, 6},
    };
    return registry;
}

inline std::optional<DatasetDescriptor> find_dataset(const std::string& name) {
    for (const auto& d : dataset_registry())
        if (d.name == name) return d;
    return std::nullopt;
}

// Published evaluation results consumed as reference rows in reports; these
// are never recomputed here.
struct ReferenceResult {
    std::string dataset;
    std::string model;
    double mrmse;
    double msad;
    double re;
    index_t epochs;
};

inline const std::vector<ReferenceResult>& reference_results() {
    static const std::vector<ReferenceResult> rows = {
        {"apex", "proposed", 0.4705, 0.1737, 0.0990, 1001},
        {"apex", "transformer", 0.5555, 0.2025, 0.1048, 1000},
        {"dc_mall", "proposed", 0.3971, 0.3764, 0.0480, 1001},
        {"dc_mall", "transformer", 0.3918, 0.3009, 0.0232, 1000},
        {"samson", "proposed", 0.4301, 0.1507, 0.0526, 1001},
        {"samson", "transformer", 0.6031, 0.2400, 0.1675, 1000},
        {"blueberry_cube1", "proposed", 0.3112, 0.2737, 0.0752, 3001},
        {"blueberry_cube1", "transformer", 0.4845, 0.3951, 0.3012, 1000},
        {"blueberry_cube2", "proposed", 0.3740, 0.2591, 0.1263, 3001},
        {"blueberry_cube2", "transformer", 0.4511, 0.4012, 0.2860, 1000},
        {"blueberry_cube3", "proposed", 0.3088, 0.2214, 0.0978, 3001},
        {"blueberry_cube3", "transformer", 0.4232, 0.3852, 0.2645, 1000},
    };
    return rows;
}

}  // namespace unmix
