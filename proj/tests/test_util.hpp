#pragma once

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include "unmix/common.hpp"
#include "unmix/hypercube.hpp"

namespace testutil {

// Fresh scratch directory per call, removed on destruction.
class TempDir {
  public:
    TempDir() {
        static std::atomic<int> counter{0};
        const int id = counter++;
        path_ = std::filesystem::temp_directory_path() /
                ("unmix-test-" + std::to_string(::getpid()) + "-" + std::to_string(id));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

  private:
    std::filesystem::path path_;
};

// Random cube with float32-representable values so ENVI round trips are exact.
inline unmix::HyperCube random_cube(unmix::index_t lines, unmix::index_t samples,
                                    unmix::index_t bands, unmix::Rng& rng) {
    unmix::HyperCube cube(lines, samples, bands, unmix::even_wavelengths(bands),
                          unmix::Units::RawDn);
    for (double& v : cube.data()) v = static_cast<double>(static_cast<float>(rng.uniform()));
    return cube;
}

}  // namespace testutil
