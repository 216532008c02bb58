#include "test_support.hpp"

#include "circa/rng.hpp"

namespace circa::test {

std::filesystem::path source_dir() { return CIRCA_SOURCE_DIR; }

std::filesystem::path scratch_dir(const std::string& name) {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    std::string leaf = name;
    if (info != nullptr) leaf = std::string(info->test_suite_name()) + "." + info->name() + "." + name;
    const auto dir = std::filesystem::path(CIRCA_BINARY_DIR) / "test_scratch" / leaf;
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

imaging::RasterImage random_raster(int width, int height, std::uint64_t seed) {
    Rng rng(seed);
    imaging::RasterImage img(width, height);
    for (double& v : img.pixels()) v = rng.uniform();
    return img;
}

}  // namespace circa::test
