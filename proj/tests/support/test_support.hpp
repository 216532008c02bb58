#pragma once

#include "circa/error.hpp"
#include "circa/imaging/raster.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <string>

namespace circa::test {

std::filesystem::path source_dir();

/// Fresh empty directory under the build tree, unique per test.
std::filesystem::path scratch_dir(const std::string& name);

/// Random raster with values in [0,1].
imaging::RasterImage random_raster(int width, int height, std::uint64_t seed);

}  // namespace circa::test

#define EXPECT_CIRCA_ERROR(stmt, expected_code)                                             \
    do {                                                                                    \
        try {                                                                               \
            stmt;                                                                           \
            ADD_FAILURE() << "expected circa::Error " << circa::to_string(expected_code);    \
        } catch (const circa::Error& circa_error_) {                                        \
            EXPECT_EQ(circa_error_.code(), expected_code) << circa_error_.what();           \
        }                                                                                   \
    } while (0)
