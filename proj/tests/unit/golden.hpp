// Copyright 2026 The compactvl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

namespace cvl::testing {

inline std::filesystem::path golden_path(const std::string& name) {
  return std::filesystem::path(COMPACTVL_TEST_DATA_DIR) / "golden" / name;
}

/// Compares `bytes` against tests/golden/<name>. With COMPACTVL_UPDATE_GOLDEN=1
/// in the environment the file is (re)written instead.
inline void expect_golden(const std::string& name, const std::vector<unsigned char>& bytes) {
  const auto path = golden_path(name);
  if (const char* update = std::getenv("COMPACTVL_UPDATE_GOLDEN"); update && std::string(update) == "1") {
    std::ofstream out(path, std::ios::binary);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    return;
  }
  std::ifstream in(path, std::ios::binary);
  ASSERT_TRUE(in) << "missing golden file " << path << " (record with COMPACTVL_UPDATE_GOLDEN=1)";
  const std::vector<unsigned char> expected((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  EXPECT_EQ(bytes.size(), expected.size()) << name;
  EXPECT_TRUE(bytes == expected) << "output differs from golden file " << name;
}

inline std::vector<unsigned char> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace cvl::testing
