// Copyright 2026 The compactvl Authors
// SPDX-License-Identifier: Apache-2.0

#include "compactvl/core/hash.hpp"

#include <cstdio>

namespace cvl {

std::string hex64(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(value));
  return std::string(buf, 16);
}

}  // namespace cvl
