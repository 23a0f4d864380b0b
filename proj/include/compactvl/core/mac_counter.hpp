// Copyright 2026 The compactvl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "compactvl/core/types.hpp"

namespace cvl {

// Live networks report every multiply-accumulate they perform in a matmul or
// convolution here. Counting is per thread and only active inside a scope.
class MacCountScope {
 public:
  MacCountScope();
  ~MacCountScope();
  MacCountScope(const MacCountScope&) = delete;
  MacCountScope& operator=(const MacCountScope&) = delete;

  Count total() const { return total_; }

 private:
  friend void count_macs(Count n);
  Count total_ = 0;
  MacCountScope* previous_ = nullptr;
};

/// Adds `n` MACs to the innermost active scope on this thread (no-op otherwise).
void count_macs(Count n);

}  // namespace cvl
