// Copyright 2026 The compactvl Authors
// SPDX-License-Identifier: Apache-2.0

#include "compactvl/core/mac_counter.hpp"

namespace cvl {
namespace {
thread_local MacCountScope* active_scope = nullptr;
}

MacCountScope::MacCountScope() : previous_(active_scope) { active_scope = this; }

MacCountScope::~MacCountScope() {
  active_scope = previous_;
  if (previous_ != nullptr) previous_->total_ += total_;
}

void count_macs(Count n) {
  if (active_scope != nullptr) active_scope->total_ += n;
}

}  // namespace cvl
