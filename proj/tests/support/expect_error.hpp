// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <gtest/gtest.h>

#include <functional>

#include "mmknn/error.hpp"

inline void expect_kind(mmknn::ErrorKind kind, const std::function<void()>& f) {
  try {
    f();
    ADD_FAILURE() << "expected " << mmknn::to_string(kind);
  } catch (const mmknn::Error& e) {
    EXPECT_EQ(e.kind(), kind) << e.what();
  }
}
