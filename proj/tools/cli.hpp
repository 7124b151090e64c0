// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <ostream>

namespace mmknn::cli {

/// Runs the mmknn command line. Returns 0 on success, 2 on usage errors and
/// 1 when a command fails validation or processing.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace mmknn::cli
