// Copyright (c) the perfhom contributors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "perfhom/types.hpp"

namespace perfhom {

// "re+imi" strings, e.g. "1", "1+2i", "-0.5i", "1 - 0.5i".
Complex parse_complex(const std::string& text);
std::string format_complex(Complex z);

// FNV-1a 64 over a canonical string.
std::uint64_t fnv1a64(const std::string& text);

// Entry point behind the CLI binary: exit 0 success, 2 validation error,
// 3 numerical failure (partial outputs retained).
int run_cli(const std::vector<std::string>& args);

}  // namespace perfhom
