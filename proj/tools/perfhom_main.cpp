// Copyright (c) the perfhom contributors.
// SPDX-License-Identifier: Apache-2.0

#include <string>
#include <vector>

#include "perfhom/run.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return perfhom::run_cli(args);
}
