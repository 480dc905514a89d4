//
// Project gcgvae - Copyright 2026 The gcgvae Authors.
// SPDX-License-Identifier: Apache-2.0
//

#include <iostream>

#include "gcgvae/pipeline.h"

int main(int argc, char **argv) {
  return gcgvae::run_cli(argc, argv, std::cout, std::cerr);
}
