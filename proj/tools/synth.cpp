// Copyright 2026 The banet Authors
// SPDX-License-Identifier: Apache-2.0

// Writes a class-conditioned synthetic dataset in the CIFAR-10 binary layout,
// for machines without the real batches.

#include <filesystem>
#include <iostream>

#include "CLI11.hpp"
#include "banet/data.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Write synthetic data_batch_1.bin and test_batch.bin", "banet-synth"};
  std::string out;
  std::uint64_t seed = 0;
  app.add_option("--out", out, "Output directory")->required();
  app.add_option("--seed", seed, "Generator seed")->capture_default_str();
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }
  try {
    std::filesystem::create_directories(out);
    banet::write_synthetic_cifar(out, seed);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  std::cout << "wrote " << out << "/data_batch_1.bin and " << out << "/test_batch.bin\n";
  return 0;
}
