// Writes the bundled synthetic corpus.

#include "CLI11.hpp"

#include "trea/app/toy.hpp"
#include "trea/error.hpp"

#include <iostream>

int main(int argc, char** argv) {
  CLI::App cli{"generate the deterministic-rule toy corpus"};
  trea::app::ToyOptions opts;
  std::string out = "data/toy";
  cli.add_option("--out", out, "output directory");
  cli.add_option("--seed", opts.seed, "generator seed");
  cli.add_option("--conversations", opts.conversations, "conversation count");
  CLI11_PARSE(cli, argc, argv);
  try {
    trea::app::write_toy(trea::app::make_toy(opts), out);
  } catch (const trea::Error& e) {
    std::cerr << "{\"error\":{\"kind\":\"" << e.kind() << "\",\"message\":\"" << e.what() << "\"}}\n";
    return 1;
  }
  return 0;
}
