// Helper for the CLI smoke test.
//   cli_fixture make DIR          writes DIR/data (two synthetic triplets) and DIR/grey.png
//   cli_fixture constant PNG V    exits 0 iff every byte of PNG equals V
#include <algorithm>
#include <cstdlib>
#include <iostream>
#include <string>

#include "prnet/image.hpp"
#include "prnet/train.hpp"

int main(int argc, char** argv) {
  const std::string mode = argc > 1 ? argv[1] : "";
  if (mode == "make" && argc == 3) {
    const std::filesystem::path dir = argv[2];
    prnet::write_dataset(prnet::synthetic_triplets(2, 32, 5), dir / "data");
    prnet::write_png(prnet::Image(40, 24, 128), dir / "grey.png");
    return EXIT_SUCCESS;
  }
  if (mode == "constant" && argc == 4) {
    const auto image = prnet::read_png(argv[2]);
    const int value = std::stoi(argv[3]);
    const bool ok = std::all_of(image.pixels.begin(), image.pixels.end(), [&](auto p) { return p == value; });
    std::cout << (ok ? "constant " : "not constant ") << value << '\n';
    return ok ? EXIT_SUCCESS : EXIT_FAILURE;
  }
  std::cerr << "usage: cli_fixture make DIR | cli_fixture constant PNG VALUE\n";
  return 2;
}
