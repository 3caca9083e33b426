// Writes the synthetic infrared/visible fixture to a directory.

#include <iostream>

#include "CLI11.hpp"
#include "msgf/error.hpp"
#include "msgf/fixture.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Write the synthetic disk/texture fixture"};
  std::string dir;
  msgf::FixtureOptions opts;
  app.add_option("dir", dir, "Output directory")->required();
  app.add_option("--size", opts.size, "Image side in pixels")->check(CLI::Range(16, 4096));
  app.add_option("--seed", opts.seed, "Texture noise seed");
  CLI11_PARSE(app, argc, argv);
  try {
    std::cout << msgf::write_fixture(dir, opts).string() << '\n';
  } catch (const msgf::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
