#include <string>
#include <vector>

#include "twinlat/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return twinlat::cli::run_command(args);
}
