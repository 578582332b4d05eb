#include <string>
#include <vector>

#include "ipd/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return ipd::cli::run_command(args);
}
