#include <string>
#include <vector>

#include "cli.hpp"

int main(int argc, char** argv) {
  return conformal_lab::cli::run(std::vector<std::string>(argv + 1, argv + argc));
}
