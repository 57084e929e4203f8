#include <vector>

#include "regram/cli.hpp"

int main(int argc, char** argv) {
  return regram::run(std::vector<std::string>(argv + 1, argv + argc));
}
