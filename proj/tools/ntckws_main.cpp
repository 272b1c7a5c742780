// tools/ntckws_main.cpp

#include "ntckws/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return ntckws::cli::run(std::move(args));
}
