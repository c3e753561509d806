#include <malloc.h>

#include <iostream>
#include <string>
#include <vector>

#include "pmatch/cli.hpp"

int main(int argc, char** argv) {
  // Training allocates and frees large batch matrices every step; keep them
  // on the heap instead of round-tripping through mmap.
  mallopt(M_MMAP_THRESHOLD, 256 << 20);
  mallopt(M_TRIM_THRESHOLD, 512 << 20);
  std::vector<std::string> args(argv + 1, argv + argc);
  return pmatch::run_cli(args, std::cout, std::cerr);
}
