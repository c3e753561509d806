#define DOCTEST_CONFIG_IMPLEMENT
#include <malloc.h>

#include "doctest.h"

int main(int argc, char** argv) {
  // Keep large training buffers on the heap instead of fresh mmaps.
  mallopt(M_MMAP_THRESHOLD, 256 << 20);
  mallopt(M_TRIM_THRESHOLD, 512 << 20);
  doctest::Context context(argc, argv);
  return context.run();
}
