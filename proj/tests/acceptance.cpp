// Acceptance suite: one line per criterion, nonzero exit if any fail.
// Placeholder until the full suite lands.
#include <cstdio>

int main() {
  std::puts("acceptance: placeholder");
  return 1;
}
