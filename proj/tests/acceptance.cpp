// Acceptance suite: one PASS/FAIL line per criterion. Exit status 0 only when
// every criterion passes.

#include "check.hpp"

#include <iostream>

int main(int argc, char** argv) {
  glsurf::check::Options opts;
  if (argc > 1) opts.out_dir = argv[1];
  const auto lines = glsurf::check::run_all(opts, std::cout);
  int passed = 0;
  for (const auto& l : lines) passed += l.pass;
  std::cout << passed << " of " << lines.size() << " criteria pass\n";
  return glsurf::check::all_pass(lines) ? 0 : 4;
}
