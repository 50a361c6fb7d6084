#pragma once

// Acceptance suite shared by `glsurf check` and the ctest acceptance binary.
// One line per criterion; tolerances are fixed here, not configurable.

#include "glsurf/analysis.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace glsurf::check {

struct Line {
  int criterion = 0;
  bool pass = false;
  std::string summary;
  std::string detail;
};

struct Options {
  double b = 1.5;
  std::vector<double> epsilons = {0.12, 0.08, 0.055};
  SweepOptions sweep;
  /// Sweep CSVs go here when non-empty.
  std::string out_dir;
};

/// Criteria 6-9 on one finished sweep (6: energy, 7: density, 8: lower bound, 9: decay).
std::vector<Line> sweep_criteria(const SweepResult& sweep, double elapsed_seconds);

std::vector<Line> criteria_1d();
Line criterion_gauge();

/// All ten criteria; each line is written to log as soon as it is known.
std::vector<Line> run_all(const Options& opts, std::ostream& log);

std::string format(const Line& line);
bool all_pass(const std::vector<Line>& lines);

}  // namespace glsurf::check
