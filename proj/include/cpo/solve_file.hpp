#pragma once

// Text problem files for `cpo solve`:
//
//   g = 1 0            objective gradient (minimized)
//   b = 0 0            one line per linear constraint b^T x + c <= 0
//   c = -1             one value per b line
//   delta = 0.5        x^T H x <= delta
//   H = identity       or rows separated by ';', e.g. H = 2 0; 0 4
//
// '#' starts a comment.

#include "cpo/lqclp.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace cpo {

struct ProblemFile {
  Vec g;
  std::vector<Vec> b;
  Vec c;
  double delta = 0.0;
  Mat H;
};

/// Throws std::invalid_argument with a line number on malformed input.
ProblemFile parse_problem(std::istream& in);

/// One constraint: closed form. Several: dual ascent on the equivalent
/// maximization of -g.
LqclpSolution solve_problem(const ProblemFile& problem);

/// Prints case, lambda, nu and the direction, one field per line.
std::string format_solution(const LqclpSolution& solution);

}  // namespace cpo
