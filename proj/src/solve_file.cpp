#include "cpo/solve_file.hpp"

#include <cmath>
#include <istream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace cpo {

namespace {

Vec parse_numbers(const std::string& text) {
  std::istringstream ss(text);
  std::vector<double> values;
  std::string tok;
  while (ss >> tok) {
    std::size_t used = 0;
    const double v = std::stod(tok, &used);
    if (used != tok.size() || !std::isfinite(v)) throw std::invalid_argument("bad number '" + tok + "'");
    values.push_back(v);
  }
  return Eigen::Map<Vec>(values.data(), static_cast<Eigen::Index>(values.size()));
}

}  // namespace

ProblemFile parse_problem(std::istream& in) {
  ProblemFile p;
  std::string line, h_text;
  bool have_g = false, have_c = false, have_delta = false, have_h = false;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = "line " + std::to_string(lineno) + ": ";
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw std::invalid_argument(where + "expected key = value");
    std::istringstream ks(line.substr(0, eq));
    std::string key;
    ks >> key;
    const std::string value = line.substr(eq + 1);
    try {
      if (key == "g") {
        p.g = parse_numbers(value);
        have_g = true;
      } else if (key == "b") {
        p.b.push_back(parse_numbers(value));
      } else if (key == "c") {
        p.c = parse_numbers(value);
        have_c = true;
      } else if (key == "delta") {
        const Vec d = parse_numbers(value);
        if (d.size() != 1) throw std::invalid_argument("delta takes one value");
        p.delta = d(0);
        have_delta = true;
      } else if (key == "H") {
        h_text = value;
        have_h = true;
      } else {
        throw std::invalid_argument("unknown key '" + key + "'");
      }
    } catch (const std::invalid_argument& e) {
      const std::string msg = e.what();
      throw std::invalid_argument(msg.starts_with("line ") ? msg : where + msg);
    }
  }
  if (!have_g || !have_c || !have_delta || p.b.empty()) throw std::invalid_argument("need g, b, c and delta");
  const Eigen::Index n = p.g.size();
  if (n == 0) throw std::invalid_argument("g is empty");
  for (const Vec& b : p.b)
    if (b.size() != n) throw std::invalid_argument("b has the wrong length");
  if (p.c.size() != static_cast<Eigen::Index>(p.b.size())) throw std::invalid_argument("need one c per b");
  if (!(p.delta > 0.0)) throw std::invalid_argument("delta must be positive");

  std::istringstream hs(h_text);
  std::string first;
  hs >> first;
  if (!have_h || first == "identity") {
    p.H = Mat::Identity(n, n);
  } else {
    std::vector<Vec> rows;
    std::stringstream rs(h_text);
    std::string row;
    while (std::getline(rs, row, ';')) rows.push_back(parse_numbers(row));
    if (static_cast<Eigen::Index>(rows.size()) != n) throw std::invalid_argument("H needs one row per entry of g");
    p.H.resize(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (rows[i].size() != n) throw std::invalid_argument("H row has the wrong length");
      p.H.row(i) = rows[i].transpose();
    }
    if (!p.H.isApprox(p.H.transpose(), 1e-12)) throw std::invalid_argument("H must be symmetric");
    if (Eigen::LLT<Mat>(p.H).info() != Eigen::Success) throw std::invalid_argument("H must be positive definite");
  }
  return p;
}

LqclpSolution solve_problem(const ProblemFile& p) {
  const Eigen::LDLT<Mat> ldlt(p.H);
  if (p.b.size() == 1) {
    return solve_single(make_lqclp(p.g, p.b[0], p.c(0), p.delta, ldlt.solve(p.g), ldlt.solve(p.b[0])));
  }
  Mat B(p.g.size(), static_cast<Eigen::Index>(p.b.size()));
  for (std::size_t i = 0; i < p.b.size(); ++i) B.col(static_cast<Eigen::Index>(i)) = p.b[i];
  return solve_dual_multi(-p.g, B, p.c, p.delta, [&ldlt](const Vec& v) { return Vec(ldlt.solve(v)); });
}

std::string format_solution(const LqclpSolution& s) {
  std::ostringstream os;
  os.precision(std::numeric_limits<double>::max_digits10);
  os << "case: " << to_string(s.case_tag) << '\n';
  // + 0.0 turns -0 into 0
  os << "lambda: " << s.lambda_star + 0.0 << '\n';
  os << "nu:";
  for (Eigen::Index i = 0; i < s.nu_star.size(); ++i) os << ' ' << s.nu_star(i) + 0.0;
  os << "\ndirection:";
  for (Eigen::Index i = 0; i < s.direction.size(); ++i) os << ' ' << s.direction(i) + 0.0;
  os << '\n';
  return os.str();
}

}  // namespace cpo
