#include "cpo/checkpoint.hpp"

#include <fstream>
#include <limits>
#include <stdexcept>

namespace cpo {

namespace {

void write_vec(std::ostream& os, const char* key, const Vec& v) {
  os << key << ' ' << v.size();
  for (Eigen::Index i = 0; i < v.size(); ++i) os << ' ' << v(i);
  os << '\n';
}

Vec read_vec(std::istream& is, const std::string& key) {
  std::string k;
  Eigen::Index n = 0;
  if (!(is >> k >> n) || k != key || n < 0) throw std::runtime_error("checkpoint: expected '" + key + "'");
  Vec v(n);
  for (Eigen::Index i = 0; i < n; ++i)
    if (!(is >> v(i))) throw std::runtime_error("checkpoint: truncated '" + key + "'");
  return v;
}

void expect(std::istream& is, const std::string& key) {
  std::string k;
  if (!(is >> k) || k != key) throw std::runtime_error("checkpoint: expected '" + key + "'");
}

}  // namespace

void write_checkpoint(std::ostream& os, const Checkpoint& ck) {
  const auto old = os.precision(std::numeric_limits<double>::max_digits10);
  os << "cpo-checkpoint " << kCheckpointVersion << '\n';
  os << "iteration " << ck.iteration << '\n';
  os << "head " << to_string(ck.arch.head) << '\n';
  os << "obs_dim " << ck.arch.obs_dim << '\n';
  os << "act_dim " << ck.arch.act_dim << '\n';
  os << "hidden " << ck.arch.hidden.size();
  for (int h : ck.arch.hidden) os << ' ' << h;
  os << '\n';
  write_vec(os, "nu", ck.nu);
  write_vec(os, "theta", ck.theta);
  os.precision(old);
}

Checkpoint read_checkpoint(std::istream& is) {
  Checkpoint ck;
  int version = 0;
  expect(is, "cpo-checkpoint");
  if (!(is >> version) || version != kCheckpointVersion) throw std::runtime_error("checkpoint: unsupported version");
  expect(is, "iteration");
  is >> ck.iteration;
  expect(is, "head");
  std::string head;
  is >> head;
  ck.arch.head = head_from_string(head);
  expect(is, "obs_dim");
  is >> ck.arch.obs_dim;
  expect(is, "act_dim");
  is >> ck.arch.act_dim;
  expect(is, "hidden");
  std::size_t n = 0;
  is >> n;
  ck.arch.hidden.resize(n);
  for (auto& h : ck.arch.hidden) is >> h;
  if (!is) throw std::runtime_error("checkpoint: malformed header");
  ck.nu = read_vec(is, "nu");
  ck.theta = read_vec(is, "theta");
  if (ck.theta.size() != ck.arch.param_count()) throw std::runtime_error("checkpoint: parameter count mismatch");
  return ck;
}

void save_checkpoint(const std::string& path, const Checkpoint& ck) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write checkpoint " + path);
  write_checkpoint(os, ck);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read checkpoint " + path);
  return read_checkpoint(is);
}

}  // namespace cpo
