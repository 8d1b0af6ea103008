#pragma once

// Versioned text checkpoints: architecture descriptor, iteration counter,
// dual variables and the flat policy parameters at full precision.

#include "cpo/policy.hpp"

#include <iosfwd>
#include <string>

namespace cpo {

inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  int iteration = 0;
  PolicyArch arch;
  Vec theta;
  Vec nu;  // PDO dual variables, empty otherwise
};

void write_checkpoint(std::ostream& os, const Checkpoint& ck);
/// Throws std::runtime_error on a malformed or wrong-version stream.
Checkpoint read_checkpoint(std::istream& is);

void save_checkpoint(const std::string& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace cpo
