#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "pgrec/adam.hpp"
#include "pgrec/model.hpp"

namespace pgrec {

// Versioned binary container: config hash, run seed, every parameter tensor
// (including batch-norm running statistics) and, optionally, Adam moments.
// Round-trips are bit-exact.
struct Checkpoint {
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;
  ModelParams params;
  std::optional<AdamState> adam;
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);

// Throws on magic/version mismatch, truncation, or (when expected_hash is
// given) a config hash that differs.
Checkpoint load_checkpoint(const std::string& path,
                           std::optional<std::uint64_t> expected_hash = std::nullopt);

}  // namespace pgrec
