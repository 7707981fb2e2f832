#pragma once

// Versioned text checkpoints. Every parameter is stored under its named key
// with shortest round-trip decimal formatting, so save/load is bit-exact.

#include <iosfwd>
#include <string>

#include "qapnet/ngm.hpp"

namespace qapnet {

inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  Variant variant = Variant::kNgm;
  NetConfig config;
  TrainState state;  // optimizer moments are saved when present
};

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt);
Checkpoint read_checkpoint(std::istream& in);
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace qapnet
