#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "msca/neural/tensor.hpp"

namespace msca::neural {

inline constexpr const char* kCheckpointMagic = "MSCA-CHECKPOINT";
inline constexpr int kCheckpointVersion = 1;

/// Ordered named tensors plus a key=value header (layer specs, metadata).
/// Tensor values are stored as raw little-endian 64-bit floats.
struct Checkpoint {
  std::map<std::string, std::string> header;
  std::vector<std::pair<std::string, Tensor>> tensors;

  const Tensor& tensor(const std::string& name) const;
  const std::string& value(const std::string& key) const;
};

void save_checkpoint(std::ostream& out, const Checkpoint& ckpt);
Checkpoint load_checkpoint(std::istream& in);

}  // namespace msca::neural
