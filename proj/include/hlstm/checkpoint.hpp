#pragma once

#include <string>

#include "hlstm/config.hpp"
#include "hlstm/model.hpp"

namespace hlstm {

// Layout, all integers little-endian:
//   "HLSTMCKP"  u32 version  u64 n  <n bytes of config JSON>
//   u64 tensor count, then per tensor:
//   u32 name length, name, u32 rank, u64 dims[rank], f64 values[prod(dims)]

inline constexpr unsigned kCheckpointVersion = 1;

/// Throws FileError on I/O failure.
void save_checkpoint(const std::string& path, const HLstmModel& model);

/// Restores the stored config and parameters. Throws FileError, FormatError
/// for a damaged container, and ShapeMismatchError when the tensors do not
/// fit the stored config.
HLstmModel load_checkpoint(const std::string& path);

/// As above, but tensors must fit `expected` instead of the stored config;
/// the model is returned with `expected` as its config.
HLstmModel load_checkpoint(const std::string& path, const ModelConfig& expected);

}  // namespace hlstm
