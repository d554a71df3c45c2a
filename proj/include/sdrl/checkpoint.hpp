#pragma once

#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "sdrl/nn.hpp"

namespace sdrl {

// Parameter fragment, little-endian:
//   u64 name_len | name bytes
//   u64 rows | u64 cols
//   f64 weight[rows*cols], row-major
//   u8  mask bits, packed little-endian within each byte (entry 8j+i is
//       bit i of byte j), ceil(n/8) bytes
//   f64 m1[n] | f64 m2[n]
//   u64 step_count | u8 sparsifiable
void write_param_fragment(std::ostream& os, const MaskedParameter& p);
MaskedParameter read_param_fragment(std::istream& is);
// Reads into an existing parameter, checking name and shape.
void read_param_fragment_into(std::istream& is, MaskedParameter& p);

struct CheckpointHeader {
  std::uint32_t version = 1;
  std::uint64_t config_hash = 0;
  std::uint64_t step = 0;
};

void write_checkpoint_header(std::ostream& os, const CheckpointHeader& h);
CheckpointHeader read_checkpoint_header(std::istream& is);

}  // namespace sdrl
