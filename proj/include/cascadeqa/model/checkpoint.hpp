#pragma once

#include <cstdint>
#include <istream>
#include <ostream>
#include <string>

#include "cascadeqa/model/cascade.hpp"

namespace cascadeqa {

// Binary layout, all integers and reals little-endian:
//   "NCQACKPT"  u32 version
//   u64 embedding_dim, hidden, depth, context, max_span_length, seed, embedding_seed
//   u8  question_span, span_context, combined, level2, level3
//   u64 parameter count, then per parameter in store order:
//     u32 name length, name bytes, u32 rank, u64 dims[rank], f64 values[]
inline constexpr char kCheckpointMagic[8] = {'N', 'C', 'Q', 'A', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

void write_checkpoint(std::ostream& out, const CascadeModel& model);
// VersionError on a bad magic, version or parameter layout; ParseError on a
// truncated stream.
CascadeModel read_checkpoint(std::istream& in);

// Writes `path`.tmp and renames it over `path`.
void save_checkpoint(const std::string& path, const CascadeModel& model);
CascadeModel load_checkpoint(const std::string& path);

}  // namespace cascadeqa
