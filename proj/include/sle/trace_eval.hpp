#pragma once

#include <cstdint>
#include <vector>

#include "sle/loewner.hpp"

namespace sle {

struct TraceEvalStats {
  std::uint64_t direct_maps = 0;
  std::uint64_t series_applies = 0;
  std::uint64_t nodes_built = 0;
  std::uint64_t nodes_rejected = 0;
};

// Blocked tip evaluation.  Consecutive inverse slit maps are grouped into
// power-of-two blocks; each block map is represented by a truncated Laurent
// series about a real center, valid outside a radius covering the block hull
// footprint.  Every node is checked against exact composition at build time,
// and evaluation falls back to smaller blocks or direct maps whenever a point
// sits too close to a block's active zone, so the output agrees with the
// serial reference to 1e-10.
void compute_trace_blocked(const LoewnerChain& chain, std::vector<cplx>& out,
                           TraceEvalStats* stats = nullptr);

}  // namespace sle
