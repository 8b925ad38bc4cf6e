#pragma once

#include <vector>

#include "webwrap/json.hpp"
#include "webwrap/segment.hpp"

namespace webwrap::sorter {

inline constexpr int kDefaultTopN = 10;

struct RankedIndex {
    std::size_t index = 0;  // position in the input
    int rank_sum = 0;
    bool fallback = false;
    bool operator==(const RankedIndex&) const = default;
};

// Input order is document order. Each metric is ranked descending (ties by
// input order); the first 2n of each ranking are intersected, and the
// intersection is ordered by rank sum (ties by input order) and cut to n.
// A short intersection is padded from the union of the three cut rankings.
std::vector<RankedIndex> rank_metrics(const std::vector<segment::BlockMetrics>& metrics, int n);

struct RankedBlock {
    segment::Block block;
    int rank = 0;  // 1-based output position
    bool fallback = false;
};

// Structurally identical blocks are collapsed before ranking.
std::vector<RankedBlock> sort_blocks(const std::vector<segment::Block>& blocks, int n = kDefaultTopN);

Json to_json(const RankedBlock& b);
Json report_json(const std::vector<RankedBlock>& blocks);

}  // namespace webwrap::sorter
