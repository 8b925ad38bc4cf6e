#include "webwrap/sorter.hpp"

#include <algorithm>
#include <array>
#include <numeric>
#include <set>

#include "webwrap/error.hpp"

namespace webwrap::sorter {

std::vector<RankedIndex> rank_metrics(const std::vector<segment::BlockMetrics>& metrics, int n) {
    if (n < 1) throw ValidationError("top_n must be at least 1");
    const std::size_t count = metrics.size();
    const std::size_t keep = std::min(count, static_cast<std::size_t>(2 * n));

    using Getter = int (*)(const segment::BlockMetrics&);
    const std::array<Getter, 3> getters = {
        [](const segment::BlockMetrics& m) { return m.sub_block_count; },
        [](const segment::BlockMetrics& m) { return m.word_count; },
        [](const segment::BlockMetrics& m) { return m.size_proxy; },
    };

    std::vector<int> rank_sum(count, 0);
    std::vector<int> in_top(count, 0);
    std::set<std::size_t> in_union;
    for (auto get : getters) {
        std::vector<std::size_t> order(count);
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return get(metrics[a]) > get(metrics[b]); });
        for (std::size_t pos = 0; pos < count; ++pos) {
            rank_sum[order[pos]] += static_cast<int>(pos) + 1;
            if (pos < keep) {
                ++in_top[order[pos]];
                in_union.insert(order[pos]);
            }
        }
    }

    auto by_sum = [&](std::size_t a, std::size_t b) {
        return rank_sum[a] != rank_sum[b] ? rank_sum[a] < rank_sum[b] : a < b;
    };
    std::vector<std::size_t> candidates, rest;
    for (std::size_t i : in_union) (in_top[i] == 3 ? candidates : rest).push_back(i);
    std::sort(candidates.begin(), candidates.end(), by_sum);
    std::sort(rest.begin(), rest.end(), by_sum);

    std::vector<RankedIndex> out;
    for (std::size_t i : candidates) {
        if (out.size() == static_cast<std::size_t>(n)) break;
        out.push_back({i, rank_sum[i], false});
    }
    for (std::size_t i : rest) {
        if (out.size() == static_cast<std::size_t>(n)) break;
        out.push_back({i, rank_sum[i], true});
    }
    return out;
}

std::vector<RankedBlock> sort_blocks(const std::vector<segment::Block>& blocks, int n) {
    std::vector<const segment::Block*> unique;
    for (const auto& b : blocks) {
        bool dup = std::any_of(unique.begin(), unique.end(), [&](const segment::Block* u) {
            return u->parent_selector == b.parent_selector && u->sub_block_selectors == b.sub_block_selectors;
        });
        if (!dup) unique.push_back(&b);
    }
    std::vector<segment::BlockMetrics> metrics;
    for (const auto* b : unique) metrics.push_back(b->metrics);
    std::vector<RankedBlock> out;
    for (const auto& r : rank_metrics(metrics, n)) {
        out.push_back({*unique[r.index], static_cast<int>(out.size()) + 1, r.fallback});
    }
    return out;
}

Json to_json(const RankedBlock& b) {
    Json j;
    j["rank"] = b.rank;
    j["fallback"] = b.fallback;
    Json block = segment::to_json(b.block);
    for (auto& [k, v] : block.items()) j[k] = v;
    return j;
}

Json report_json(const std::vector<RankedBlock>& blocks) {
    Json arr = Json::array();
    for (const auto& b : blocks) arr.push_back(to_json(b));
    return arr;
}

}  // namespace webwrap::sorter
