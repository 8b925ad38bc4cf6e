#pragma once

#include <optional>
#include <string>
#include <vector>

#include "webwrap/dom.hpp"
#include "webwrap/json.hpp"
#include "webwrap/selector.hpp"

namespace webwrap::segment {

// One string per child element: the child's subtree as a bracketed preorder
// tag sequence, e.g. "a(img,span)". <th> is read as <td>; iframes are leaves.
using Signature = std::vector<std::string>;

struct SegmentOptions {
    // Only the child tag names, without their subtrees.
    bool shallow_signature = false;
};

Signature signature(const dom::Document& doc, dom::NodeId element, const SegmentOptions& options = {});

// Same (normalized) tag and item-by-item equal signatures.
bool similar(const dom::Document& doc, dom::NodeId a, dom::NodeId b, const SegmentOptions& options = {});

struct BlockMetrics {
    int sub_block_count = 0;
    int word_count = 0;
    int size_proxy = 0;  // descendant elements under all sub-blocks
    bool operator==(const BlockMetrics&) const = default;
};

struct Block {
    SelectorPath parent_selector;
    std::vector<SelectorPath> sub_block_selectors;
    std::string sub_block_tag;
    Signature signature;
    BlockMetrics metrics;
    std::string preview;  // start of the first data sub-block's text

    bool operator==(const Block&) const = default;
};

// Breadth-first walk marking elements similar to an adjacent element sibling,
// then merging same-parent runs of marked siblings. Blocks come back in
// document order; blocks without any data carrier are dropped.
std::vector<Block> segment(const dom::Document& doc, const SegmentOptions& options = {});

BlockMetrics measure(const dom::Document& doc, const std::vector<dom::NodeId>& sub_blocks);

// A sub-block whose element children are all <th> cells.
bool is_header_row(const dom::Document& doc, dom::NodeId sub_block);

// Current sub-blocks of a block on a (possibly different) page: children of
// the parent with the recorded tag and signature, header rows excluded.
// Throws ResolutionError when the parent no longer resolves.
std::vector<dom::NodeId> locate_sub_blocks(const dom::Document& doc, const Block& block,
                                           const SegmentOptions& options = {});

enum class CarrierKind { Text, Image, Link };

std::string_view to_string(CarrierKind kind);

struct Carrier {
    CarrierKind kind = CarrierKind::Text;
    SelectorPath path;  // relative to the sub-block (or link) root
    int rank = 0;       // texts only, 1-based
    std::string value;  // text, absolute image url, or absolute href
    bool background = false;  // image read from an inline style
    std::vector<Carrier> nested;  // contents of a link

    bool operator==(const Carrier&) const = default;
};

// Leaf data carriers of one subtree: texts by (element preorder, rank), then
// images in preorder, then links in preorder with their own texts and images
// nested. Script and style content is skipped; inner documents are not entered.
std::vector<Carrier> carriers(const dom::Document& doc, dom::NodeId root);

// Background image url from an inline style, or "".
std::string background_image(std::string_view style);

// Per data sub-block carrier lists, aligned by position. Throws
// AlignmentError naming the first sub-block whose layout diverges.
std::vector<std::vector<Carrier>> block_fields(const dom::Document& doc, const Block& block);

Json to_json(const Block& block);
Block block_from_json(const Json& j);

}  // namespace webwrap::segment
