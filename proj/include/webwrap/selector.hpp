#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "webwrap/dom.hpp"

namespace webwrap {

// One positional step: a tag plus its 1-based index among the parent's
// element children. `explicit_index` records whether `:nth-child(k)` is
// written out; an implicit step matches the first child with that tag.
struct SelectorStep {
    std::string tag;
    int index = 1;
    bool explicit_index = false;
    bool operator==(const SelectorStep&) const = default;
};

// A chain of steps split into frames; consecutive frames are joined by the
// iframe mark ">f>". An empty path addresses the starting node itself.
class SelectorPath {
public:
    SelectorPath() : frames_(1) {}
    explicit SelectorPath(std::vector<std::vector<SelectorStep>> frames);

    static SelectorPath parse(std::string_view text);
    std::string str() const;

    const std::vector<std::vector<SelectorStep>>& frames() const { return frames_; }
    std::size_t frame_marks() const { return frames_.size() - 1; }
    std::size_t step_count() const;
    bool empty() const { return frames_.size() == 1 && frames_.front().empty(); }

    // Concatenation: `other` continues from the node this path addresses.
    SelectorPath operator/(const SelectorPath& other) const;

    bool operator==(const SelectorPath&) const = default;

private:
    std::vector<std::vector<SelectorStep>> frames_;
};

// Path from `from` (default: the document root) down to `node`. Throws
// NotInDocumentError if `node` is not an element under `from`.
SelectorPath selector_of(const dom::Document& doc, dom::NodeId node, dom::NodeId from = 0);

// Throws ResolutionError (with the failing step index) or FrameError.
dom::NodeId resolve_selector(const dom::Document& doc, const SelectorPath& path, dom::NodeId from = 0);
std::optional<dom::NodeId> try_resolve(const dom::Document& doc, const SelectorPath& path, dom::NodeId from = 0);

}  // namespace webwrap
