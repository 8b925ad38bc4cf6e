#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace webwrap::dom {

enum class NodeKind { Element, Text, DocumentRoot };

using NodeId = std::uint32_t;
inline constexpr NodeId kNoNode = std::numeric_limits<NodeId>::max();

struct Attribute {
    std::string name;
    std::string value;
    bool operator==(const Attribute&) const = default;
};

struct Node {
    NodeKind kind = NodeKind::Element;
    std::string tag;                     // lowercase, elements only
    std::vector<Attribute> attributes;   // document order, unique names
    std::string text;                    // decoded character data, text nodes only
    std::string url;                     // base url, document roots only
    std::vector<NodeId> children;
    NodeId parent = kNoNode;
    int frame_depth = 0;                 // enclosing iframe boundaries

    bool is_element() const { return kind == NodeKind::Element; }
    bool is_text() const { return kind == NodeKind::Text; }
    bool is_root() const { return kind == NodeKind::DocumentRoot; }
    const std::string* attr(std::string_view name) const;
};

// A parsed page. Inner documents of loaded iframes live in the same arena as
// a DocumentRoot child of their <iframe> element. Immutable once built.
class Document {
public:
    NodeId root() const { return 0; }
    const Node& node(NodeId id) const { return nodes_.at(id); }
    const Node& operator[](NodeId id) const { return nodes_[id]; }
    std::size_t size() const { return nodes_.size(); }
    bool contains(NodeId id) const { return id < nodes_.size(); }

    std::vector<NodeId> element_children(NodeId id) const;
    // Nearest DocumentRoot at or above `id`.
    NodeId owner_root(NodeId id) const;
    const std::string& base_url(NodeId id) const { return nodes_[owner_root(id)].url; }
    // True if `id` is `ancestor` or lies in its subtree (crossing frames).
    bool is_within(NodeId id, NodeId ancestor) const;

    // Preorder walk including inner iframe documents. Returning false from the
    // visitor skips the node's subtree.
    void walk(NodeId from, const std::function<bool(NodeId)>& visit) const;
    std::vector<NodeId> preorder(NodeId from) const;

private:
    friend class Builder;
    std::vector<Node> nodes_;
};

using DocumentPtr = std::shared_ptr<const Document>;

enum class Encoding { Utf8, Latin1, Ascii };

// Maps a charset label ("utf-8", "iso-8859-1", ...). Throws DecodeError for
// labels it does not support.
Encoding encoding_from_label(std::string_view label);

struct LoadedFrame {
    std::string html;
    std::string url;
    std::string encoding = "utf-8";
};

// Supplies iframe sources: (parent document url, raw src attribute).
using FrameLoader = std::function<std::optional<LoadedFrame>(const std::string& parent_url, const std::string& src)>;

struct ParseOptions {
    std::string url;
    Encoding encoding = Encoding::Utf8;
    FrameLoader frame_loader;
    int max_frame_depth = 4;
};

DocumentPtr parse_document(std::string_view bytes, const ParseOptions& options = {});

struct SerializeOptions {
    // Lets callers rewrite an element's attribute list on output.
    std::function<void(NodeId, std::vector<Attribute>&)> attributes;
    // Raw HTML emitted immediately after the node.
    std::function<std::string(NodeId)> after;
    // Loaded iframes are written with their inner document in `srcdoc`.
    bool inline_frames = false;
};

std::string serialize(const Document& doc, NodeId from, const SerializeOptions& options = {});
inline std::string serialize(const Document& doc) { return serialize(doc, doc.root()); }

bool structurally_equal(const Document& a, NodeId an, const Document& b, NodeId bn);

struct RankedText {
    std::string content;
    int rank = 0;
    bool operator==(const RankedText&) const = default;
};

// Direct, non-whitespace text children of an element with 1-based ranks.
// Content is whitespace-collapsed and trimmed.
std::vector<RankedText> text_segments(const Document& doc, NodeId element);

// All descendant text (within the node's own document), collapsed.
std::string inner_text(const Document& doc, NodeId id);

std::string collapse_whitespace(std::string_view s);
bool is_blank(std::string_view s);

bool is_void_element(std::string_view tag);
std::string escape_text(std::string_view s);
std::string escape_attribute(std::string_view s);

}  // namespace webwrap::dom
