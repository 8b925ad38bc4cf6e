#include "webwrap/dom.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <unordered_map>

#include "webwrap/error.hpp"
#include "webwrap/url.hpp"

namespace webwrap::dom {

namespace {

bool ascii_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f'; }

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
    return out;
}

bool iequals_prefix(std::string_view hay, std::size_t pos, std::string_view needle) {
    if (pos + needle.size() > hay.size()) return false;
    for (std::size_t i = 0; i < needle.size(); ++i) {
        if (std::tolower(static_cast<unsigned char>(hay[pos + i])) != needle[i]) return false;
    }
    return true;
}

void append_utf8(std::string& out, std::uint32_t cp) {
    if (cp == 0 || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) cp = 0xFFFD;
    if (cp < 0x80) {
        out += static_cast<char>(cp);
    } else if (cp < 0x800) {
        out += static_cast<char>(0xC0 | (cp >> 6));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    } else if (cp < 0x10000) {
        out += static_cast<char>(0xE0 | (cp >> 12));
        out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    } else {
        out += static_cast<char>(0xF0 | (cp >> 18));
        out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
        out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    }
}

std::string decode_bytes(std::string_view bytes, Encoding enc) {
    switch (enc) {
    case Encoding::Ascii:
        for (std::size_t i = 0; i < bytes.size(); ++i) {
            if (static_cast<unsigned char>(bytes[i]) >= 0x80) {
                throw DecodeError("byte outside ASCII at offset " + std::to_string(i));
            }
        }
        return std::string(bytes);
    case Encoding::Latin1: {
        std::string out;
        out.reserve(bytes.size());
        for (unsigned char c : bytes) append_utf8(out, c);
        return out;
    }
    case Encoding::Utf8:
        break;
    }
    if (bytes.size() >= 3 && bytes.substr(0, 3) == "\xEF\xBB\xBF") bytes.remove_prefix(3);
    std::size_t i = 0;
    while (i < bytes.size()) {
        unsigned char c = bytes[i];
        int extra = c < 0x80 ? 0 : (c >> 5) == 0x6 ? 1 : (c >> 4) == 0xE ? 2 : (c >> 3) == 0x1E ? 3 : -1;
        if (extra < 0 || (extra == 1 && c < 0xC2)) throw DecodeError("invalid UTF-8 lead byte at offset " + std::to_string(i));
        if (extra > 0 && i + extra >= bytes.size()) {
            throw DecodeError("truncated UTF-8 sequence at offset " + std::to_string(i));
        }
        for (int k = 1; k <= extra; ++k) {
            if ((static_cast<unsigned char>(bytes[i + k]) & 0xC0) != 0x80) {
                throw DecodeError("invalid UTF-8 continuation at offset " + std::to_string(i + k));
            }
        }
        i += extra + 1;
    }
    return std::string(bytes);
}

const std::unordered_map<std::string_view, std::uint32_t>& entity_table() {
    static const std::unordered_map<std::string_view, std::uint32_t> table = {
        {"amp", '&'},     {"lt", '<'},        {"gt", '>'},       {"quot", '"'},     {"apos", '\''},
        {"nbsp", 0xA0},   {"copy", 0xA9},     {"reg", 0xAE},     {"trade", 0x2122}, {"hellip", 0x2026},
        {"mdash", 0x2014}, {"ndash", 0x2013}, {"laquo", 0xAB},   {"raquo", 0xBB},   {"lsaquo", 0x2039},
        {"rsaquo", 0x203A}, {"middot", 0xB7}, {"bull", 0x2022},  {"deg", 0xB0},     {"times", 0xD7},
        {"divide", 0xF7}, {"lsquo", 0x2018},  {"rsquo", 0x2019}, {"ldquo", 0x201C}, {"rdquo", 0x201D},
        {"euro", 0x20AC}, {"pound", 0xA3},    {"yen", 0xA5},     {"cent", 0xA2},    {"sect", 0xA7},
        {"para", 0xB6},   {"plusmn", 0xB1},   {"frac12", 0xBD},  {"larr", 0x2190},  {"rarr", 0x2192},
        {"uarr", 0x2191}, {"darr", 0x2193},   {"hearts", 0x2665}, {"star", 0x2606}, {"iexcl", 0xA1},
        {"iquest", 0xBF}, {"eacute", 0xE9},   {"egrave", 0xE8},  {"aacute", 0xE1},  {"agrave", 0xE0},
        {"uuml", 0xFC},   {"ouml", 0xF6},     {"auml", 0xE4},    {"szlig", 0xDF},   {"ccedil", 0xE7},
        {"ensp", 0x2002}, {"emsp", 0x2003},   {"thinsp", 0x2009}, {"zwj", 0x200D},  {"zwnj", 0x200C},
    };
    return table;
}

std::string decode_entities(std::string_view s) {
    if (s.find('&') == std::string_view::npos) return std::string(s);
    std::string out;
    out.reserve(s.size());
    std::size_t i = 0;
    while (i < s.size()) {
        if (s[i] != '&') {
            out += s[i++];
            continue;
        }
        std::size_t j = i + 1;
        if (j < s.size() && s[j] == '#') {
            ++j;
            bool hex = j < s.size() && (s[j] == 'x' || s[j] == 'X');
            if (hex) ++j;
            std::size_t start = j;
            std::uint32_t cp = 0;
            while (j < s.size() && (hex ? std::isxdigit(static_cast<unsigned char>(s[j])) : std::isdigit(static_cast<unsigned char>(s[j])))) {
                char c = static_cast<char>(std::tolower(static_cast<unsigned char>(s[j])));
                cp = cp * (hex ? 16 : 10) + static_cast<std::uint32_t>(std::isdigit(static_cast<unsigned char>(c)) ? c - '0' : c - 'a' + 10);
                if (cp > 0x10FFFF) cp = 0x110000;
                ++j;
            }
            if (j == start) {
                out += s[i++];
                continue;
            }
            if (j < s.size() && s[j] == ';') ++j;
            append_utf8(out, cp);
            i = j;
            continue;
        }
        std::size_t start = j;
        while (j < s.size() && std::isalnum(static_cast<unsigned char>(s[j]))) ++j;
        std::string_view name = s.substr(start, j - start);
        auto it = entity_table().find(name);
        bool terminated = j < s.size() && s[j] == ';';
        bool legacy = name == "amp" || name == "lt" || name == "gt" || name == "quot" || name == "nbsp";
        if (it != entity_table().end() && (terminated || legacy)) {
            append_utf8(out, it->second);
            i = terminated ? j + 1 : j;
        } else {
            out += s[i++];
        }
    }
    return out;
}

constexpr std::array kVoid = {"area", "base", "br", "col", "embed", "hr", "img", "input",
                              "link", "meta", "param", "source", "track", "wbr", "keygen"};

bool is_raw_text(std::string_view tag) { return tag == "script" || tag == "style"; }
bool is_rcdata(std::string_view tag) { return tag == "textarea" || tag == "title"; }

bool one_of(std::string_view tag, std::initializer_list<std::string_view> set) {
    return std::find(set.begin(), set.end(), tag) != set.end();
}

}  // namespace

bool is_void_element(std::string_view tag) {
    return std::find(kVoid.begin(), kVoid.end(), tag) != kVoid.end();
}

const std::string* Node::attr(std::string_view name) const {
    for (const auto& a : attributes) {
        if (a.name == name) return &a.value;
    }
    return nullptr;
}

std::vector<NodeId> Document::element_children(NodeId id) const {
    std::vector<NodeId> out;
    for (NodeId c : nodes_[id].children) {
        if (nodes_[c].is_element()) out.push_back(c);
    }
    return out;
}

NodeId Document::owner_root(NodeId id) const {
    while (id != kNoNode && !nodes_[id].is_root()) id = nodes_[id].parent;
    return id == kNoNode ? root() : id;
}

bool Document::is_within(NodeId id, NodeId ancestor) const {
    for (NodeId cur = id; cur != kNoNode; cur = nodes_[cur].parent) {
        if (cur == ancestor) return true;
    }
    return false;
}

void Document::walk(NodeId from, const std::function<bool(NodeId)>& visit) const {
    std::vector<NodeId> stack{from};
    while (!stack.empty()) {
        NodeId cur = stack.back();
        stack.pop_back();
        if (!visit(cur)) continue;
        const auto& kids = nodes_[cur].children;
        for (auto it = kids.rbegin(); it != kids.rend(); ++it) stack.push_back(*it);
    }
}

std::vector<NodeId> Document::preorder(NodeId from) const {
    std::vector<NodeId> out;
    walk(from, [&](NodeId id) {
        out.push_back(id);
        return true;
    });
    return out;
}

Encoding encoding_from_label(std::string_view label) {
    std::string l = lower(label);
    if (l.empty() || l == "utf-8" || l == "utf8") return Encoding::Utf8;
    if (l == "iso-8859-1" || l == "latin1" || l == "latin-1" || l == "windows-1252" || l == "cp1252" || l == "l1") {
        return Encoding::Latin1;
    }
    if (l == "us-ascii" || l == "ascii") return Encoding::Ascii;
    throw DecodeError("unsupported encoding: " + std::string(label));
}

// Tokenizes HTML and builds the tree with a small set of implied-end-tag rules.
// No html/head/body synthesis and no foster parenting: the tree mirrors the
// source markup so positional selectors match what authors wrote.
class Builder {
public:
    explicit Builder(const ParseOptions& opts) : opts_(opts) {}

    DocumentPtr build(std::string_view bytes) {
        auto doc = std::make_shared<Document>();
        doc_ = doc.get();
        parse_into(kNoNode, bytes, opts_.url, opts_.encoding, 0);
        return doc;
    }

private:
    NodeId add(Node n, NodeId parent) {
        n.parent = parent;
        NodeId id = static_cast<NodeId>(doc_->nodes_.size());
        doc_->nodes_.push_back(std::move(n));
        if (parent != kNoNode) doc_->nodes_[parent].children.push_back(id);
        return id;
    }

    void add_text(std::string text, NodeId parent, int depth) {
        if (text.empty()) return;
        auto& kids = doc_->nodes_[parent].children;
        if (!kids.empty() && doc_->nodes_[kids.back()].is_text()) {
            doc_->nodes_[kids.back()].text += text;
            return;
        }
        Node n;
        n.kind = NodeKind::Text;
        n.text = std::move(text);
        n.frame_depth = depth;
        add(std::move(n), parent);
    }

    const std::string& tag_of(NodeId id) const { return doc_->nodes_[id].tag; }

    // Pops the stack to just below the nearest open element whose tag is in
    // `targets`, unless a tag in `boundary` is met first.
    void close_implied(std::vector<NodeId>& stack, std::initializer_list<std::string_view> targets,
                       std::initializer_list<std::string_view> boundary) {
        for (std::size_t i = stack.size(); i-- > 1;) {
            const auto& t = tag_of(stack[i]);
            if (one_of(t, targets)) {
                stack.resize(i);
                return;
            }
            if (one_of(t, boundary)) return;
        }
    }

    void apply_implied_ends(std::vector<NodeId>& stack, const std::string& tag) {
        if (tag == "li") {
            close_implied(stack, {"li"}, {"ul", "ol", "menu"});
        } else if (tag == "dt" || tag == "dd") {
            close_implied(stack, {"dt", "dd"}, {"dl"});
        } else if (tag == "td" || tag == "th") {
            close_implied(stack, {"td", "th"}, {"tr", "table"});
        } else if (tag == "tr") {
            close_implied(stack, {"tr"}, {"table", "tbody", "thead", "tfoot"});
        } else if (tag == "thead" || tag == "tbody" || tag == "tfoot") {
            close_implied(stack, {"thead", "tbody", "tfoot"}, {"table"});
        } else if (tag == "option") {
            close_implied(stack, {"option"}, {"select", "datalist", "optgroup"});
        } else if (tag == "optgroup") {
            close_implied(stack, {"optgroup"}, {"select"});
        } else if (tag == "p") {
            if (stack.size() > 1 && tag_of(stack.back()) == "p") stack.pop_back();
        }
    }

    void parse_into(NodeId iframe, std::string_view bytes, const std::string& url, Encoding enc, int depth) {
        std::string src = decode_bytes(bytes, enc);
        Node root;
        root.kind = NodeKind::DocumentRoot;
        root.url = url;
        root.frame_depth = depth;
        NodeId root_id = add(std::move(root), iframe);
        std::vector<NodeId> stack{root_id};
        std::vector<NodeId> iframes;

        std::size_t i = 0;
        std::string pending;
        auto flush = [&] {
            if (!pending.empty()) {
                add_text(decode_entities(pending), stack.back(), depth);
                pending.clear();
            }
        };

        while (i < src.size()) {
            char c = src[i];
            if (c != '<') {
                pending += c;
                ++i;
                continue;
            }
            if (src.compare(i, 4, "<!--") == 0) {
                flush();
                auto end = src.find("-->", i + 4);
                i = end == std::string::npos ? src.size() : end + 3;
                continue;
            }
            if (i + 1 < src.size() && (src[i + 1] == '!' || src[i + 1] == '?')) {
                flush();
                auto end = src.find('>', i + 2);
                i = end == std::string::npos ? src.size() : end + 1;
                continue;
            }
            if (i + 1 < src.size() && src[i + 1] == '/') {
                std::size_t j = i + 2;
                if (j >= src.size() || !std::isalpha(static_cast<unsigned char>(src[j]))) {
                    // "</>" or "</ " style garbage: skip to '>'
                    flush();
                    auto end = src.find('>', j);
                    i = end == std::string::npos ? src.size() : end + 1;
                    continue;
                }
                std::size_t k = j;
                while (k < src.size() && !ascii_space(src[k]) && src[k] != '>' && src[k] != '/') ++k;
                std::string name = lower(std::string_view(src).substr(j, k - j));
                auto end = src.find('>', k);
                flush();
                i = end == std::string::npos ? src.size() : end + 1;
                for (std::size_t s = stack.size(); s-- > 1;) {
                    if (tag_of(stack[s]) == name) {
                        stack.resize(s);
                        break;
                    }
                }
                continue;
            }
            if (i + 1 >= src.size() || !std::isalpha(static_cast<unsigned char>(src[i + 1]))) {
                pending += c;
                ++i;
                continue;
            }
            flush();
            // start tag
            std::size_t k = i + 1;
            while (k < src.size() && !ascii_space(src[k]) && src[k] != '>' && src[k] != '/') ++k;
            Node el;
            el.tag = lower(std::string_view(src).substr(i + 1, k - i - 1));
            el.frame_depth = depth;
            bool self_closing = false;
            while (k < src.size()) {
                while (k < src.size() && (ascii_space(src[k]) || src[k] == '/')) {
                    if (src[k] == '/' && k + 1 < src.size() && src[k + 1] == '>') self_closing = true;
                    ++k;
                }
                if (k >= src.size() || src[k] == '>') break;
                self_closing = false;
                std::size_t ns = k;
                while (k < src.size() && !ascii_space(src[k]) && src[k] != '>' && src[k] != '=' &&
                       !(src[k] == '/' && k + 1 < src.size() && src[k + 1] == '>')) {
                    ++k;
                }
                if (k == ns) {
                    ++k;  // lone '=' or similar
                    continue;
                }
                std::string name = lower(std::string_view(src).substr(ns, k - ns));
                std::string value;
                std::size_t p = k;
                while (p < src.size() && ascii_space(src[p])) ++p;
                if (p < src.size() && src[p] == '=') {
                    ++p;
                    while (p < src.size() && ascii_space(src[p])) ++p;
                    if (p < src.size() && (src[p] == '"' || src[p] == '\'')) {
                        char q = src[p];
                        auto close = src.find(q, p + 1);
                        if (close == std::string::npos) close = src.size();
                        value = decode_entities(std::string_view(src).substr(p + 1, close - p - 1));
                        k = close == src.size() ? close : close + 1;
                    } else {
                        std::size_t vs = p;
                        while (p < src.size() && !ascii_space(src[p]) && src[p] != '>') ++p;
                        value = decode_entities(std::string_view(src).substr(vs, p - vs));
                        k = p;
                    }
                }
                auto existing = std::find_if(el.attributes.begin(), el.attributes.end(),
                                             [&](const Attribute& a) { return a.name == name; });
                if (existing != el.attributes.end()) {
                    existing->value = std::move(value);
                } else {
                    el.attributes.push_back({std::move(name), std::move(value)});
                }
            }
            i = k < src.size() ? k + 1 : src.size();

            std::string tag = el.tag;
            apply_implied_ends(stack, tag);
            NodeId id = add(std::move(el), stack.back());
            if (tag == "iframe") iframes.push_back(id);
            if (tag == "base" && doc_->nodes_[root_id].url == url) {
                if (const auto* href = doc_->nodes_[id].attr("href"); href && !href->empty()) {
                    doc_->nodes_[root_id].url = url::resolve(url, *href);
                }
            }
            if (self_closing || is_void_element(tag)) continue;
            if (is_raw_text(tag) || is_rcdata(tag)) {
                std::size_t end = i;
                while (true) {
                    end = src.find("</", end);
                    if (end == std::string::npos || iequals_prefix(src, end + 2, tag)) break;
                    end += 2;
                }
                if (end == std::string::npos) end = src.size();
                std::string_view body = std::string_view(src).substr(i, end - i);
                add_text(is_rcdata(tag) ? decode_entities(body) : std::string(body), id, depth);
                auto gt = end == src.size() ? std::string::npos : src.find('>', end);
                i = gt == std::string::npos ? src.size() : gt + 1;
                continue;
            }
            stack.push_back(id);
        }
        flush();

        if (depth >= opts_.max_frame_depth) return;
        for (NodeId f : iframes) {
            if (const auto* srcdoc = doc_->nodes_[f].attr("srcdoc")) {
                std::string inline_doc = *srcdoc;
                parse_into(f, inline_doc, doc_->nodes_[root_id].url, Encoding::Utf8, depth + 1);
                continue;
            }
            if (!opts_.frame_loader) continue;
            const auto* src_attr = doc_->nodes_[f].attr("src");
            if (!src_attr || is_blank(*src_attr) || *src_attr == "about:blank") continue;
            std::optional<LoadedFrame> loaded;
            try {
                loaded = opts_.frame_loader(doc_->nodes_[root_id].url, *src_attr);
            } catch (const Error&) {
                loaded.reset();  // unreachable frames stay opaque
            }
            if (!loaded) continue;
            parse_into(f, loaded->html, loaded->url, encoding_from_label(loaded->encoding), depth + 1);
        }
    }

    const ParseOptions& opts_;
    Document* doc_ = nullptr;
};

DocumentPtr parse_document(std::string_view bytes, const ParseOptions& options) {
    return Builder(options).build(bytes);
}

std::string escape_text(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        switch (c) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        default: out += c;
        }
    }
    return out;
}

std::string escape_attribute(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        switch (c) {
        case '&': out += "&amp;"; break;
        case '"': out += "&quot;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        default: out += c;
        }
    }
    return out;
}

namespace {

void serialize_node(const Document& doc, NodeId id, const SerializeOptions& opts, std::string& out) {
    const Node& n = doc[id];
    if (n.is_text()) {
        NodeId p = n.parent;
        bool raw = p != kNoNode && doc[p].is_element() && is_raw_text(doc[p].tag);
        out += raw ? n.text : escape_text(n.text);
    } else if (n.is_root()) {
        for (NodeId c : n.children) serialize_node(doc, c, opts, out);
    } else {
        std::vector<Attribute> attrs = n.attributes;
        std::string inner_doc;
        bool framed = n.tag == "iframe" && !n.children.empty() && doc[n.children.front()].is_root();
        if (opts.inline_frames && framed) {
            inner_doc = serialize(doc, n.children.front(), opts);
            attrs.erase(std::remove_if(attrs.begin(), attrs.end(), [](const Attribute& a) { return a.name == "srcdoc"; }),
                        attrs.end());
            attrs.push_back({"srcdoc", inner_doc});
        }
        if (opts.attributes) opts.attributes(id, attrs);
        out += '<';
        out += n.tag;
        for (const auto& a : attrs) {
            out += ' ';
            out += a.name;
            out += "=\"";
            out += escape_attribute(a.value);
            out += '"';
        }
        out += '>';
        if (!is_void_element(n.tag)) {
            for (NodeId c : n.children) {
                if (doc[c].is_root()) continue;  // inner documents are not part of this markup
                serialize_node(doc, c, opts, out);
            }
            out += "</";
            out += n.tag;
            out += '>';
        }
    }
    if (opts.after) out += opts.after(id);
}

}  // namespace

std::string serialize(const Document& doc, NodeId from, const SerializeOptions& options) {
    std::string out;
    serialize_node(doc, from, options, out);
    return out;
}

bool structurally_equal(const Document& a, NodeId an, const Document& b, NodeId bn) {
    const Node& x = a[an];
    const Node& y = b[bn];
    if (x.kind != y.kind || x.tag != y.tag || x.text != y.text || x.attributes != y.attributes) return false;
    if (x.children.size() != y.children.size()) return false;
    for (std::size_t i = 0; i < x.children.size(); ++i) {
        if (!structurally_equal(a, x.children[i], b, y.children[i])) return false;
    }
    return true;
}

bool is_blank(std::string_view s) {
    return collapse_whitespace(s).empty();
}

std::string collapse_whitespace(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    bool pending_space = false;
    for (std::size_t i = 0; i < s.size(); ++i) {
        bool space = ascii_space(s[i]) || s[i] == '\v';
        std::size_t width = 1;
        if (!space && static_cast<unsigned char>(s[i]) == 0xC2 && i + 1 < s.size() &&
            static_cast<unsigned char>(s[i + 1]) == 0xA0) {
            space = true;  // no-break space
            width = 2;
        }
        if (space) {
            pending_space = true;
            i += width - 1;
            continue;
        }
        if (pending_space && !out.empty()) out += ' ';
        pending_space = false;
        out += s[i];
    }
    return out;
}

std::vector<RankedText> text_segments(const Document& doc, NodeId element) {
    std::vector<RankedText> out;
    for (NodeId c : doc[element].children) {
        if (!doc[c].is_text()) continue;
        std::string t = collapse_whitespace(doc[c].text);
        if (t.empty()) continue;
        out.push_back({std::move(t), static_cast<int>(out.size()) + 1});
    }
    return out;
}

std::string inner_text(const Document& doc, NodeId id) {
    std::string raw;
    doc.walk(id, [&](NodeId n) {
        const Node& node = doc[n];
        if (node.is_root() && n != id) return false;
        if (node.is_element() && (node.tag == "script" || node.tag == "style")) return false;
        if (node.is_text()) {
            raw += node.text;
            raw += ' ';
        }
        return true;
    });
    return collapse_whitespace(raw);
}

}  // namespace webwrap::dom
