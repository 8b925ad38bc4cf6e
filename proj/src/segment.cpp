#include "webwrap/segment.hpp"

#include <algorithm>
#include <deque>
#include <map>
#include <regex>
#include <unordered_map>

#include "webwrap/error.hpp"
#include "webwrap/url.hpp"

namespace webwrap::segment {

using dom::Document;
using dom::NodeId;

namespace {

std::string norm_tag(const std::string& tag) { return tag == "th" ? "td" : tag; }

bool skipped_content(const dom::Node& n) {
    return n.is_element() && (n.tag == "script" || n.tag == "style" || n.tag == "noscript" || n.tag == "template");
}

class SignatureCache {
public:
    SignatureCache(const Document& doc, const SegmentOptions& opt) : doc_(doc), opt_(opt) {}

    const std::string& subtree(NodeId id) {
        if (auto it = memo_.find(id); it != memo_.end()) return it->second;
        const auto& n = doc_[id];
        std::string s = norm_tag(n.tag);
        if (n.tag != "iframe") {
            std::string inner;
            for (NodeId c : n.children) {
                if (!doc_[c].is_element()) continue;
                if (!inner.empty()) inner += ',';
                inner += subtree(c);
            }
            if (!inner.empty()) s += "(" + inner + ")";
        }
        return memo_.emplace(id, std::move(s)).first->second;
    }

    Signature of(NodeId id) {
        Signature sig;
        for (NodeId c : doc_[id].children) {
            if (!doc_[c].is_element()) continue;
            sig.push_back(opt_.shallow_signature ? norm_tag(doc_[c].tag) : subtree(c));
        }
        return sig;
    }

    bool similar(NodeId a, NodeId b) {
        const auto& x = doc_[a];
        const auto& y = doc_[b];
        if (!x.is_element() || !y.is_element()) return false;
        if (x.tag == "iframe" || y.tag == "iframe") return false;  // frames are entered, never grouped
        if (norm_tag(x.tag) != norm_tag(y.tag)) return false;
        return of(a) == of(b);
    }

private:
    const Document& doc_;
    SegmentOptions opt_;
    std::unordered_map<NodeId, std::string> memo_;
};

template <typename F>
void walk_local(const Document& doc, NodeId from, F&& f) {
    doc.walk(from, [&](NodeId c) {
        if (c != from && doc[c].is_root()) return false;
        if (skipped_content(doc[c])) return false;
        return f(c);
    });
}

std::string image_url(const Document& doc, NodeId id, const std::string& raw) {
    return url::resolve(doc.base_url(id), dom::collapse_whitespace(raw));
}

// Images carried by a single element: its src, then an inline background.
void element_images(const Document& doc, NodeId id, NodeId rel_root, std::vector<Carrier>& out) {
    const auto& n = doc[id];
    if (n.tag == "img") {
        if (const auto* src = n.attr("src"); src && !dom::is_blank(*src)) {
            out.push_back({CarrierKind::Image, selector_of(doc, id, rel_root), 0, image_url(doc, id, *src), false, {}});
        }
    }
    if (const auto* style = n.attr("style")) {
        auto bg = background_image(*style);
        if (!bg.empty()) out.push_back({CarrierKind::Image, selector_of(doc, id, rel_root), 0, image_url(doc, id, bg), true, {}});
    }
}

bool is_link(const dom::Node& n) { return n.is_element() && n.tag == "a" && n.attr("href"); }

void collect(const Document& doc, NodeId root, bool inside_link, std::vector<Carrier>& out) {
    std::vector<Carrier> texts, images, links;
    walk_local(doc, root, [&](NodeId id) {
        const auto& n = doc[id];
        if (!n.is_element()) return true;
        if (!inside_link && is_link(n)) {
            Carrier link{CarrierKind::Link, selector_of(doc, id, root), 0,
                         url::resolve(doc.base_url(id), dom::collapse_whitespace(*n.attr("href"))), false, {}};
            collect(doc, id, true, link.nested);
            links.push_back(std::move(link));
            return false;
        }
        for (auto& t : dom::text_segments(doc, id)) {
            texts.push_back({CarrierKind::Text, selector_of(doc, id, root), t.rank, std::move(t.content), false, {}});
        }
        element_images(doc, id, root, images);
        return true;
    });
    for (auto* group : {&texts, &images, &links}) {
        for (auto& c : *group) out.push_back(std::move(c));
    }
}

std::string layout(const std::vector<Carrier>& cs) {
    std::string s;
    for (const auto& c : cs) {
        s += c.kind == CarrierKind::Text ? 'T' : c.kind == CarrierKind::Image ? 'I' : 'L';
        if (c.kind == CarrierKind::Link) s += "(" + layout(c.nested) + ")";
    }
    return s;
}

std::string utf8_prefix(const std::string& s, std::size_t max) {
    if (s.size() <= max) return s;
    std::size_t cut = max;
    while (cut > 0 && (static_cast<unsigned char>(s[cut]) & 0xC0) == 0x80) --cut;
    return s.substr(0, cut) + "...";
}

}  // namespace

std::string_view to_string(CarrierKind kind) {
    switch (kind) {
    case CarrierKind::Text: return "text";
    case CarrierKind::Image: return "image";
    case CarrierKind::Link: return "link";
    }
    return "text";
}

Signature signature(const Document& doc, NodeId element, const SegmentOptions& options) {
    SignatureCache cache(doc, options);
    return cache.of(element);
}

bool similar(const Document& doc, NodeId a, NodeId b, const SegmentOptions& options) {
    SignatureCache cache(doc, options);
    return cache.similar(a, b);
}

std::string background_image(std::string_view style) {
    static const std::regex re(R"(background(?:-image)?\s*:[^;]*?url\(\s*(['"]?)(.*?)\1\s*\))", std::regex::icase);
    std::string s(style);
    std::smatch m;
    if (std::regex_search(s, m, re)) return m[2].str();
    return {};
}

std::vector<Carrier> carriers(const Document& doc, NodeId root) {
    std::vector<Carrier> out;
    collect(doc, root, false, out);
    return out;
}

bool is_header_row(const Document& doc, NodeId sub_block) {
    auto kids = doc.element_children(sub_block);
    if (kids.empty()) return false;
    return std::all_of(kids.begin(), kids.end(), [&](NodeId k) { return doc[k].tag == "th"; });
}

BlockMetrics measure(const Document& doc, const std::vector<NodeId>& sub_blocks) {
    BlockMetrics m;
    m.sub_block_count = static_cast<int>(sub_blocks.size());
    for (NodeId sb : sub_blocks) {
        walk_local(doc, sb, [&](NodeId id) {
            const auto& n = doc[id];
            if (n.is_element() && id != sb) ++m.size_proxy;
            if (n.is_text()) {
                bool in_word = false;
                for (char c : dom::collapse_whitespace(n.text)) {
                    if (c == ' ') {
                        in_word = false;
                    } else if (!in_word) {
                        in_word = true;
                        ++m.word_count;
                    }
                }
            }
            return true;
        });
    }
    return m;
}

std::vector<Block> segment(const Document& doc, const SegmentOptions& options) {
    SignatureCache cache(doc, options);
    std::vector<bool> marked(doc.size(), false);
    std::deque<NodeId> queue{doc.root()};

    while (!queue.empty()) {
        NodeId id = queue.front();
        queue.pop_front();
        const auto& n = doc[id];
        if (n.is_root()) {
            for (NodeId c : doc.element_children(id)) queue.push_back(c);
            continue;
        }
        if (skipped_content(n)) continue;
        if (n.parent != dom::kNoNode) {
            auto siblings = doc.element_children(n.parent);
            auto it = std::find(siblings.begin(), siblings.end(), id);
            bool left = it != siblings.begin() && cache.similar(*(it - 1), id);
            bool right = it + 1 != siblings.end() && cache.similar(id, *(it + 1));
            if (left || right) {
                marked[id] = true;
                continue;
            }
        }
        if (n.tag == "iframe") {
            for (NodeId c : n.children) {
                if (doc[c].is_root()) queue.push_back(c);  // switch into the frame
            }
            continue;
        }
        for (NodeId c : doc.element_children(id)) queue.push_back(c);
    }

    // Merge same-parent runs of marked, mutually similar siblings.
    std::vector<std::vector<NodeId>> runs;
    std::vector<NodeId> seen_parents;
    for (NodeId id = 0; id < doc.size(); ++id) {
        if (!marked[id]) continue;
        NodeId p = doc[id].parent;
        if (std::find(seen_parents.begin(), seen_parents.end(), p) != seen_parents.end()) continue;
        seen_parents.push_back(p);
        std::vector<NodeId> run;
        for (NodeId c : doc.element_children(p)) {
            if (marked[c] && !run.empty() && cache.similar(run.back(), c)) {
                run.push_back(c);
                continue;
            }
            if (run.size() >= 2) runs.push_back(run);
            run.clear();
            if (marked[c]) run.push_back(c);
        }
        if (run.size() >= 2) runs.push_back(run);
    }

    std::vector<std::size_t> order(doc.size(), 0);
    {
        std::size_t i = 0;
        for (NodeId id : doc.preorder(doc.root())) order[id] = i++;
    }
    std::sort(runs.begin(), runs.end(), [&](const auto& a, const auto& b) { return order[a.front()] < order[b.front()]; });

    std::vector<Block> blocks;
    for (const auto& run : runs) {
        NodeId parent = doc[run.front()].parent;
        if (doc[parent].is_root() && parent != doc.root()) continue;  // top level of a frame has no addressable parent
        bool has_data = false;
        std::string preview;
        for (NodeId sb : run) {
            if (carriers(doc, sb).empty()) continue;
            has_data = true;
            if (preview.empty() && !is_header_row(doc, sb)) preview = utf8_prefix(dom::inner_text(doc, sb), 80);
        }
        if (!has_data) continue;
        Block b;
        b.parent_selector = parent == doc.root() ? SelectorPath() : selector_of(doc, parent);
        for (NodeId sb : run) b.sub_block_selectors.push_back(selector_of(doc, sb));
        b.sub_block_tag = norm_tag(doc[run.front()].tag);
        b.signature = cache.of(run.front());
        b.metrics = measure(doc, run);
        b.preview = std::move(preview);
        blocks.push_back(std::move(b));
    }
    return blocks;
}

std::vector<NodeId> locate_sub_blocks(const Document& doc, const Block& block, const SegmentOptions& options) {
    SignatureCache cache(doc, options);
    NodeId parent = resolve_selector(doc, block.parent_selector);
    std::vector<NodeId> out;
    for (NodeId c : doc.element_children(parent)) {
        if (norm_tag(doc[c].tag) != block.sub_block_tag) continue;
        if (cache.of(c) != block.signature) continue;
        if (is_header_row(doc, c)) continue;
        out.push_back(c);
    }
    return out;
}

std::vector<std::vector<Carrier>> block_fields(const Document& doc, const Block& block) {
    std::vector<std::vector<Carrier>> out;
    std::string expected;
    for (const auto& sel : block.sub_block_selectors) {
        NodeId sb = resolve_selector(doc, sel);
        if (is_header_row(doc, sb)) continue;
        auto cs = carriers(doc, sb);
        std::string l = layout(cs);
        if (out.empty()) {
            expected = l;
        } else if (l != expected) {
            throw AlignmentError("sub-block " + sel.str() + " has a different carrier layout",
                                 {sel.str(), "expected " + expected, "found " + l});
        }
        out.push_back(std::move(cs));
    }
    return out;
}

Json to_json(const Block& b) {
    Json j;
    j["parent_selector"] = b.parent_selector.str();
    j["sub_block_tag"] = b.sub_block_tag;
    j["signature"] = b.signature;
    j["sub_block_selectors"] = Json::array();
    for (const auto& s : b.sub_block_selectors) j["sub_block_selectors"].push_back(s.str());
    j["metrics"] = {{"sub_block_count", b.metrics.sub_block_count},
                    {"word_count", b.metrics.word_count},
                    {"size_proxy", b.metrics.size_proxy}};
    j["preview"] = b.preview;
    return j;
}

Block block_from_json(const Json& j) {
    if (!j.is_object()) throw ValidationError("block must be an object");
    try {
        Block b;
        b.parent_selector = SelectorPath::parse(j.at("parent_selector").get<std::string>());
        b.sub_block_tag = j.at("sub_block_tag").get<std::string>();
        b.signature = j.at("signature").get<Signature>();
        for (const auto& s : j.value("sub_block_selectors", Json::array())) {
            b.sub_block_selectors.push_back(SelectorPath::parse(s.get<std::string>()));
        }
        if (auto it = j.find("metrics"); it != j.end()) {
            b.metrics.sub_block_count = it->value("sub_block_count", 0);
            b.metrics.word_count = it->value("word_count", 0);
            b.metrics.size_proxy = it->value("size_proxy", 0);
        }
        b.preview = j.value("preview", "");
        return b;
    } catch (const Json::exception& e) {
        throw ValidationError(std::string("malformed block: ") + e.what());
    } catch (const SelectorSyntaxError& e) {
        throw ValidationError(std::string("malformed block selector: ") + e.what());
    }
}

}  // namespace webwrap::segment
