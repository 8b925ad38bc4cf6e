#include "webwrap/selector.hpp"

#include <algorithm>
#include <cctype>

#include "webwrap/error.hpp"

namespace webwrap {

using dom::Document;
using dom::NodeId;

namespace {

constexpr std::string_view kNth = ":nth-child(";

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

SelectorStep parse_step(std::string_view tok, std::string_view whole) {
    SelectorStep step;
    auto pos = tok.find(kNth);
    std::string_view tag = tok.substr(0, pos);
    if (pos != std::string_view::npos) {
        std::string_view rest = tok.substr(pos + kNth.size());
        if (rest.size() < 2 || rest.back() != ')') throw SelectorSyntaxError("malformed :nth-child in '" + std::string(whole) + "'");
        rest.remove_suffix(1);
        if (rest.empty() || !std::all_of(rest.begin(), rest.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) {
            throw SelectorSyntaxError("non-numeric :nth-child in '" + std::string(whole) + "'");
        }
        step.index = std::stoi(std::string(rest));
        if (step.index < 1) throw SelectorSyntaxError(":nth-child index must be >= 1 in '" + std::string(whole) + "'");
        step.explicit_index = true;
    }
    if (tag.empty()) throw SelectorSyntaxError("missing tag in '" + std::string(whole) + "'");
    for (char c : tag) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            throw SelectorSyntaxError("unsupported selector syntax in '" + std::string(whole) + "'");
        }
        step.tag += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    return step;
}

}  // namespace

SelectorPath::SelectorPath(std::vector<std::vector<SelectorStep>> frames) : frames_(std::move(frames)) {
    if (frames_.empty()) frames_.emplace_back();
}

std::size_t SelectorPath::step_count() const {
    std::size_t n = 0;
    for (const auto& f : frames_) n += f.size();
    return n;
}

SelectorPath SelectorPath::parse(std::string_view text) {
    std::string_view s = trim(text);
    SelectorPath path;
    if (s.empty()) return path;
    std::vector<std::string_view> tokens;
    std::size_t start = 0;
    while (true) {
        auto gt = s.find('>', start);
        tokens.push_back(trim(s.substr(start, gt == std::string_view::npos ? std::string_view::npos : gt - start)));
        if (gt == std::string_view::npos) break;
        start = gt + 1;
    }
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        std::string_view tok = tokens[i];
        if (tok == "f") {
            path.frames_.emplace_back();
        } else if (tok.empty()) {
            // Only a leading ">f>..." or a trailing "...>f>" may leave an empty token.
            bool leading = i == 0 && tokens.size() > 1 && tokens[1] == "f";
            bool trailing = i + 1 == tokens.size() && i > 0 && tokens[i - 1] == "f";
            if (!leading && !trailing) throw SelectorSyntaxError("empty step in '" + std::string(text) + "'");
        } else {
            path.frames_.back().push_back(parse_step(tok, text));
        }
    }
    return path;
}

std::string SelectorPath::str() const {
    std::string out;
    for (std::size_t f = 0; f < frames_.size(); ++f) {
        if (f > 0) out += ">f>";
        for (std::size_t i = 0; i < frames_[f].size(); ++i) {
            const auto& step = frames_[f][i];
            if (i > 0) out += '>';
            out += step.tag;
            if (step.explicit_index) out += ":nth-child(" + std::to_string(step.index) + ")";
        }
    }
    return out;
}

SelectorPath SelectorPath::operator/(const SelectorPath& other) const {
    SelectorPath out = *this;
    auto& last = out.frames_.back();
    last.insert(last.end(), other.frames_.front().begin(), other.frames_.front().end());
    out.frames_.insert(out.frames_.end(), other.frames_.begin() + 1, other.frames_.end());
    return out;
}

SelectorPath selector_of(const Document& doc, NodeId node, NodeId from) {
    if (!doc.contains(node) || !doc.contains(from)) throw NotInDocumentError("node id outside the document");
    if (node != from && !doc[node].is_element() && !doc[node].is_root()) {
        throw NotInDocumentError("selectors address elements only");
    }
    std::vector<std::vector<SelectorStep>> frames(1);
    NodeId cur = node;
    while (cur != from) {
        const auto& n = doc[cur];
        NodeId parent = n.parent;
        if (parent == dom::kNoNode) throw NotInDocumentError("node is not under the starting node");
        if (n.is_root()) {
            // crossing an iframe boundary upward
            frames.emplace_back();
        } else {
            auto siblings = doc.element_children(parent);
            auto it = std::find(siblings.begin(), siblings.end(), cur);
            int index = static_cast<int>(it - siblings.begin()) + 1;
            auto same_tag = std::count_if(siblings.begin(), siblings.end(), [&](NodeId s) { return doc[s].tag == n.tag; });
            frames.back().push_back({n.tag, index, index > 1 || same_tag > 1});
        }
        cur = parent;
    }
    std::reverse(frames.begin(), frames.end());
    for (auto& f : frames) std::reverse(f.begin(), f.end());
    return SelectorPath(std::move(frames));
}

namespace {

struct Resolved {
    NodeId node = dom::kNoNode;
    std::size_t failed_step = 0;
    bool frame_failure = false;
};

Resolved walk_path(const Document& doc, const SelectorPath& path, NodeId from) {
    Resolved r;
    NodeId cur = from;
    std::size_t step_no = 0;
    const auto& frames = path.frames();
    for (std::size_t f = 0; f < frames.size(); ++f) {
        if (f > 0) {
            const auto& n = doc[cur];
            if (!n.is_element() || n.tag != "iframe" || n.children.empty() || !doc[n.children.front()].is_root()) {
                r.frame_failure = true;
                r.failed_step = step_no;
                return r;
            }
            cur = n.children.front();
        }
        for (const auto& step : frames[f]) {
            auto kids = doc.element_children(cur);
            NodeId next = dom::kNoNode;
            if (step.explicit_index) {
                if (static_cast<std::size_t>(step.index) <= kids.size() && doc[kids[step.index - 1]].tag == step.tag) {
                    next = kids[step.index - 1];
                }
            } else {
                auto it = std::find_if(kids.begin(), kids.end(), [&](NodeId k) { return doc[k].tag == step.tag; });
                if (it != kids.end()) next = *it;
            }
            if (next == dom::kNoNode) {
                r.failed_step = step_no;
                return r;
            }
            cur = next;
            ++step_no;
        }
    }
    r.node = cur;
    return r;
}

}  // namespace

NodeId resolve_selector(const Document& doc, const SelectorPath& path, NodeId from) {
    if (!doc.contains(from)) throw NotInDocumentError("starting node outside the document");
    Resolved r = walk_path(doc, path, from);
    if (r.frame_failure) {
        throw FrameError("'>f>' before step " + std::to_string(r.failed_step) + " of '" + path.str() +
                         "' does not follow a loaded iframe");
    }
    if (r.node == dom::kNoNode) {
        throw ResolutionError("no node at step " + std::to_string(r.failed_step) + " of '" + path.str() + "'", r.failed_step);
    }
    return r.node;
}

std::optional<NodeId> try_resolve(const Document& doc, const SelectorPath& path, NodeId from) {
    if (!doc.contains(from)) return std::nullopt;
    Resolved r = walk_path(doc, path, from);
    if (r.node == dom::kNoNode) return std::nullopt;
    return r.node;
}

}  // namespace webwrap
