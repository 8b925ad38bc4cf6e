#include "webwrap/rules.hpp"

#include <algorithm>
#include <set>

#include "webwrap/error.hpp"
#include "webwrap/url.hpp"

namespace webwrap::rules {

using dom::Document;
using dom::NodeId;
using segment::Carrier;
using segment::CarrierKind;

namespace {

// Child-index sequence; lexicographic order on it is preorder.
std::vector<int> position(const SelectorPath& p) {
    std::vector<int> out;
    for (const auto& frame : p.frames()) {
        for (const auto& step : frame) out.push_back(step.index);
    }
    return out;
}

struct TextKey {
    std::vector<int> pos;
    int rank;
    auto operator<=>(const TextKey&) const = default;
};

struct ImageKey {
    std::vector<int> pos;
    bool background;
    auto operator<=>(const ImageKey&) const = default;
};

struct Union {
    std::map<TextKey, SelectorPath> texts;
    std::map<ImageKey, SelectorPath> images;
    std::map<std::vector<int>, std::pair<SelectorPath, std::unique_ptr<Union>>> links;

    void add(const std::vector<Carrier>& cs) {
        for (const auto& c : cs) {
            switch (c.kind) {
            case CarrierKind::Text: texts.emplace(TextKey{position(c.path), c.rank}, c.path); break;
            case CarrierKind::Image: images.emplace(ImageKey{position(c.path), c.background}, c.path); break;
            case CarrierKind::Link: {
                auto& slot = links[position(c.path)];
                if (!slot.second) slot = {c.path, std::make_unique<Union>()};
                slot.second->add(c.nested);
                break;
            }
            }
        }
    }
};

void number(const Union& u, int& next, std::vector<TextRule>& texts, std::vector<ImageRule>& images,
            std::vector<LinkRule>* links) {
    for (const auto& [k, sel] : u.texts) texts.push_back({next++, k.rank, sel});
    for (const auto& [k, sel] : u.images) {
        images.push_back({next++, k.background ? ImageType::BackgroundImg : ImageType::Img, sel});
    }
    if (!links) return;
    for (const auto& [k, entry] : u.links) {
        LinkRule l;
        l.id = next++;
        l.selector = entry.first;
        number(*entry.second, next, l.texts, l.images, nullptr);
        links->push_back(std::move(l));
    }
}

std::optional<std::string> text_value(const Document& doc, NodeId base, const TextRule& r) {
    auto el = try_resolve(doc, r.selector, base);
    if (!el || !doc[*el].is_element()) return std::nullopt;
    for (auto& seg : dom::text_segments(doc, *el)) {
        if (seg.rank == r.rank) return std::move(seg.content);
    }
    return std::nullopt;
}

std::optional<std::string> image_value(const Document& doc, NodeId base, const ImageRule& r) {
    auto el = try_resolve(doc, r.selector, base);
    if (!el || !doc[*el].is_element()) return std::nullopt;
    const auto& n = doc[*el];
    std::string raw;
    if (r.type == ImageType::Img) {
        if (const auto* src = n.attr("src")) raw = *src;
    } else if (const auto* style = n.attr("style")) {
        raw = segment::background_image(*style);
    }
    if (dom::is_blank(raw)) return std::nullopt;
    return url::resolve(doc.base_url(*el), dom::collapse_whitespace(raw));
}

std::string_view image_type_name(ImageType t) { return t == ImageType::Img ? "img" : "background_img"; }

ImageType image_type_from(const std::string& s) {
    if (s == "img") return ImageType::Img;
    if (s == "background_img") return ImageType::BackgroundImg;
    throw ValidationError("unknown image rule type '" + s + "'");
}

Json text_json(const TextRule& r) { return {{"id", r.id}, {"rank", r.rank}, {"css_selector", r.selector.str()}}; }

Json image_json(const ImageRule& r) {
    return {{"id", r.id}, {"type", std::string(image_type_name(r.type))}, {"css_selector", r.selector.str()}};
}

SelectorPath selector_from(const Json& j) {
    try {
        return SelectorPath::parse(j.at("css_selector").get<std::string>());
    } catch (const SelectorSyntaxError& e) {
        throw ValidationError(std::string("bad rule selector: ") + e.what());
    }
}

TextRule text_from(const Json& j) { return {j.at("id").get<int>(), j.value("rank", 1), selector_from(j)}; }

ImageRule image_from(const Json& j) {
    return {j.at("id").get<int>(), image_type_from(j.value("type", "img")), selector_from(j)};
}

}  // namespace

std::vector<int> ExtractionRules::ids() const {
    std::vector<int> out;
    for (const auto& t : texts) out.push_back(t.id);
    for (const auto& i : images) out.push_back(i.id);
    for (const auto& l : links) {
        out.push_back(l.id);
        for (const auto& t : l.texts) out.push_back(t.id);
        for (const auto& i : l.images) out.push_back(i.id);
    }
    return out;
}

ExtractionRules generate_rules(const Document& doc, const std::vector<NodeId>& sub_blocks) {
    Union u;
    for (NodeId sb : sub_blocks) u.add(segment::carriers(doc, sb));
    ExtractionRules rules;
    int next = 0;
    number(u, next, rules.texts, rules.images, &rules.links);
    if (rules.empty()) throw EmptyRulesError("the block has no text, image or link to extract");
    return rules;
}

ExtractionRules generate_rules(const Document& doc, const segment::Block& block) {
    std::vector<NodeId> data;
    for (const auto& sel : block.sub_block_selectors) {
        NodeId sb = resolve_selector(doc, sel);
        if (!segment::is_header_row(doc, sb)) data.push_back(sb);
    }
    return generate_rules(doc, data);
}

std::vector<Record> extract(const Document& doc, const std::vector<NodeId>& sub_blocks, const ExtractionRules& rules) {
    std::vector<Record> out;
    for (NodeId sb : sub_blocks) {
        Record r;
        for (const auto& t : rules.texts) r[t.id] = text_value(doc, sb, t);
        for (const auto& i : rules.images) r[i.id] = image_value(doc, sb, i);
        for (const auto& l : rules.links) {
            auto el = try_resolve(doc, l.selector, sb);
            const std::string* href = el && doc[*el].is_element() ? doc[*el].attr("href") : nullptr;
            if (!href) {
                r[l.id] = std::nullopt;
                for (const auto& t : l.texts) r[t.id] = std::nullopt;
                for (const auto& i : l.images) r[i.id] = std::nullopt;
                continue;
            }
            r[l.id] = url::resolve(doc.base_url(*el), dom::collapse_whitespace(*href));
            for (const auto& t : l.texts) r[t.id] = text_value(doc, *el, t);
            for (const auto& i : l.images) r[i.id] = image_value(doc, *el, i);
        }
        out.push_back(std::move(r));
    }
    return out;
}

std::vector<Record> extract(const Document& doc, const std::vector<SelectorPath>& sub_blocks,
                            const ExtractionRules& rules) {
    std::vector<NodeId> ids;
    for (const auto& sel : sub_blocks) {
        auto id = try_resolve(doc, sel);
        if (!id) throw ExtractionError("sub-block selector does not resolve: " + sel.str(), {sel.str()});
        ids.push_back(*id);
    }
    return extract(doc, ids, rules);
}

std::string_view to_string(NameSource s) {
    switch (s) {
    case NameSource::TableHeader: return "table-header";
    case NameSource::Attribute: return "attribute";
    case NameSource::Placeholder: return "placeholder";
    case NameSource::Oracle: return "oracle";
    case NameSource::Generic: return "generic";
    }
    return "generic";
}

std::string sanitize_name(std::string_view raw) {
    std::string out;
    for (char c : dom::collapse_whitespace(raw)) {
        char x = (c == ' ' || c == '.' || c == '&' || c == '=' || c == '?' || c == '#' || c == '+') ? '_' : c;
        if (x == '_' && (out.empty() || out.back() == '_')) continue;
        out += x;
    }
    while (!out.empty() && out.back() == '_') out.pop_back();
    return out;
}

std::vector<FieldName> suggest_field_names(const Document& doc, const segment::Block& block,
                                           const ExtractionRules& rules, const NameOracle& oracle) {
    std::vector<NodeId> data;
    std::vector<std::string> header;
    for (const auto& sel : block.sub_block_selectors) {
        auto sb = try_resolve(doc, sel);
        if (!sb) continue;
        if (segment::is_header_row(doc, *sb)) {
            if (header.empty()) {
                for (NodeId th : doc.element_children(*sb)) header.push_back(dom::inner_text(doc, th));
            }
        } else {
            data.push_back(*sb);
        }
    }

    // First element (over data sub-blocks) a rule resolves to.
    auto locate = [&](const SelectorPath& link, const SelectorPath* nested) -> std::optional<NodeId> {
        for (NodeId sb : data) {
            auto el = try_resolve(doc, link, sb);
            if (!el) continue;
            if (nested) el = try_resolve(doc, *nested, *el);
            if (el && doc[*el].is_element()) return el;
        }
        return std::nullopt;
    };

    struct Pending {
        int id;
        std::optional<NodeId> element;
        const SelectorPath* column_path;  // path whose first step picks the table column
        int rank;                          // 0 for non-text rules
        std::string sample;
        CarrierKind kind;
        bool on_link = false;  // nested rule addressing the link element itself
    };
    std::vector<Pending> pending;
    Record sample = data.empty() ? Record{} : extract(doc, std::vector<NodeId>{data.front()}, rules).front();
    auto sample_of = [&](int id) { return sample.count(id) && sample[id] ? *sample[id] : std::string(); };
    // Elements holding several text ranks get one field per rank.
    auto rank_counts = [](const std::vector<TextRule>& texts) {
        std::map<std::string, int> c;
        for (const auto& t : texts) ++c[t.selector.str()];
        return c;
    };
    auto top_ranks = rank_counts(rules.texts);
    for (const auto& t : rules.texts) {
        pending.push_back({t.id, locate(t.selector, nullptr), &t.selector, top_ranks[t.selector.str()] > 1 ? t.rank : 0,
                           sample_of(t.id), CarrierKind::Text});
    }
    for (const auto& i : rules.images) {
        pending.push_back({i.id, locate(i.selector, nullptr), &i.selector, 0, sample_of(i.id), CarrierKind::Image});
    }
    for (const auto& l : rules.links) {
        pending.push_back({l.id, locate(l.selector, nullptr), &l.selector, 0, sample_of(l.id), CarrierKind::Link});
        auto nested_ranks = rank_counts(l.texts);
        for (const auto& t : l.texts) {
            pending.push_back({t.id, locate(l.selector, &t.selector), &l.selector, nested_ranks[t.selector.str()] > 1 ? t.rank : 0,
                               sample_of(t.id), CarrierKind::Text, t.selector.empty()});
        }
        for (const auto& i : l.images) {
            pending.push_back({i.id, locate(l.selector, &i.selector), &l.selector, 0, sample_of(i.id), CarrierKind::Image,
                               i.selector.empty()});
        }
    }
    std::set<std::string> taken = {"key", "__max_page"};
    auto unique = [&](std::string base) {
        std::string name = base;
        for (int k = 2; taken.count(name); ++k) name = base + "_" + std::to_string(k);
        taken.insert(name);
        return name;
    };

    std::vector<FieldName> out;
    int generic = 0;
    std::string link_base;
    NameSource link_source = NameSource::Generic;
    for (const auto& p : pending) {
        std::string base;
        NameSource source = NameSource::Generic;
        if (p.on_link && link_source != NameSource::Generic) {
            base = link_base + (p.kind == CarrierKind::Image ? "_image" : "_text");
            source = link_source;
        } else if (!header.empty() && block.sub_block_tag == "tr" && p.column_path && !position(*p.column_path).empty()) {
            std::size_t col = static_cast<std::size_t>(position(*p.column_path).front());
            if (col >= 1 && col <= header.size()) {
                base = sanitize_name(header[col - 1]);
                source = NameSource::TableHeader;
            }
        }
        if (base.empty() && p.element) {
            const auto& n = doc[*p.element];
            for (const char* attr : {"name", "id", "class"}) {
                const auto* v = n.attr(attr);
                if (!v) continue;
                std::string token = dom::collapse_whitespace(*v);
                if (std::string(attr) == "class") token = token.substr(0, token.find(' '));
                base = sanitize_name(token);
                if (!base.empty()) {
                    source = NameSource::Attribute;
                    break;
                }
            }
            if (base.empty()) {
                if (const auto* ph = n.attr("placeholder")) {
                    base = sanitize_name(*ph);
                    if (!base.empty()) source = NameSource::Placeholder;
                }
            }
        }
        if (base.empty() && oracle) {
            if (auto suggested = oracle(p.sample, p.kind)) {
                base = sanitize_name(*suggested);
                if (!base.empty()) source = NameSource::Oracle;
            }
        }
        if (base.empty()) {
            base = "field_" + std::to_string(++generic);
            source = NameSource::Generic;
        } else if (p.rank > 0) {
            base += "_" + std::to_string(p.rank);
        }
        if (p.kind == CarrierKind::Link) {
            link_base = base;
            link_source = source;
        }
        out.push_back({p.id, unique(base), source});
    }
    return out;
}

Json record_json(const Record& record, const ExtractionRules& rules, const std::map<int, std::string>& names) {
    auto value = [&](int id) -> Json {
        auto it = record.find(id);
        return it == record.end() || !it->second ? Json(nullptr) : Json(*it->second);
    };
    auto name = [&](int id) {
        auto it = names.find(id);
        return it == names.end() ? "field_" + std::to_string(id) : it->second;
    };
    Json j = Json::object();
    for (const auto& t : rules.texts) j[name(t.id)] = value(t.id);
    for (const auto& i : rules.images) j[name(i.id)] = value(i.id);
    for (const auto& l : rules.links) {
        Json href = value(l.id);
        if (href.is_null()) {
            j[name(l.id)] = nullptr;
            continue;
        }
        Json link = {{"href", href}};
        for (const auto& t : l.texts) link[name(t.id)] = value(t.id);
        for (const auto& i : l.images) link[name(i.id)] = value(i.id);
        j[name(l.id)] = std::move(link);
    }
    return j;
}

Json to_json(const ExtractionRules& rules) {
    Json j;
    j["texts"] = Json::array();
    for (const auto& t : rules.texts) j["texts"].push_back(text_json(t));
    j["images"] = Json::array();
    for (const auto& i : rules.images) j["images"].push_back(image_json(i));
    j["links"] = Json::array();
    for (const auto& l : rules.links) {
        Json lj = {{"id", l.id}, {"css_selector", l.selector.str()}, {"texts", Json::array()}, {"images", Json::array()}};
        for (const auto& t : l.texts) lj["texts"].push_back(text_json(t));
        for (const auto& i : l.images) lj["images"].push_back(image_json(i));
        j["links"].push_back(std::move(lj));
    }
    return j;
}

ExtractionRules rules_from_json(const Json& j) {
    if (!j.is_object()) throw ValidationError("extraction rules must be an object");
    ExtractionRules r;
    try {
        for (const auto& t : j.value("texts", Json::array())) r.texts.push_back(text_from(t));
        for (const auto& i : j.value("images", Json::array())) r.images.push_back(image_from(i));
        for (const auto& lj : j.value("links", Json::array())) {
            LinkRule l;
            l.id = lj.at("id").get<int>();
            l.selector = selector_from(lj);
            for (const auto& t : lj.value("texts", Json::array())) l.texts.push_back(text_from(t));
            for (const auto& i : lj.value("images", Json::array())) l.images.push_back(image_from(i));
            r.links.push_back(std::move(l));
        }
    } catch (const Json::exception& e) {
        throw ValidationError(std::string("malformed extraction rules: ") + e.what());
    }
    auto ids = r.ids();
    std::set<int> unique(ids.begin(), ids.end());
    if (unique.size() != ids.size()) throw ValidationError("extraction rule ids must be unique");
    return r;
}

Json to_json(const FieldName& n) {
    return {{"field_id", n.field_id}, {"name", n.name}, {"provenance", std::string(to_string(n.provenance))}};
}

NameSource name_source_from_string(std::string_view s) {
    for (auto src : {NameSource::TableHeader, NameSource::Attribute, NameSource::Placeholder, NameSource::Oracle,
                     NameSource::Generic}) {
        if (to_string(src) == s) return src;
    }
    throw ValidationError("unknown name provenance '" + std::string(s) + "'");
}

FieldName field_name_from_json(const Json& j) {
    if (!j.is_object() || !j.contains("field_id") || !j["field_id"].is_number_integer() || !j.contains("name") ||
        !j["name"].is_string()) {
        throw ValidationError("field name needs an integer 'field_id' and a string 'name'");
    }
    FieldName n{j["field_id"].get<int>(), j["name"].get<std::string>(), NameSource::Generic};
    if (j.contains("provenance")) {
        if (!j["provenance"].is_string()) throw ValidationError("'provenance' must be a string");
        n.provenance = name_source_from_string(j["provenance"].get<std::string>());
    }
    return n;
}

}  // namespace webwrap::rules
