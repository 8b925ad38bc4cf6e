#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "webwrap/dom.hpp"
#include "webwrap/json.hpp"
#include "webwrap/segment.hpp"
#include "webwrap/selector.hpp"

namespace webwrap::rules {

enum class ImageType { Img, BackgroundImg };

struct TextRule {
    int id = 0;
    int rank = 1;
    SelectorPath selector;
    bool operator==(const TextRule&) const = default;
};

struct ImageRule {
    int id = 0;
    ImageType type = ImageType::Img;
    SelectorPath selector;
    bool operator==(const ImageRule&) const = default;
};

// Nested selectors are relative to the link element.
struct LinkRule {
    int id = 0;
    SelectorPath selector;
    std::vector<TextRule> texts;
    std::vector<ImageRule> images;
    bool operator==(const LinkRule&) const = default;
};

// Selectors are relative to the sub-block root, so one document serves every
// sub-block of a block. Ids run over texts, images, then each link followed
// by its nested rules.
struct ExtractionRules {
    std::vector<TextRule> texts;
    std::vector<ImageRule> images;
    std::vector<LinkRule> links;

    bool empty() const { return texts.empty() && images.empty() && links.empty(); }
    std::vector<int> ids() const;
    bool operator==(const ExtractionRules&) const = default;
};

// Rules for the union of carriers over the block's data sub-blocks on the
// source page. Throws EmptyRulesError when the block carries no data.
ExtractionRules generate_rules(const dom::Document& doc, const segment::Block& block);
ExtractionRules generate_rules(const dom::Document& doc, const std::vector<dom::NodeId>& sub_blocks);

// rule id -> value; nullopt where the carrier is absent in this sub-block.
using Record = std::map<int, std::optional<std::string>>;

std::vector<Record> extract(const dom::Document& doc, const std::vector<dom::NodeId>& sub_blocks,
                            const ExtractionRules& rules);
// Throws ExtractionError naming the first sub-block selector that fails.
std::vector<Record> extract(const dom::Document& doc, const std::vector<SelectorPath>& sub_blocks,
                            const ExtractionRules& rules);

enum class NameSource { TableHeader, Attribute, Placeholder, Oracle, Generic };
std::string_view to_string(NameSource s);

struct FieldName {
    int field_id = 0;
    std::string name;
    NameSource provenance = NameSource::Generic;
    bool operator==(const FieldName&) const = default;
};

// Optional naming hook: (sample value, carrier kind) -> name.
using NameOracle = std::function<std::optional<std::string>(const std::string&, segment::CarrierKind)>;

// One name per rule id (nested link rules included), pairwise distinct.
std::vector<FieldName> suggest_field_names(const dom::Document& doc, const segment::Block& block,
                                           const ExtractionRules& rules, const NameOracle& oracle = {});

// Names usable as invocation parameters: whitespace and '.' become '_'.
std::string sanitize_name(std::string_view raw);

// Record as a JSON object keyed by field names; links become
// {"href": ..., <nested names>: ...} or null when absent.
Json record_json(const Record& record, const ExtractionRules& rules, const std::map<int, std::string>& names);

Json to_json(const ExtractionRules& rules);
ExtractionRules rules_from_json(const Json& j);
Json to_json(const FieldName& name);
FieldName field_name_from_json(const Json& j);
NameSource name_source_from_string(std::string_view s);

}  // namespace webwrap::rules
