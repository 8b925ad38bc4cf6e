#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "webwrap/dom.hpp"
#include "webwrap/json.hpp"
#include "webwrap/selector.hpp"

namespace webwrap::forms {

// Query-button ladder, in priority order.
enum class ButtonKind { InputSubmit = 1, InputButton, ButtonTag, Anchor, Image, ClickBound };

std::string_view to_string(ButtonKind kind);
ButtonKind button_kind_from_string(std::string_view s);

struct FieldRecord {
    SelectorPath selector;
    std::string input_type;
    std::string name;
    std::string value;
    std::string placeholder;
    std::string description;
    std::optional<bool> checked;      // checkbox only
    std::optional<int> select_index;  // select / datalist only
    std::string ui_mark;              // "T1", ... (fillable fields only)
    bool fillable = true;

    bool operator==(const FieldRecord&) const = default;
};

struct ButtonCandidate {
    SelectorPath selector;
    ButtonKind kind = ButtonKind::InputSubmit;
    int confidence_rank = 1;
    std::string ui_mark;  // "B1", ...
    std::string text;

    bool operator==(const ButtonCandidate&) const = default;
};

struct FormRecord {
    SelectorPath css_selector;
    std::vector<FieldRecord> input_list;
    std::vector<ButtonCandidate> query_button_list;
    std::optional<int> main_btn_index;
    bool synthetic = false;  // assembled from click-bound elements outside <form>

    const ButtonCandidate* main_button() const;
    bool operator==(const FormRecord&) const = default;
};

struct FormAnalysis {
    std::string url;
    std::vector<FormRecord> forms;
    std::optional<int> main_form_index;

    const FormRecord* main_form() const;
    bool operator==(const FormAnalysis&) const = default;
};

bool is_fillable_type(std::string_view input_type);

// True for statically visible click markers: an onclick attribute, a
// javascript: href, or role="button".
bool detect_click_bound(const dom::Document& doc, dom::NodeId element);

FormAnalysis extract_forms(const dom::Document& doc, std::string source_url);

// Copy of the page with "[T1]"/"[B1]" badges after each recorded element and
// a data-ww-mark attribute on it. Element child positions are unchanged, so
// every recorded selector still resolves. Loaded iframes are inlined via srcdoc.
std::string annotate_for_selection(const dom::Document& doc, const FormAnalysis& analysis);

Json to_json(const FieldRecord& field);
Json to_json(const ButtonCandidate& button);
Json to_json(const FormRecord& form);
Json to_json(const FormAnalysis& analysis);
FieldRecord field_from_json(const Json& j);
ButtonCandidate button_from_json(const Json& j);
FormRecord form_from_json(const Json& j);
FormAnalysis form_analysis_from_json(const Json& j);

}  // namespace webwrap::forms
