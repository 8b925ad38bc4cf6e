#include "webwrap/forms.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <map>
#include <set>

#include "webwrap/error.hpp"

namespace webwrap::forms {

using dom::Document;
using dom::NodeId;

namespace {

constexpr std::array<std::string_view, 6> kKindNames = {"input-submit", "input-button", "button-tag",
                                                        "anchor",       "image",        "click-bound-other"};

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
    return out;
}

std::string attr_or(const dom::Node& n, std::string_view name, std::string fallback = {}) {
    const auto* v = n.attr(name);
    return v ? *v : fallback;
}

std::string input_type_of(const dom::Node& n) {
    if (n.tag != "input") return n.tag;
    std::string t = lower(dom::collapse_whitespace(attr_or(n, "type")));
    return t.empty() ? "text" : t;
}

bool is_field_element(const dom::Node& n) {
    if (!n.is_element()) return false;
    if (n.tag == "select" || n.tag == "textarea" || n.tag == "datalist") return true;
    if (n.tag != "input") return false;
    std::string t = input_type_of(n);
    return t != "submit" && t != "button" && t != "image" && t != "reset";
}

// Ladder rung for an element inside a form, or nullopt if it is no candidate.
std::optional<ButtonKind> ladder_rung(const Document& doc, NodeId id) {
    const auto& n = doc[id];
    if (!n.is_element()) return std::nullopt;
    if (n.tag == "input") {
        std::string t = input_type_of(n);
        if (t == "submit") return ButtonKind::InputSubmit;
        if (t == "button") return ButtonKind::InputButton;
        if (t == "image") return ButtonKind::Image;
        if (t == "reset") return std::nullopt;
        return detect_click_bound(doc, id) && !is_fillable_type(t) ? std::optional(ButtonKind::ClickBound) : std::nullopt;
    }
    if (n.tag == "button") {
        if (lower(attr_or(n, "type")) == "reset") return std::nullopt;
        return ButtonKind::ButtonTag;
    }
    if (is_field_element(n)) return std::nullopt;
    if (!detect_click_bound(doc, id)) return std::nullopt;
    if (n.tag == "a") return ButtonKind::Anchor;
    if (n.tag == "img") return ButtonKind::Image;
    return ButtonKind::ClickBound;
}

// Outside forms only elements that plausibly carry a click listener count.
std::optional<ButtonKind> outside_rung(const Document& doc, NodeId id) {
    const auto& n = doc[id];
    if (!n.is_element()) return std::nullopt;
    if (n.tag == "input" || n.tag == "button") return ladder_rung(doc, id);
    if (is_field_element(n) || !detect_click_bound(doc, id)) return std::nullopt;
    return ladder_rung(doc, id);
}

std::string label_text(const Document& doc, NodeId field) {
    const auto& n = doc[field];
    if (const auto* id = n.attr("id"); id && !id->empty()) {
        NodeId root = doc.owner_root(field);
        std::string found;
        doc.walk(root, [&](NodeId c) {
            if (!found.empty()) return false;
            const auto& cn = doc[c];
            if (cn.is_root() && c != root) return false;
            if (cn.is_element() && cn.tag == "label" && attr_or(cn, "for") == *id) {
                found = dom::inner_text(doc, c);
                return false;
            }
            return true;
        });
        if (!found.empty()) return found;
    }
    for (NodeId p = n.parent; p != dom::kNoNode && doc[p].is_element(); p = doc[p].parent) {
        if (doc[p].tag == "label") return dom::inner_text(doc, p);
        if (doc[p].tag == "form") break;
    }
    return {};
}

std::vector<NodeId> options_of(const Document& doc, NodeId id) {
    std::vector<NodeId> out;
    doc.walk(id, [&](NodeId c) {
        if (doc[c].is_root()) return false;
        if (doc[c].is_element() && doc[c].tag == "option") out.push_back(c);
        return true;
    });
    return out;
}

FieldRecord make_field(const Document& doc, NodeId id) {
    const auto& n = doc[id];
    FieldRecord f;
    f.selector = selector_of(doc, id);
    f.input_type = input_type_of(n);
    f.name = attr_or(n, "name");
    f.placeholder = attr_or(n, "placeholder");
    f.fillable = is_fillable_type(f.input_type);
    if (n.tag == "textarea") {
        f.value = n.children.empty() ? "" : doc[n.children.front()].text;
    } else if (n.tag == "select" || n.tag == "datalist") {
        auto opts = options_of(doc, id);
        int selected = 0;
        for (std::size_t i = 0; i < opts.size(); ++i) {
            if (doc[opts[i]].attr("selected")) {
                selected = static_cast<int>(i);
                break;
            }
        }
        f.select_index = selected;
        if (!opts.empty()) {
            const auto& opt = doc[opts[static_cast<std::size_t>(selected)]];
            const auto* v = opt.attr("value");
            f.value = v ? *v : dom::inner_text(doc, opts[static_cast<std::size_t>(selected)]);
        }
    } else {
        f.value = attr_or(n, "value");
    }
    if (f.input_type == "checkbox") f.checked = n.attr("checked") != nullptr;
    if (!f.placeholder.empty()) {
        f.description = f.placeholder;
    } else if (!f.name.empty()) {
        f.description = f.name;
    } else {
        f.description = label_text(doc, id);
    }
    return f;
}

ButtonCandidate make_button(const Document& doc, NodeId id, ButtonKind kind) {
    ButtonCandidate b;
    b.selector = selector_of(doc, id);
    b.kind = kind;
    b.confidence_rank = static_cast<int>(kind);
    const auto& n = doc[id];
    if (n.tag == "input") {
        b.text = attr_or(n, "value", attr_or(n, "alt"));
    } else if (n.tag == "img") {
        b.text = attr_or(n, "alt");
    } else {
        b.text = dom::inner_text(doc, id);
    }
    return b;
}

bool inside_form(const Document& doc, NodeId id) {
    for (NodeId p = doc[id].parent; p != dom::kNoNode; p = doc[p].parent) {
        if (doc[p].is_root()) return false;
        if (doc[p].tag == "form") return true;
    }
    return false;
}

// Preorder over a subtree without entering inner documents.
template <typename F>
void walk_local(const Document& doc, NodeId from, F&& f) {
    doc.walk(from, [&](NodeId c) {
        if (c != from && doc[c].is_root()) return false;
        if (c != from && doc[c].is_element() && doc[c].tag == "form") return false;  // nested forms are their own
        f(c);
        return true;
    });
}

// Fillable inputs outside any form whose parent or grandparent is `container`.
std::vector<NodeId> nearby_fields(const Document& doc, NodeId container, NodeId except) {
    std::vector<NodeId> out;
    auto consider = [&](NodeId c) {
        if (c != except && is_field_element(doc[c]) && is_fillable_type(input_type_of(doc[c])) && !inside_form(doc, c)) {
            out.push_back(c);
        }
    };
    for (NodeId c : doc[container].children) {
        if (!doc[c].is_element()) continue;
        consider(c);
        for (NodeId g : doc[c].children) {
            if (doc[g].is_element()) consider(g);
        }
    }
    return out;
}

void sort_ladder(std::vector<ButtonCandidate>& buttons) {
    std::stable_sort(buttons.begin(), buttons.end(),
                     [](const ButtonCandidate& a, const ButtonCandidate& b) { return a.confidence_rank < b.confidence_rank; });
}

}  // namespace

std::string_view to_string(ButtonKind kind) { return kKindNames[static_cast<std::size_t>(kind) - 1]; }

ButtonKind button_kind_from_string(std::string_view s) {
    for (std::size_t i = 0; i < kKindNames.size(); ++i) {
        if (kKindNames[i] == s) return static_cast<ButtonKind>(i + 1);
    }
    throw ValidationError("unknown button source_kind '" + std::string(s) + "'");
}

const ButtonCandidate* FormRecord::main_button() const {
    if (!main_btn_index || *main_btn_index < 0 || *main_btn_index >= static_cast<int>(query_button_list.size())) return nullptr;
    return &query_button_list[static_cast<std::size_t>(*main_btn_index)];
}

const FormRecord* FormAnalysis::main_form() const {
    if (!main_form_index || *main_form_index < 0 || *main_form_index >= static_cast<int>(forms.size())) return nullptr;
    return &forms[static_cast<std::size_t>(*main_form_index)];
}

bool is_fillable_type(std::string_view t) {
    static const std::set<std::string_view> fillable = {"text",  "search", "number",   "email",          "tel",
                                                        "url",   "date",   "datetime-local", "month", "week",
                                                        "time",  "range",  "color",    "checkbox",       "radio",
                                                        "select", "datalist", "textarea"};
    return fillable.count(t) > 0;
}

bool detect_click_bound(const Document& doc, NodeId element) {
    const auto& n = doc[element];
    if (!n.is_element()) return false;
    if (n.attr("onclick")) return true;
    if (const auto* href = n.attr("href")) {
        std::string h = lower(dom::collapse_whitespace(*href));
        if (h.rfind("javascript:", 0) == 0) return true;
    }
    if (const auto* role = n.attr("role"); role && lower(dom::collapse_whitespace(*role)) == "button") return true;
    return false;
}

FormAnalysis extract_forms(const Document& doc, std::string source_url) {
    FormAnalysis analysis;
    analysis.url = std::move(source_url);

    struct Pending {
        NodeId container;
        FormRecord form;
    };
    std::vector<Pending> pending;

    // Steps 1-3: every <form>, including those inside loaded iframes.
    for (NodeId id : doc.preorder(doc.root())) {
        const auto& n = doc[id];
        if (!n.is_element() || n.tag != "form") continue;
        FormRecord form;
        form.css_selector = selector_of(doc, id);
        std::set<NodeId> seen;
        walk_local(doc, id, [&](NodeId c) {
            if (c == id) return;
            if (is_field_element(doc[c])) form.input_list.push_back(make_field(doc, c));
            if (auto rung = ladder_rung(doc, c); rung && seen.insert(c).second) {
                form.query_button_list.push_back(make_button(doc, c, *rung));
            }
        });
        sort_ladder(form.query_button_list);
        pending.push_back({id, std::move(form)});
    }

    // Step 4: click-bound elements outside forms next to fillable inputs.
    std::map<NodeId, std::size_t> synthetic_by_container;
    for (NodeId id : doc.preorder(doc.root())) {
        if (!doc[id].is_element() || inside_form(doc, id) || doc[id].tag == "form") continue;
        auto rung = outside_rung(doc, id);
        if (!rung) continue;
        NodeId container = dom::kNoNode;
        std::vector<NodeId> fields;
        NodeId probe = doc[id].parent;
        for (int level = 0; level < 2 && probe != dom::kNoNode && doc[probe].is_element(); ++level) {
            fields = nearby_fields(doc, probe, id);
            if (!fields.empty()) {
                container = probe;
                break;
            }
            probe = doc[probe].parent;
        }
        if (container == dom::kNoNode) continue;
        auto it = synthetic_by_container.find(container);
        if (it == synthetic_by_container.end()) {
            FormRecord form;
            form.synthetic = true;
            form.css_selector = selector_of(doc, container);
            for (NodeId f : fields) form.input_list.push_back(make_field(doc, f));
            synthetic_by_container[container] = pending.size();
            pending.push_back({container, std::move(form)});
            it = synthetic_by_container.find(container);
        }
        pending[it->second].form.query_button_list.push_back(make_button(doc, id, *rung));
    }
    for (auto& p : pending) sort_ladder(p.form.query_button_list);

    // Document order of containers.
    std::map<NodeId, std::size_t> order;
    {
        std::size_t i = 0;
        for (NodeId id : doc.preorder(doc.root())) order[id] = i++;
    }
    std::stable_sort(pending.begin(), pending.end(),
                     [&](const Pending& a, const Pending& b) { return order[a.container] < order[b.container]; });

    int t = 0, b = 0;
    for (auto& p : pending) {
        for (auto& f : p.form.input_list) {
            if (f.fillable) f.ui_mark = "T" + std::to_string(++t);
        }
        for (auto& btn : p.form.query_button_list) btn.ui_mark = "B" + std::to_string(++b);
        analysis.forms.push_back(std::move(p.form));
    }
    return analysis;
}

std::string annotate_for_selection(const Document& doc, const FormAnalysis& analysis) {
    if (analysis.forms.empty()) return dom::serialize(doc);
    std::map<NodeId, std::string> marks;
    for (const auto& form : analysis.forms) {
        for (const auto& f : form.input_list) {
            if (f.ui_mark.empty()) continue;
            if (auto id = try_resolve(doc, f.selector)) marks[*id] = f.ui_mark;
        }
        for (const auto& btn : form.query_button_list) {
            if (auto id = try_resolve(doc, btn.selector)) marks[*id] = btn.ui_mark;
        }
    }
    dom::SerializeOptions opts;
    opts.inline_frames = true;
    opts.attributes = [&](NodeId id, std::vector<dom::Attribute>& attrs) {
        if (auto it = marks.find(id); it != marks.end()) attrs.push_back({"data-ww-mark", it->second});
    };
    opts.after = [&](NodeId id) -> std::string {
        auto it = marks.find(id);
        return it == marks.end() ? std::string() : "[" + it->second + "]";
    };
    return dom::serialize(doc, doc.root(), opts);
}

Json to_json(const FieldRecord& f) {
    Json j;
    j["css_selector"] = f.selector.str();
    j["type"] = f.input_type;
    j["name"] = f.name;
    j["value"] = f.value;
    j["placeholder"] = f.placeholder;
    j["description"] = f.description;
    if (f.checked) j["checked"] = *f.checked;
    if (f.select_index) j["select_index"] = *f.select_index;
    j["ui_mark"] = f.ui_mark;
    j["fillable"] = f.fillable;
    return j;
}

Json to_json(const ButtonCandidate& b) {
    Json j;
    j["css_selector"] = b.selector.str();
    j["source_kind"] = std::string(to_string(b.kind));
    j["confidence_rank"] = b.confidence_rank;
    j["ui_mark"] = b.ui_mark;
    j["text"] = b.text;
    return j;
}

Json to_json(const FormRecord& form) {
    Json j;
    j["main_btn_index"] = form.main_btn_index ? Json(*form.main_btn_index) : Json(nullptr);
    j["css_selector"] = form.css_selector.str();
    j["input_list"] = Json::array();
    for (const auto& f : form.input_list) j["input_list"].push_back(to_json(f));
    j["query_button_list"] = Json::array();
    for (const auto& b : form.query_button_list) j["query_button_list"].push_back(to_json(b));
    return j;
}

Json to_json(const FormAnalysis& a) {
    Json j;
    j["url"] = a.url;
    j["main_form_index"] = a.main_form_index ? Json(*a.main_form_index) : Json(nullptr);
    j["forms"] = Json::array();
    for (const auto& f : a.forms) j["forms"].push_back(to_json(f));
    return j;
}

namespace {

std::string str_or(const Json& j, const char* key, std::string fallback = {}) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return fallback;
    if (!it->is_string()) throw ValidationError(std::string("'") + key + "' must be a string");
    return it->get<std::string>();
}

std::optional<int> opt_int(const Json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return std::nullopt;
    if (!it->is_number_integer()) throw ValidationError(std::string("'") + key + "' must be an integer");
    return it->get<int>();
}

SelectorPath selector_field(const Json& j, const char* key) {
    try {
        return SelectorPath::parse(str_or(j, key));
    } catch (const SelectorSyntaxError& e) {
        throw ValidationError(std::string("bad '") + key + "': " + e.what());
    }
}

const Json& array_field(const Json& j, const char* key) {
    static const Json empty = Json::array();
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return empty;
    if (!it->is_array()) throw ValidationError(std::string("'") + key + "' must be an array");
    return *it;
}

}  // namespace

FieldRecord field_from_json(const Json& j) {
    if (!j.is_object()) throw ValidationError("field record must be an object");
    FieldRecord f;
    f.selector = selector_field(j, "css_selector");
    f.input_type = str_or(j, "type", "text");
    f.name = str_or(j, "name");
    f.value = str_or(j, "value");
    f.placeholder = str_or(j, "placeholder");
    f.description = str_or(j, "description");
    if (auto it = j.find("checked"); it != j.end() && !it->is_null()) {
        if (!it->is_boolean()) throw ValidationError("'checked' must be a boolean");
        f.checked = it->get<bool>();
    }
    f.select_index = opt_int(j, "select_index");
    f.ui_mark = str_or(j, "ui_mark");
    auto fl = j.find("fillable");
    if (fl != j.end() && !fl->is_boolean()) throw ValidationError("'fillable' must be a boolean");
    f.fillable = fl == j.end() ? is_fillable_type(f.input_type) : fl->get<bool>();
    return f;
}

ButtonCandidate button_from_json(const Json& j) {
    if (!j.is_object()) throw ValidationError("button record must be an object");
    ButtonCandidate b;
    b.selector = selector_field(j, "css_selector");
    b.kind = button_kind_from_string(str_or(j, "source_kind", "input-submit"));
    b.confidence_rank = opt_int(j, "confidence_rank").value_or(static_cast<int>(b.kind));
    b.ui_mark = str_or(j, "ui_mark");
    b.text = str_or(j, "text");
    return b;
}

FormRecord form_from_json(const Json& j) {
    if (!j.is_object()) throw ValidationError("form record must be an object");
    FormRecord f;
    f.css_selector = selector_field(j, "css_selector");
    f.main_btn_index = opt_int(j, "main_btn_index");
    for (const auto& x : array_field(j, "input_list")) f.input_list.push_back(field_from_json(x));
    for (const auto& x : array_field(j, "query_button_list")) f.query_button_list.push_back(button_from_json(x));
    return f;
}

FormAnalysis form_analysis_from_json(const Json& j) {
    if (!j.is_object()) throw ValidationError("form analysis must be an object");
    FormAnalysis a;
    a.url = str_or(j, "url");
    a.main_form_index = opt_int(j, "main_form_index");
    for (const auto& x : array_field(j, "forms")) a.forms.push_back(form_from_json(x));
    return a;
}

}  // namespace webwrap::forms
