#include "webwrap/invoker.hpp"

#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>

#include "webwrap/error.hpp"
#include "webwrap/forms.hpp"
#include "webwrap/rules.hpp"
#include "webwrap/segment.hpp"
#include "webwrap/url.hpp"

namespace webwrap::invoker {

std::string_view to_string(Op op) {
    switch (op) {
    case Op::Eq: return "eq";
    case Op::Ne: return "ne";
    case Op::Gt: return "gt";
    case Op::Ge: return "ge";
    case Op::Lt: return "lt";
    case Op::Le: return "le";
    }
    return "eq";
}

std::optional<Op> op_from_suffix(std::string_view suffix) {
    for (auto op : {Op::Eq, Op::Ne, Op::Gt, Op::Ge, Op::Lt, Op::Le}) {
        if (to_string(op) == suffix) return op;
    }
    return std::nullopt;
}

std::set<std::string> output_paths(const registry::ServiceBlock& block) {
    std::set<std::string> paths;
    auto names = block.names();
    auto add = [&](int id) {
        auto it = names.find(id);
        if (it != names.end()) paths.insert(it->second);
    };
    for (const auto& t : block.rules.texts) add(t.id);
    for (const auto& i : block.rules.images) add(i.id);
    for (const auto& l : block.rules.links) {
        auto it = names.find(l.id);
        if (it == names.end()) continue;
        paths.insert(it->second);
        paths.insert(it->second + ".href");
        for (const auto& t : l.texts) {
            if (names.count(t.id)) paths.insert(it->second + "." + names[t.id]);
        }
        for (const auto& i : l.images) {
            if (names.count(i.id)) paths.insert(it->second + "." + names[i.id]);
        }
    }
    return paths;
}

ParamPartition analyze_params(const registry::ServiceDefinition& service, const Query& query) {
    std::set<std::string> paths;
    for (const auto& b : service.blocks) paths.merge(output_paths(b));

    ParamPartition out;
    for (const auto& [name, value] : query) {
        if (registry::is_reserved_param(name)) {
            out.system[name] = value;
        } else if (service.field_bindings.count(name)) {
            out.application[name] = value;
        } else if (paths.count(name)) {
            out.filter.push_back({name, Op::Eq, value});
        } else {
            auto cut = name.rfind("__");
            std::optional<Op> op;
            if (cut != std::string::npos && cut > 0) op = op_from_suffix(std::string_view(name).substr(cut + 2));
            if (op && paths.count(name.substr(0, cut))) {
                out.filter.push_back({name.substr(0, cut), *op, value});
            } else {
                out.dropped.push_back(name);
            }
        }
    }
    return out;
}

Authorization default_system_hook(const registry::ServiceDefinition& service,
                                  const std::map<std::string, std::string>& system) {
    if (!service.api_key.empty()) {
        auto it = system.find("key");
        if (it == system.end() || it->second != service.api_key) {
            throw AuthorizationError("missing or invalid key for service " + std::to_string(service.id), {"key"});
        }
    }
    Authorization auth;
    if (auto it = system.find("__max_page"); it != system.end()) {
        const auto& s = it->second;
        int v = 0;
        auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc() || ptr != s.data() + s.size() || v < 1) {
            throw ParameterError("__max_page must be a positive integer", {"__max_page"});
        }
        auth.page_budget = v;
    }
    return auth;
}

namespace {

std::optional<double> as_number(const std::string& raw) {
    std::string s = dom::collapse_whitespace(raw);
    if (s.empty()) return std::nullopt;
    errno = 0;
    char* end = nullptr;
    double v = std::strtod(s.c_str(), &end);
    if (errno != 0 || end != s.c_str() + s.size() || !std::isfinite(v)) return std::nullopt;
    return v;
}

const Json* lookup(const Json& record, const std::string& path) {
    const Json* cur = &record;
    std::size_t start = 0;
    while (true) {
        auto dot = path.find('.', start);
        auto part = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (!cur->is_object()) return nullptr;
        auto it = cur->find(part);
        if (it == cur->end()) return nullptr;
        cur = &*it;
        if (dot == std::string::npos) break;
        start = dot + 1;
    }
    // a link compares by its href
    if (cur->is_object()) {
        auto it = cur->find("href");
        return it == cur->end() ? nullptr : &*it;
    }
    return cur;
}

}  // namespace

bool evaluate(const Json& record, const FilterPredicate& p) {
    const Json* v = lookup(record, p.path);
    if (!v || !v->is_string()) return false;
    const auto& value = v->get_ref<const std::string&>();
    auto a = as_number(value);
    auto b = as_number(p.operand);
    if (a && b) {
        switch (p.op) {
        case Op::Eq: return *a == *b;
        case Op::Ne: return *a != *b;
        case Op::Gt: return *a > *b;
        case Op::Ge: return *a >= *b;
        case Op::Lt: return *a < *b;
        case Op::Le: return *a <= *b;
        }
    }
    switch (p.op) {
    case Op::Eq: return value == p.operand;
    case Op::Ne: return value != p.operand;
    default: return false;
    }
}

std::vector<Json> filter_records(const std::vector<Json>& records, const std::vector<FilterPredicate>& predicates,
                                 const std::set<std::string>& known_paths) {
    for (const auto& p : predicates) {
        if (!known_paths.count(p.path)) throw FilterError("unknown filter field '" + p.path + "'", {p.path});
    }
    std::vector<Json> out;
    for (const auto& r : records) {
        bool keep = true;
        for (const auto& p : predicates) {
            if (!evaluate(r, p)) {
                keep = false;
                break;
            }
        }
        if (keep) out.push_back(r);
    }
    return out;
}

PaginationLexicon PaginationLexicon::defaults() {
    return {{"next", "next page", ">", "»", "next »", "下一页", "下页"}, {"last", "last page", ">>", "»»", "尾页", "末页"}};
}

PaginationLexicon PaginationLexicon::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot read pagination lexicon " + path, {path});
    PaginationLexicon lex;
    std::string line;
    while (std::getline(in, line)) {
        line = dom::collapse_whitespace(line);
        if (line.empty() || line[0] == '#') continue;
        if (line.rfind("last:", 0) == 0) {
            auto word = dom::collapse_whitespace(line.substr(5));
            if (!word.empty()) lex.last.push_back(word);
        } else {
            lex.next.push_back(line);
        }
    }
    return lex;
}

namespace {

std::string fold(std::string_view s) {
    std::string out = dom::collapse_whitespace(s);
    for (auto& c : out) {
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    }
    return out;
}

// Elements the invoker can follow without running script.
std::optional<std::string> followable_href(const dom::Document& doc, dom::NodeId id) {
    const auto& n = doc[id];
    if (n.tag != "a" && n.tag != "area") return std::nullopt;
    const std::string* href = n.attr("href");
    if (!href) return std::nullopt;
    std::string h = fold(*href);
    if (h.empty() || h[0] == '#' || h.rfind("javascript:", 0) == 0) return std::nullopt;
    return *href;
}

std::optional<long> numeral(const std::string& text) {
    if (text.empty() || text.size() > 9) return std::nullopt;
    long v = 0;
    for (char c : text) {
        if (c < '0' || c > '9') return std::nullopt;
        v = v * 10 + (c - '0');
    }
    return v;
}

bool in(const std::vector<std::string>& words, const std::string& text) {
    for (const auto& w : words) {
        if (fold(w) == text) return true;
    }
    return false;
}

}  // namespace

std::optional<SelectorPath> find_next_page(const dom::Document& doc, const PaginationLexicon& lexicon) {
    std::optional<dom::NodeId> numeral_next;
    std::optional<long> current;
    std::optional<dom::NodeId> explicit_next;
    doc.walk(doc.root(), [&](dom::NodeId id) {
        if (explicit_next) return false;
        const auto& n = doc[id];
        if (!n.is_element()) return true;
        if (n.tag == "script" || n.tag == "style" || n.tag == "template") return false;
        bool clickable = followable_href(doc, id).has_value();
        std::string text = fold(dom::inner_text(doc, id));
        if (clickable) {
            const std::string* rel = n.attr("rel");
            if ((rel && fold(*rel) == "next") || (in(lexicon.next, text) && !in(lexicon.last, text))) {
                explicit_next = id;
                return false;
            }
            auto v = numeral(text);
            if (v && current && !numeral_next && *v == *current + 1) numeral_next = id;
            return true;
        }
        if (doc.element_children(id).empty()) {
            if (auto v = numeral(text)) current = v;
        }
        return true;
    });
    if (explicit_next) return selector_of(doc, *explicit_next);
    if (numeral_next) return selector_of(doc, *numeral_next);
    return std::nullopt;
}

dom::DocumentPtr first_result_page(const registry::ServiceDefinition& service,
                             const std::map<std::string, std::string>& application, provider::PageProvider& provider) {
    auto source = provider.load({service.source_url, provider::Method::Get, std::nullopt, {}});
    const forms::FormRecord* stored = service.bound_form();
    if (!stored) return source;
    forms::FormRecord form = *stored;
    std::optional<int> button = stored->main_btn_index;
    // the live page decides method, action and hidden values
    auto fresh = forms::extract_forms(*source, service.source_url);
    for (const auto& f : fresh.forms) {
        if (f.css_selector != stored->css_selector) continue;
        const auto& wanted = stored->query_button_list.at(*stored->main_btn_index).selector;
        for (std::size_t i = 0; i < f.query_button_list.size(); ++i) {
            if (f.query_button_list[i].selector == wanted) {
                form = f;
                button = static_cast<int>(i);
            }
        }
    }
    std::map<std::string, std::string> values;
    for (const auto& [param, field] : service.field_bindings) {
        if (auto it = application.find(param); it != application.end()) {
            values[field.name] = it->second;
        } else if (auto ex = service.example_values.find(param); ex != service.example_values.end()) {
            values[field.name] = ex->second;
        }
    }
    auto request = provider::make_submission(*source, form, button, values);
    return provider.load(request);
}

Collected execute(const registry::ServiceDefinition& service, const std::map<std::string, std::string>& application,
                  int page_budget, provider::PageProvider& provider, const PaginationLexicon& lexicon) {
    Collected out;
    for (const auto& b : service.blocks) out.blocks.push_back({b.name, {}});

    auto page = first_result_page(service, application, provider);
    while (true) {
        for (std::size_t i = 0; i < service.blocks.size(); ++i) {
            const auto& sb = service.blocks[i];
            try {
                auto subs = segment::locate_sub_blocks(*page, sb.block);
                auto names = sb.names();
                for (const auto& rec : rules::extract(*page, subs, sb.rules)) {
                    out.blocks[i].second.push_back(rules::record_json(rec, sb.rules, names));
                }
            } catch (const Error& e) {
                std::vector<std::string> details{sb.name, sb.block.parent_selector.str(), e.code()};
                throw PartialResultError("block '" + sb.name + "' could not be extracted from result page " +
                                             std::to_string(out.pages_fetched + 1) + ": " + e.what(),
                                         out.pages_fetched, details);
            }
        }
        ++out.pages_fetched;
        if (out.pages_fetched >= page_budget) break;
        auto next = find_next_page(*page, lexicon);
        if (!next) break;
        auto node = resolve_selector(*page, *next);
        auto target = url::resolve(page->base_url(node), *(*page)[node].attr("href"));
        page = provider.load({target, provider::Method::Get, std::nullopt, {}});
    }
    return out;
}

Json invoke(const registry::ServiceDefinition& service, const Query& query, provider::PageProvider& provider,
            const InvokeOptions& options) {
    auto partition = analyze_params(service, query);
    auto auth = options.system_hook(service, partition.system);
    auto collected = execute(service, partition.application, auth.page_budget, provider, options.lexicon);

    Json blocks = Json::object();
    for (std::size_t i = 0; i < service.blocks.size(); ++i) {
        auto paths = output_paths(service.blocks[i]);
        std::vector<FilterPredicate> applicable;
        for (const auto& p : partition.filter) {
            if (paths.count(p.path)) applicable.push_back(p);
        }
        Json records = Json::array();
        for (auto& r : filter_records(collected.blocks[i].second, applicable, paths)) records.push_back(std::move(r));
        blocks[collected.blocks[i].first] = std::move(records);
    }
    Json dropped = Json::array();
    for (const auto& d : partition.dropped) dropped.push_back(d);
    return {{"service_id", service.id}, {"blocks", blocks}, {"pages_fetched", collected.pages_fetched},
            {"dropped_params", dropped}};
}

}  // namespace webwrap::invoker
