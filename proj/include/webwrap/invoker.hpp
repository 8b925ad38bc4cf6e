#pragma once

#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "webwrap/dom.hpp"
#include "webwrap/json.hpp"
#include "webwrap/provider.hpp"
#include "webwrap/registry.hpp"
#include "webwrap/selector.hpp"

namespace webwrap::invoker {

enum class Op { Eq, Ne, Gt, Ge, Lt, Le };

std::string_view to_string(Op op);
std::optional<Op> op_from_suffix(std::string_view suffix);

struct FilterPredicate {
    std::string path;  // dotted; "pc.price" reaches into link pc
    Op op = Op::Eq;
    std::string operand;
    bool operator==(const FilterPredicate&) const = default;
};

struct ParamPartition {
    std::map<std::string, std::string> system;
    std::map<std::string, std::string> application;
    std::vector<FilterPredicate> filter;
    std::vector<std::string> dropped;
};

using Query = std::vector<std::pair<std::string, std::string>>;

// Field paths a block's records expose: every field name, plus "link.href"
// and "link.<nested>" for link fields.
std::set<std::string> output_paths(const registry::ServiceBlock& block);

ParamPartition analyze_params(const registry::ServiceDefinition& service, const Query& query);

struct Authorization {
    int page_budget = 1;
};

// Replaceable check of the system parameters.
using SystemParamHook =
    std::function<Authorization(const registry::ServiceDefinition&, const std::map<std::string, std::string>&)>;

// Key equality when the service has a key; __max_page as a positive integer.
Authorization default_system_hook(const registry::ServiceDefinition& service,
                                  const std::map<std::string, std::string>& system);

bool evaluate(const Json& record, const FilterPredicate& p);

// Conjunction of the predicates, order preserved. Throws FilterError when a
// predicate path is not in `known_paths`.
std::vector<Json> filter_records(const std::vector<Json>& records, const std::vector<FilterPredicate>& predicates,
                                 const std::set<std::string>& known_paths);

struct PaginationLexicon {
    std::vector<std::string> next;  // explicit next-page texts
    std::vector<std::string> last;  // recognized, never followed

    static PaginationLexicon defaults();
    // One entry per line; lines starting with "last:" go to `last`.
    static PaginationLexicon from_file(const std::string& path);
};

// Depth-first scan for the next-page element: the first clickable element
// whose text is an explicit next-page word (or rel=next), else the clickable
// numeral right after the current, non-clickable one.
std::optional<SelectorPath> find_next_page(const dom::Document& doc,
                                           const PaginationLexicon& lexicon = PaginationLexicon::defaults());

struct InvokeOptions {
    PaginationLexicon lexicon = PaginationLexicon::defaults();
    SystemParamHook system_hook = default_system_hook;
};

// The source page itself for static services; otherwise the page returned by
// submitting the bound form, re-resolved on a fresh copy of the source page,
// with application values over example values over recorded defaults.
dom::DocumentPtr first_result_page(const registry::ServiceDefinition& service,
                                   const std::map<std::string, std::string>& application,
                                   provider::PageProvider& provider);

// Records of every block over the fetched result pages, before filtering.
struct Collected {
    std::vector<std::pair<std::string, std::vector<Json>>> blocks;  // service block order
    int pages_fetched = 0;
};

Collected execute(const registry::ServiceDefinition& service, const std::map<std::string, std::string>& application,
                  int page_budget, provider::PageProvider& provider, const PaginationLexicon& lexicon);

// analyze_params, authorize, execute, filter. Returns the response body.
Json invoke(const registry::ServiceDefinition& service, const Query& query, provider::PageProvider& provider,
            const InvokeOptions& options = {});

}  // namespace webwrap::invoker
