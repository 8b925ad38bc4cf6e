#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "support/drafts.hpp"
#include "support/oracles.hpp"
#include "webwrap/api.hpp"
#include "webwrap/error.hpp"
#include "webwrap/invoker.hpp"
#include "webwrap/rules.hpp"
#include "webwrap/segment.hpp"

using namespace webwrap;
using namespace webwrap::invoker;
namespace fs = std::filesystem;

namespace {

// Serves fixed pages by exact url.
class MapProvider : public provider::PageProvider {
public:
    std::map<std::string, std::string> pages;
    provider::FetchedPage fetch(const provider::PageRequest& request) override {
        auto it = pages.find(request.url);
        if (it == pages.end()) throw FixtureNotFoundError("no page " + request.url, {request.url});
        record_fetch(request.url);
        return {it->second, request.url, "utf-8"};
    }
};

// Static service over one block of `html` served at `url`.
registry::ServiceDefinition static_service(MapProvider& p, const std::string& url, const std::string& html,
                                           const std::string& block_name = "items") {
    p.pages[url] = html;
    auto doc = p.load({url, provider::Method::Get, std::nullopt, {}});
    auto blocks = segment::segment(*doc);
    REQUIRE(!blocks.empty());
    registry::ServiceDefinition def;
    def.id = 7;
    def.name = "test";
    def.source_url = url;
    registry::ServiceBlock sb;
    sb.name = block_name;
    sb.block = blocks.front();
    sb.rules = rules::generate_rules(*doc, sb.block);
    sb.field_names = rules::suggest_field_names(*doc, sb.block, sb.rules);
    def.blocks.push_back(sb);
    registry::validate(def);
    return def;
}

const char* kProducts =
    "<html><body><div class=products>"
    "<div class=product><a class=pc href=/p/1><span class=title>Pen</span><span class=price>35</span></a></div>"
    "<div class=product><a class=pc href=/p/2><span class=title>Ink</span><span class=price>12</span></a></div>"
    "<div class=product><a class=pc href=/p/3><span class=title>Pad</span><span class=price>35.00</span></a></div>"
    "<div class=product><a class=pc href=/p/4><span class=title>Cap</span><span class=price>$35</span></a></div>"
    "</div></body></html>";

const char* kFlat =
    "<html><body><ul class=list>"
    "<li><span class=name>Pen</span><span class=price>35</span></li>"
    "<li><span class=name>Ink</span><span class=price>12</span></li>"
    "<li><span class=name>Pad</span><span class=price>35</span></li>"
    "<li><span class=name>Cap</span><span class=price>40</span></li>"
    "</ul></body></html>";

std::vector<std::string> column(const Json& records, const std::string& field) {
    std::vector<std::string> out;
    for (const auto& r : records) out.push_back(r[field].get<std::string>());
    return out;
}

}  // namespace

TEST_CASE("parameter partition of the case-study invocation") {
    api::Config c;
    c.store_dir = fs::temp_directory_path() / ("webwrap_test_invoker_" + std::to_string(::getpid()));
    c.fixtures_dir = WEBWRAP_FIXTURES;
    fs::remove_all(c.store_dir);
    api::Api a(c);
    auto def = a.complete_draft(testing::quake_draft());
    auto part = analyze_params(def, api::parse_query("start_time=2019-01-01&end_time=2019-01-18&Magnitude=20&key=a1f6de13"));
    CHECK(part.system == std::map<std::string, std::string>{{"key", "a1f6de13"}});
    CHECK(part.application == std::map<std::string, std::string>{{"start_time", "2019-01-01"}, {"end_time", "2019-01-18"}});
    REQUIRE(part.filter.size() == 1);
    CHECK(part.filter[0] == FilterPredicate{"Magnitude", Op::Eq, "20"});
    CHECK(part.dropped.empty());

    auto empty = analyze_params(def, {});
    CHECK(empty.system.empty());
    CHECK(empty.application.empty());
    CHECK(empty.filter.empty());

    auto mixed = analyze_params(def, {{"Depth__gt", "10"}, {"bogus", "1"}, {"Depth__xx", "1"}, {"__max_page", "2"}});
    CHECK(mixed.filter == std::vector<FilterPredicate>{{"Depth", Op::Gt, "10"}});
    CHECK(mixed.dropped == std::vector<std::string>{"bogus", "Depth__xx"});
    CHECK(mixed.system.at("__max_page") == "2");
    fs::remove_all(c.store_dir);
}

TEST_CASE("partition is total and disjoint") {
    MapProvider p;
    auto def = static_service(p, "http://shop.test/", kFlat);
    std::mt19937 rng(7);
    const std::vector<std::string> names = {"key", "__max_page", "name", "price", "price__lt", "price__bad",
                                            "other", "name__ne", "x__gt", "__eq"};
    for (int round = 0; round < 200; ++round) {
        Query q;
        int n = std::uniform_int_distribution<int>(0, 8)(rng);
        for (int i = 0; i < n; ++i) q.emplace_back(names[rng() % names.size()], std::to_string(rng() % 50));
        auto part = analyze_params(def, q);
        std::size_t filters = part.filter.size(), dropped = part.dropped.size(), placed = 0;
        for (const auto& [k, v] : q) placed += registry::is_reserved_param(k);
        CHECK(placed + filters + dropped + part.application.size() == q.size());
    }
}

TEST_CASE("system parameter hook") {
    registry::ServiceDefinition keyed;
    keyed.api_key = "a1f6de13";
    CHECK(default_system_hook(keyed, {{"key", "a1f6de13"}}).page_budget == 1);
    CHECK_THROWS_AS(default_system_hook(keyed, {}), AuthorizationError);
    CHECK_THROWS_AS(default_system_hook(keyed, {{"key", "nope"}}), AuthorizationError);
    registry::ServiceDefinition open;
    CHECK(default_system_hook(open, {}).page_budget == 1);
    CHECK(default_system_hook(open, {{"__max_page", "3"}}).page_budget == 3);
    for (const char* bad : {"0", "-1", "x", "2.5", ""}) {
        CHECK_THROWS_AS(default_system_hook(open, {{"__max_page", bad}}), ParameterError);
    }
}

TEST_CASE("price=35 selects the products priced 35") {
    MapProvider p;
    auto def = static_service(p, "http://shop.test/", kFlat);
    auto out = invoke(def, {{"price", "35"}}, p);
    CHECK(column(out["blocks"]["items"], "name") == std::vector<std::string>{"Pen", "Pad"});
    auto range = invoke(def, {{"price__ge", "35"}, {"price__lt", "40"}}, p);
    CHECK(column(range["blocks"]["items"], "name") == std::vector<std::string>{"Pen", "Pad"});
    auto none = invoke(def, {}, p);
    CHECK(none["blocks"]["items"].size() == 4);
}

TEST_CASE("pc.price reaches into the link") {
    MapProvider p;
    auto def = static_service(p, "http://shop.test/", kProducts, "products");
    auto names = def.blocks[0].names();
    auto paths = output_paths(def.blocks[0]);
    CHECK(paths.count("pc.price"));
    CHECK(paths.count("pc.href"));
    auto out = invoke(def, {{"pc.price", "35"}}, p);
    const auto& recs = out["blocks"]["products"];
    REQUIRE(recs.size() == 2);
    CHECK(recs[0]["pc"]["title"] == "Pen");
    CHECK(recs[1]["pc"]["title"] == "Pad");
    auto by_href = invoke(def, {{"pc", "http://shop.test/p/2"}}, p);
    CHECK(by_href["blocks"]["products"].size() == 1);
}

TEST_CASE("filter errors and identity") {
    std::vector<Json> recs = {{{"a", "1"}}, {{"a", nullptr}}, {{"a", "x"}}};
    CHECK(filter_records(recs, {}, {"a"}) == recs);
    CHECK_THROWS_AS(filter_records(recs, {{"b", Op::Eq, "1"}}, {"a"}), FilterError);
    CHECK(filter_records(recs, {{"a", Op::Ne, "1"}}, {"a"}).size() == 1);  // null fails every predicate
    CHECK(filter_records(recs, {{"a", Op::Gt, "0"}}, {"a"}).size() == 1);  // "x" is not ordered
}

TEST_CASE("filter_records matches a brute-force evaluator") {
    std::mt19937 rng(1234);
    const std::vector<std::string> pool = {"35", "35.0", " 35", "12", "-3", "1e2", "100", "abc", "", "Pen", "0", "35.5"};
    const std::vector<std::string> paths = {"price", "name", "pc", "pc.price", "pc.href", "pc.title"};
    auto value = [&]() -> Json {
        if (rng() % 8 == 0) return nullptr;
        return pool[rng() % pool.size()];
    };
    int nonempty = 0, changed = 0;
    for (int round = 0; round < 1000; ++round) {
        std::vector<Json> records;
        int n = std::uniform_int_distribution<int>(0, 12)(rng);
        for (int i = 0; i < n; ++i) {
            Json r = {{"name", value()}, {"price", value()}};
            if (rng() % 5 == 0) {
                r["pc"] = nullptr;
            } else {
                r["pc"] = {{"href", value()}, {"title", value()}, {"price", value()}};
            }
            records.push_back(r);
        }
        std::vector<FilterPredicate> preds;
        int k = std::uniform_int_distribution<int>(0, 3)(rng);
        for (int i = 0; i < k; ++i) {
            preds.push_back({paths[rng() % paths.size()], static_cast<Op>(rng() % 6), pool[rng() % pool.size()]});
        }
        std::vector<Json> expected;
        for (const auto& r : records) {
            bool keep = true;
            for (const auto& p : preds) keep = keep && testing::oracle_eval(r, p);
            if (keep) expected.push_back(r);
        }
        auto got = filter_records(records, preds, {paths.begin(), paths.end()});
        CHECK(got == expected);
        nonempty += !got.empty();
        changed += got.size() != records.size();
    }
    CHECK(nonempty > 300);
    CHECK(changed > 300);
}

TEST_CASE("next-page detection") {
    auto doc = dom::parse_document("<div><a href='/p?2'>next page</a></div>");
    CHECK(find_next_page(*doc)->str() == "div>a");
    CHECK_FALSE(find_next_page(*dom::parse_document("<p>nothing here</p><a href=/x>about</a>")));

    auto both = dom::parse_document(
        "<div><span>1</span><a href='?p=2'>2</a><a href='?p=3'>3</a><a href='?p=4'>4</a><a href='?p=5'>5</a>"
        "<a href='?p=2'>Next</a></div>");
    CHECK(find_next_page(*both)->str() == "div>a:nth-child(6)");

    auto numerals = dom::parse_document(
        "<table><tr><td>10</td><td>11</td></tr></table>"
        "<div><a href='?p=1'>1</a><b>2</b><a href='?p=3'>3</a><a href='?p=4'>4</a></div>");
    CHECK(find_next_page(*numerals)->str() == "div:nth-child(2)>a:nth-child(3)");

    auto rel = dom::parse_document("<nav><a href='?p=9' rel=next>more</a></nav>");
    CHECK(find_next_page(*rel)->str() == "nav>a");

    auto last_only = dom::parse_document("<div><span>5</span><a href='?p=5'>last page</a><a href='#'>next</a>"
                                         "<a href='javascript:go()'>next page</a></div>");
    CHECK_FALSE(find_next_page(*last_only));

    auto custom = fs::temp_directory_path() / ("webwrap_lexicon_" + std::to_string(::getpid()));
    std::ofstream(custom) << "# words\nweiter\nlast: ende\n";
    auto lex = PaginationLexicon::from_file(custom.string());
    CHECK(lex.next == std::vector<std::string>{"weiter"});
    CHECK(lex.last == std::vector<std::string>{"ende"});
    auto german = dom::parse_document("<div><a href='?p=2'>Weiter</a></div>");
    CHECK(find_next_page(*german, lex));
    CHECK_FALSE(find_next_page(*doc, lex));
    fs::remove(custom);
}

TEST_CASE("page budget on the chained fixture") {
    api::Config c;
    c.store_dir = fs::temp_directory_path() / ("webwrap_test_budget_" + std::to_string(::getpid()));
    c.fixtures_dir = WEBWRAP_FIXTURES;
    fs::remove_all(c.store_dir);
    api::Api a(c);
    auto def = a.complete_draft(testing::paged_draft());

    auto markers = [](const Json& out) {
        std::vector<std::string> m;
        for (const auto& r : out["blocks"]["rows"]) m.push_back(r["marker"].get<std::string>());
        return m;
    };
    for (int budget : {1, 3, 5, 9}) {
        provider::FixtureProvider p(WEBWRAP_FIXTURES);
        auto out = invoke(def, {{"__max_page", std::to_string(budget)}}, p);
        int pages = std::min(budget, 5);
        CHECK(p.fetch_count() == pages);
        CHECK(out["pages_fetched"] == pages);
        std::vector<std::string> expected;
        for (int k = 1; k <= pages; ++k) {
            for (int j = 1; j <= 4; ++j) expected.push_back("p" + std::to_string(k) + "-r" + std::to_string(j));
        }
        CHECK(markers(out) == expected);
    }
    provider::FixtureProvider p(WEBWRAP_FIXTURES);
    auto out = invoke(def, {}, p);
    CHECK(p.fetch_count() == 1);
    CHECK(p.fetch_log().size() == 1);
    fs::remove_all(c.store_dir);
}

TEST_CASE("earthquake invocation") {
    api::Config c;
    c.store_dir = fs::temp_directory_path() / ("webwrap_test_quake_" + std::to_string(::getpid()));
    c.fixtures_dir = WEBWRAP_FIXTURES;
    fs::remove_all(c.store_dir);
    api::Api a(c);
    auto def = a.complete_draft(testing::quake_draft());
    def.api_key = "a1f6de13";

    provider::FixtureProvider p(WEBWRAP_FIXTURES);
    auto generation = invoke(def, {{"key", "a1f6de13"}}, p);
    CHECK(generation["blocks"]["earthquakes"].size() == 12);

    auto query = api::parse_query("start_time=2019-01-01&end_time=2019-01-18&Magnitude=20&key=a1f6de13");
    auto all = invoke(def, {query[0], query[1], query[3]}, p);
    CHECK(all["blocks"]["earthquakes"].size() == 10);
    auto filtered = invoke(def, query, p);
    REQUIRE(filtered["blocks"]["earthquakes"].size() == 2);
    for (const auto& r : filtered["blocks"]["earthquakes"]) CHECK(r["Magnitude"] == "20");
    // determinism
    CHECK(invoke(def, query, p).dump() == filtered.dump());
    CHECK_THROWS_AS(invoke(def, {query[0], query[1]}, p), AuthorizationError);
    fs::remove_all(c.store_dir);
}

TEST_CASE("douban invocation returns the three groups") {
    api::Config c;
    c.store_dir = fs::temp_directory_path() / ("webwrap_test_douban_" + std::to_string(::getpid()));
    c.fixtures_dir = WEBWRAP_FIXTURES;
    fs::remove_all(c.store_dir);
    api::Api a(c);
    auto def = a.complete_draft(testing::douban_draft());
    provider::FixtureProvider p(WEBWRAP_FIXTURES);
    auto out = invoke(def, {{"unknown", "1"}}, p);
    CHECK(out["blocks"].size() == 3);
    CHECK(out["blocks"]["new_movies"].size() == 8);
    CHECK(out["blocks"]["weekly"].size() == 10);
    CHECK(out["blocks"]["box_office"].size() == 5);
    CHECK(out["blocks"]["new_movies"][0]["title"]["title_text"] == "Wandering Earth");
    CHECK(out["dropped_params"] == Json::array({"unknown"}));
    fs::remove_all(c.store_dir);
}

TEST_CASE("a vanished block is a partial-result error") {
    MapProvider p;
    auto def = static_service(p, "http://shop.test/", kFlat);
    p.pages["http://shop.test/"] = "<html><body><p>maintenance</p></body></html>";
    try {
        invoke(def, {}, p);
        FAIL("expected partial result");
    } catch (const PartialResultError& e) {
        CHECK(e.pages_succeeded() == 0);
        CHECK(e.details().at(0) == "items");
    }
    MapProvider down;
    def.source_url = "http://down.test/";
    CHECK_THROWS_AS(invoke(def, {}, down), FixtureNotFoundError);
}
