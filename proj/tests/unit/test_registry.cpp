#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include "support/drafts.hpp"
#include "webwrap/api.hpp"
#include "webwrap/error.hpp"
#include "webwrap/registry.hpp"

using namespace webwrap;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
    auto dir = fs::temp_directory_path() / ("webwrap_test_registry_" + name + "_" + std::to_string(::getpid()));
    fs::remove_all(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

api::Config config_for(const fs::path& dir, int first_id = 1) {
    api::Config c;
    c.store_dir = dir;
    c.fixtures_dir = WEBWRAP_FIXTURES;
    c.first_id = first_id;
    return c;
}

}  // namespace

TEST_CASE("merge patch follows the RFC examples") {
    struct Case {
        const char* target;
        const char* patch;
        const char* result;
    };
    const Case cases[] = {
        {R"({"a":"b"})", R"({"a":"c"})", R"({"a":"c"})"},
        {R"({"a":"b"})", R"({"b":"c"})", R"({"a":"b","b":"c"})"},
        {R"({"a":"b"})", R"({"a":null})", R"({})"},
        {R"({"a":"b","b":"c"})", R"({"a":null})", R"({"b":"c"})"},
        {R"({"a":["b"]})", R"({"a":"c"})", R"({"a":"c"})"},
        {R"({"a":"c"})", R"({"a":["b"]})", R"({"a":["b"]})"},
        {R"({"a":{"b":"c"}})", R"({"a":{"b":"d","c":null}})", R"({"a":{"b":"d"}})"},
        {R"({"a":[{"b":"c"}]})", R"({"a":[1]})", R"({"a":[1]})"},
        {R"(["a","b"])", R"(["c","d"])", R"(["c","d"])"},
        {R"({"a":"b"})", R"(["c"])", R"(["c"])"},
        {R"({"a":"foo"})", "null", "null"},
        {R"({"a":"foo"})", R"("bar")", R"("bar")"},
        {R"({"e":null})", R"({"a":1})", R"({"e":null,"a":1})"},
        {R"([1,2])", R"({"a":"b","c":null})", R"({"a":"b"})"},
        {R"({})", R"({"a":{"bb":{"ccc":null}}})", R"({"a":{"bb":{}}})"},
    };
    for (const auto& c : cases) {
        CAPTURE(c.patch);
        CHECK(registry::merge_patch(Json::parse(c.target), Json::parse(c.patch)) == Json::parse(c.result));
    }
}

TEST_CASE("earthquake definition gets the case-study address") {
    auto dir = fresh_dir("quake");
    api::Api a(config_for(dir, 78));
    auto created = a.create(testing::quake_draft());
    CHECK(created["id"] == 78);
    CHECK(created["api_url"] == "http://localhost/call_service/78");
    CHECK(created["api_key"] == "a1f6de13");

    auto def = a.store().get(78);
    REQUIRE(def->bound_form());
    CHECK(def->field_bindings.size() == 10);
    CHECK(def->field_bindings.count("start_time"));
    CHECK(def->example_values.at("end_time") == "2019-01-19");
    REQUIRE(def->blocks.size() == 1);
    CHECK(def->blocks[0].field_names.size() == 6);

    auto shown = a.get(78);
    CHECK_FALSE(shown.contains("api_key"));
    CHECK(shown["public"] == false);
    fs::remove_all(dir);
}

TEST_CASE("create then get is a structural round trip") {
    auto dir = fresh_dir("roundtrip");
    api::Api a(config_for(dir));
    auto draft = a.complete_draft(testing::douban_draft());
    auto created = a.store().create(draft, true);
    auto got = a.store().get(created.id);
    CHECK(*got == created);
    CHECK(got->api_key.empty());
    CHECK(registry::definition_from_json(registry::to_json(*got, {.include_key = true})) == created);
    fs::remove_all(dir);
}

TEST_CASE("minimal static definition is created and invocable") {
    auto dir = fresh_dir("static");
    api::Api a(config_for(dir));
    auto created = a.create(testing::paged_draft());
    CHECK(created["api_key"].is_null());
    auto result = a.call(created["id"].get<int>(), {});
    CHECK(result["blocks"]["rows"].size() == 4);
    fs::remove_all(dir);
}

TEST_CASE("validation lists the offending fields") {
    auto dir = fresh_dir("validation");
    registry::Registry r({dir});
    registry::ServiceDefinition def;
    def.source_url = "ftp://nowhere";
    def.field_bindings["key"] = forms::FieldRecord{};
    try {
        r.create(def);
        FAIL("expected validation error");
    } catch (const ValidationError& e) {
        std::set<std::string> fields(e.details().begin(), e.details().end());
        CHECK(fields.count("name"));
        CHECK(fields.count("source_url"));
        CHECK(fields.count("blocks"));
        CHECK(fields.count("field_bindings.key"));
        CHECK(fields.count("field_bindings"));
    }
    CHECK(r.list().empty());

    api::Api a(config_for(dir));
    auto draft = testing::douban_draft();
    draft["blocks"][1]["name"] = "new_movies";
    CHECK_THROWS_AS(a.create(draft), ValidationError);
    draft = testing::douban_draft();
    draft["blocks"][0]["parent_selector"] = "html>body>nav";
    CHECK_THROWS_AS(a.create(draft), ValidationError);
    draft = testing::douban_draft();
    draft["blocks"][0]["rename"] = {{"title_text", "key"}};
    try {
        a.create(draft);
        FAIL("reserved name accepted");
    } catch (const ValidationError& e) {
        CHECK(e.details().at(0) == "blocks[0].field_names");
    }
    fs::remove_all(dir);
}

TEST_CASE("update revalidates and rename reaches invocations") {
    auto dir = fresh_dir("update");
    api::Api a(config_for(dir));
    int id = a.create(testing::paged_draft())["id"];
    auto before = a.call(id, {});
    CHECK(before["blocks"]["rows"][0].contains("marker"));

    auto doc = a.get(id);
    for (auto& n : doc["blocks"][0]["field_names"]) {
        if (n["name"] == "marker") n["name"] = "row_marker";
    }
    a.update(id, {{"blocks", doc["blocks"]}, {"description", "renamed"}});
    auto after = a.call(id, {});
    CHECK(after["blocks"]["rows"][0]["row_marker"] == "p1-r1");
    CHECK_FALSE(after["blocks"]["rows"][0].contains("marker"));
    CHECK(a.get(id)["description"] == "renamed");

    CHECK_THROWS_AS(a.update(id, {{"blocks", Json::array()}}), ValidationError);
    CHECK_THROWS_AS(a.update(id, {{"id", 5}}), ValidationError);
    CHECK(a.get(id)["description"] == "renamed");
    CHECK_THROWS_AS(a.update(4242, {{"name", "x"}}), NotFoundError);
    fs::remove_all(dir);
}

TEST_CASE("delete makes the address not found") {
    auto dir = fresh_dir("delete");
    api::Api a(config_for(dir));
    int id = a.create(testing::paged_draft())["id"];
    a.remove(id);
    CHECK_THROWS_AS(a.call(id, {}), NotFoundError);
    CHECK_THROWS_AS(a.get(id), NotFoundError);
    CHECK_THROWS_AS(a.remove(id), NotFoundError);
    CHECK_FALSE(fs::exists(a.store().document_path(id)));
    // ids are never reused
    CHECK(a.create(testing::paged_draft())["id"] == id + 1);
    fs::remove_all(dir);
}

TEST_CASE("concurrent creates get distinct ids") {
    auto dir = fresh_dir("concurrent");
    api::Api a(config_for(dir));
    auto def = a.complete_draft(testing::paged_draft());
    std::vector<int> ids(50);
    std::vector<std::thread> threads;
    for (int t = 0; t < 50; ++t) {
        threads.emplace_back([&, t] { ids[t] = a.store().create(def, true).id; });
    }
    for (auto& th : threads) th.join();
    std::set<int> unique(ids.begin(), ids.end());
    CHECK(unique.size() == 50);
    registry::Registry reopened({dir});
    CHECK(reopened.list().size() == 50);
    for (int id : ids) CHECK(reopened.get(id)->name == "Paged list");
    fs::remove_all(dir);
}

TEST_CASE("definitions survive a restart byte for byte") {
    auto dir = fresh_dir("durable");
    std::string before_file;
    Json before;
    {
        api::Api a(config_for(dir, 78));
        a.create(testing::quake_draft());
        before_file = slurp(a.store().document_path(78));
        before = registry::to_json(*a.store().get(78), {.include_key = true});
    }
    registry::Registry r({dir});
    CHECK(slurp(r.document_path(78)) == before_file);
    CHECK(registry::to_json(*r.get(78), {.include_key = true}) == before);
    CHECK(r.get(78)->api_key == "a1f6de13");
    CHECK(Json::parse(slurp(dir / "index.json"))["next_id"] == 79);
    // no temporary files left behind
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
        CHECK(e.path().string().find(".tmp.") == std::string::npos);
    }
    fs::remove_all(dir);
}

TEST_CASE("generated keys") {
    auto k = registry::generate_key();
    CHECK(k.size() == 32);
    CHECK(k.find_first_not_of("0123456789abcdef") == std::string::npos);
    CHECK(k != registry::generate_key());
}
