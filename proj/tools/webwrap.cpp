// Command-line front end. Every command prints the same JSON body as the
// matching HTTP route; failures print an error body on stderr and exit 1.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "webwrap/api.hpp"

namespace fs = std::filesystem;
using webwrap::Json;

namespace {

std::string env_or(const char* name, std::string fallback) {
    const char* v = std::getenv(name);
    return v && *v ? std::string(v) : fallback;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw webwrap::BadRequestError("cannot read " + path, {path});
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// A URL stays a URL; an existing file becomes an inline source.
Json source_arg(const std::string& s, const std::string& url) {
    if (s.rfind("http://", 0) == 0 || s.rfind("https://", 0) == 0) return s;
    Json src{{"html", read_file(s)}};
    src["url"] = url.empty() ? "file://" + fs::absolute(s).lexically_normal().string() : url;
    return src;
}

Json pairs_object(const std::vector<std::string>& pairs) {
    Json out = Json::object();
    for (const auto& p : pairs) {
        auto eq = p.find('=');
        if (eq == std::string::npos) throw webwrap::BadRequestError("expected name=value, got '" + p + "'", {p});
        out[p.substr(0, eq)] = p.substr(eq + 1);
    }
    return out;
}

int emit(const webwrap::api::Response& r) {
    if (r.status < 400) {
        std::cout << r.body;
        return 0;
    }
    std::cerr << r.body;
    return 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Turn web pages behind forms into JSON web services."};
    app.require_subcommand(1);

    std::string store = env_or("STORE_DIR", "webwrap-store");
    std::string fixtures = env_or("FIXTURES_DIR", "");
    std::string lexicon = env_or("PAGINATION_LEXICON", "");
    std::string base_url = "http://localhost";
    int first_id = 1;
    bool verbose = false;
    app.add_option("--store", store, "Service store directory (env STORE_DIR)");
    app.add_option("--fixtures", fixtures, "Serve pages from a fixture corpus (env FIXTURES_DIR)");
    app.add_option("--lexicon", lexicon, "Pagination word list file (env PAGINATION_LEXICON)");
    app.add_option("--base-url", base_url, "Base of generated API addresses");
    app.add_option("--first-id", first_id, "First id handed out by an empty store");
    app.add_flag("-v,--verbose", verbose, "Log progress to stderr");

    std::string source, source_url;
    auto* analyze = app.add_subcommand("analyze", "List the forms, fields and query buttons of a page");
    analyze->add_option("source", source, "URL or HTML file")->required();
    analyze->add_option("--url", source_url, "Base URL for a file source");

    int form = -1, button = -1, top_n = 10;
    std::vector<std::string> values;
    auto* seg = app.add_subcommand("segment", "Rank the repeated-structure blocks of a (result) page");
    seg->add_option("source", source, "URL or HTML file")->required();
    seg->add_option("--url", source_url, "Base URL for a file source");
    seg->add_option("--form", form, "Submit this form first");
    seg->add_option("--button", button, "Query button of that form");
    seg->add_option("--values", values, "Field values as name=value");
    seg->add_option("--top-n", top_n, "Blocks to report");

    std::string file;
    auto* create = app.add_subcommand("create", "Create a service from a draft JSON document");
    create->add_option("definition", file, "Draft file ('-' for stdin)")->required();

    int port = std::atoi(env_or("PORT", "8080").c_str());
    std::string host = "0.0.0.0";
    auto* serve = app.add_subcommand("serve", "Run the HTTP API");
    serve->add_option("--port", port, "Port (env PORT)");
    serve->add_option("--host", host, "Address to bind");

    int id = 0;
    std::vector<std::string> params;
    auto* invoke = app.add_subcommand("invoke", "Call a service like GET /call_service/{id}");
    invoke->add_option("id", id)->required();
    invoke->add_option("params", params, "Query parameters as name=value");

    auto* get = app.add_subcommand("get", "Show a service definition");
    get->add_option("id", id)->required();
    auto* list = app.add_subcommand("list", "List services");
    auto* update = app.add_subcommand("update", "Apply a JSON merge patch to a service");
    update->add_option("id", id)->required();
    update->add_option("patch", file, "Patch file ('-' for stdin)")->required();
    auto* del = app.add_subcommand("delete", "Delete a service");
    del->add_option("id", id)->required();

    CLI11_PARSE(app, argc, argv);
    spdlog::set_default_logger(spdlog::stderr_color_mt("webwrap"));
    spdlog::set_level(verbose ? spdlog::level::info : spdlog::level::err);

    auto fail = [](const std::function<Json()>& f) { return emit(webwrap::api::respond(f)); };
    auto read_json = [&](const std::string& path) {
        if (path == "-") {
            std::ostringstream ss;
            ss << std::cin.rdbuf();
            return Json::parse(ss.str());
        }
        return Json::parse(read_file(path));
    };

    std::unique_ptr<webwrap::api::Api> api;
    auto setup = webwrap::api::respond([&] {
        webwrap::api::Config config;
        config.store_dir = store;
        if (!fixtures.empty()) config.fixtures_dir = fixtures;
        if (!lexicon.empty()) config.lexicon = webwrap::invoker::PaginationLexicon::from_file(lexicon);
        config.base_url = base_url;
        config.first_id = first_id;
        api = std::make_unique<webwrap::api::Api>(config);
        return Json();
    });
    if (!api) return emit(setup);

    if (*analyze) return fail([&] { return api->analyze({{"source", source_arg(source, source_url)}}); });
    if (*seg) {
        return fail([&] {
            Json body{{"source", source_arg(source, source_url)}};
            if (form >= 0) {
                body["form_choice"] = {{"form", form}};
                if (button >= 0) body["form_choice"]["button"] = button;
                body["field_values"] = pairs_object(values);
            }
            body["top_n"] = top_n;
            return api->segment(body);
        });
    }
    if (*create) return fail([&] { return api->create(read_json(file)); });
    if (*invoke) {
        return fail([&] {
            webwrap::invoker::Query query;
            for (const auto& p : params) {
                auto eq = p.find('=');
                if (eq == std::string::npos) query.emplace_back(p, "");
                else query.emplace_back(p.substr(0, eq), p.substr(eq + 1));
            }
            return api->call(id, query);
        });
    }
    if (*get) return fail([&] { return api->get(id); });
    if (*list) return fail([&] { return api->list(); });
    if (*update) return fail([&] { return api->update(id, read_json(file)); });
    if (*del) return fail([&] { return api->remove(id); });
    if (*serve) {
        spdlog::set_level(spdlog::level::info);
        webwrap::api::Server server(*api, {host, port});
        if (!server.run()) {
            std::cerr << webwrap::api::body(webwrap::api::error_json(
                webwrap::Error("bind_failed", "cannot listen on " + host + ":" + std::to_string(port))));
            return 1;
        }
        return 0;
    }
    return 0;
}
