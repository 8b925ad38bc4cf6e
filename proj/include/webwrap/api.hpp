#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>

#include "webwrap/error.hpp"
#include "webwrap/invoker.hpp"
#include "webwrap/json.hpp"
#include "webwrap/provider.hpp"
#include "webwrap/registry.hpp"

namespace webwrap::api {

struct Config {
    std::filesystem::path store_dir = "webwrap-store";
    // Serve pages from a fixture corpus instead of the network.
    std::optional<std::filesystem::path> fixtures_dir;
    std::string base_url = "http://localhost";
    invoker::PaginationLexicon lexicon = invoker::PaginationLexicon::defaults();
    int first_id = 1;
    provider::LiveOptions live;
};

struct Response {
    int status = 200;
    std::string body;
};

// Shared by the HTTP routes and the CLI so both emit identical bodies.
class Api {
public:
    explicit Api(Config config);

    // {source: url | {html, url?}}
    Json analyze(const Json& body);
    // {source, form_choice?: {form, button?}, field_values?, top_n?}
    Json segment(const Json& body);
    // Draft -> {id, api_url, api_key}. See complete_draft for the accepted shapes.
    Json create(const Json& body);
    Json get(int id) const;
    Json list() const;
    Json update(int id, const Json& patch);
    Json remove(int id);
    Json call(int id, const invoker::Query& query);

    // Turns a wizard draft into a full definition: resolves form_choice into
    // form_analysis and field bindings, and generates rules and field names
    // for blocks given by parent_selector.
    registry::ServiceDefinition complete_draft(const Json& draft);

    std::unique_ptr<provider::PageProvider> make_provider() const;
    const Config& config() const { return config_; }
    registry::Registry& store() { return *registry_; }

private:
    dom::DocumentPtr load_source(const Json& source, provider::PageProvider& p) const;
    std::string api_url(int id) const;

    Config config_;
    std::unique_ptr<registry::Registry> registry_;
};

int status_for(const Error& e);
Json error_json(const Error& e);
// Pretty-printed with a trailing newline; invalid UTF-8 is replaced.
std::string body(const Json& j);

// Runs `f`, mapping library errors and malformed input to ApiError bodies.
Response respond(const std::function<Json()>& f);

// "a=1&b=x%20y" -> ordered pairs.
invoker::Query parse_query(std::string_view query);

struct ServerOptions {
    std::string host = "0.0.0.0";
    int port = 8080;
};

// Blocks until SIGINT/SIGTERM or `stop`; in-flight requests are drained.
class Server {
public:
    Server(Api& api, ServerOptions options);
    ~Server();
    // Binds and serves on the calling thread. Returns false if binding failed.
    bool run();
    // Binds to an ephemeral port on 127.0.0.1 and serves on a background thread.
    int start_background();
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace webwrap::api
