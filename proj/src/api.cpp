#include "webwrap/api.hpp"

#include <pthread.h>
#include <signal.h>

#include <set>
#include <thread>

#include <httplib.h>
#include <spdlog/spdlog.h>

#include "webwrap/forms.hpp"
#include "webwrap/rules.hpp"
#include "webwrap/segment.hpp"
#include "webwrap/sorter.hpp"
#include "webwrap/url.hpp"

namespace webwrap::api {

namespace {

constexpr const char* kInlineUrl = "http://inline.invalid/page.html";

int int_field(const Json& j, const char* key, int fallback) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return fallback;
    if (!it->is_number_integer()) throw BadRequestError(std::string("'") + key + "' must be an integer", {key});
    return it->get<int>();
}

std::map<std::string, std::string> string_map(const Json& j, const char* key) {
    std::map<std::string, std::string> out;
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return out;
    if (!it->is_object()) throw BadRequestError(std::string("'") + key + "' must be an object", {key});
    for (const auto& [k, v] : it->items()) {
        if (!v.is_string()) throw BadRequestError(std::string("'") + key + "." + k + "' must be a string", {key});
        out[k] = v.get<std::string>();
    }
    return out;
}

void require_object(const Json& j, const char* what) {
    if (!j.is_object()) throw BadRequestError(std::string(what) + " must be a JSON object");
}

Json field_samples(const dom::Document& doc, const segment::Block& block) {
    Json fields = Json::array();
    try {
        auto rules = rules::generate_rules(doc, block);
        auto names = rules::suggest_field_names(doc, block, rules);
        auto records = rules::extract(doc, segment::locate_sub_blocks(doc, block), rules);
        for (const auto& n : names) {
            Json f = rules::to_json(n);
            std::optional<std::string> sample;
            if (!records.empty()) sample = records.front().at(n.field_id);
            f["sample"] = sample ? Json(*sample) : Json(nullptr);
            fields.push_back(f);
        }
    } catch (const Error& e) {
        spdlog::warn("no field preview for block {}: {}", block.parent_selector.str(), e.what());
    }
    return fields;
}

std::string unique_param(std::string base, const std::map<std::string, forms::FieldRecord>& taken) {
    if (base.empty()) base = "field";
    if (registry::is_reserved_param(base)) base += "_param";
    std::string name = base;
    for (int k = 2; taken.count(name); ++k) name = base + "_" + std::to_string(k);
    return name;
}

}  // namespace

Api::Api(Config config) : config_(std::move(config)) {
    registry_ = std::make_unique<registry::Registry>(registry::RegistryOptions{config_.store_dir, config_.first_id});
}

std::unique_ptr<provider::PageProvider> Api::make_provider() const {
    if (config_.fixtures_dir) return std::make_unique<provider::FixtureProvider>(*config_.fixtures_dir);
    return std::make_unique<provider::LiveProvider>(config_.live);
}

std::string Api::api_url(int id) const {
    std::string base = config_.base_url;
    while (!base.empty() && base.back() == '/') base.pop_back();
    return base + "/call_service/" + std::to_string(id);
}

dom::DocumentPtr Api::load_source(const Json& source, provider::PageProvider& p) const {
    if (source.is_string()) {
        return p.load({source.get<std::string>(), provider::Method::Get, std::nullopt, {}});
    }
    if (source.is_object() && source.contains("html") && source["html"].is_string()) {
        dom::ParseOptions options;
        options.url = source.contains("url") && source["url"].is_string() ? source["url"].get<std::string>() : kInlineUrl;
        options.frame_loader = p.frame_loader();
        return dom::parse_document(source["html"].get<std::string>(), options);
    }
    throw BadRequestError("'source' must be a URL string or an object with 'html'", {"source"});
}

Json Api::analyze(const Json& body) {
    require_object(body, "request body");
    if (!body.contains("source")) throw BadRequestError("'source' is required", {"source"});
    auto p = make_provider();
    auto doc = load_source(body["source"], *p);
    auto analysis = forms::extract_forms(*doc, doc->base_url(doc->root()));
    return {{"form_analysis", forms::to_json(analysis)},
            {"annotated_html", forms::annotate_for_selection(*doc, analysis)}};
}

Json Api::segment(const Json& body) {
    require_object(body, "request body");
    if (!body.contains("source")) throw BadRequestError("'source' is required", {"source"});
    auto p = make_provider();
    auto doc = load_source(body["source"], *p);
    if (body.contains("form_choice") && !body["form_choice"].is_null()) {
        const auto& choice = body["form_choice"];
        require_object(choice, "'form_choice'");
        auto analysis = forms::extract_forms(*doc, doc->base_url(doc->root()));
        int k = int_field(choice, "form", analysis.main_form_index.value_or(0));
        if (k < 0 || k >= static_cast<int>(analysis.forms.size())) {
            throw BadRequestError("form " + std::to_string(k) + " does not exist", {"form_choice.form"});
        }
        const auto& form = analysis.forms[k];
        int b = int_field(choice, "button", form.main_btn_index.value_or(0));
        if (b < 0 || b >= static_cast<int>(form.query_button_list.size())) {
            throw BadRequestError("button " + std::to_string(b) + " does not exist", {"form_choice.button"});
        }
        auto request = provider::make_submission(*doc, form, b, string_map(body, "field_values"));
        doc = p->load(request);
    }
    int top_n = int_field(body, "top_n", sorter::kDefaultTopN);
    auto ranked = sorter::sort_blocks(segment::segment(*doc), top_n);
    Json blocks = Json::array();
    for (const auto& rb : ranked) {
        Json j = sorter::to_json(rb);
        j["fields"] = field_samples(*doc, rb.block);
        blocks.push_back(j);
    }
    return {{"page_url", doc->base_url(doc->root())}, {"blocks", blocks}};
}

registry::ServiceDefinition Api::complete_draft(const Json& draft) {
    require_object(draft, "service draft");
    Json base = draft;
    base.erase("blocks");
    base.erase("id");
    base.erase("created_at");
    base.erase("updated_at");
    base.erase("example_values");
    auto def = registry::definition_from_json(base);

    std::unique_ptr<provider::PageProvider> p;
    auto prov = [&]() -> provider::PageProvider& {
        if (!p) p = make_provider();
        return *p;
    };

    if (!def.form_analysis && draft.contains("form_choice") && !draft["form_choice"].is_null()) {
        const auto& choice = draft["form_choice"];
        require_object(choice, "'form_choice'");
        if (def.source_url.empty()) throw ValidationError("'source_url' is required", {"source_url"});
        auto source = prov().load({def.source_url, provider::Method::Get, std::nullopt, {}});
        auto analysis = forms::extract_forms(*source, def.source_url);
        int k = int_field(choice, "form", analysis.main_form_index.value_or(0));
        if (k < 0 || k >= static_cast<int>(analysis.forms.size())) {
            throw ValidationError("form " + std::to_string(k) + " does not exist", {"form_choice.form"});
        }
        auto& form = analysis.forms[k];
        int b = int_field(choice, "button", form.main_btn_index.value_or(0));
        if (b < 0 || b >= static_cast<int>(form.query_button_list.size())) {
            throw ValidationError("button " + std::to_string(b) + " does not exist", {"form_choice.button"});
        }
        analysis.main_form_index = k;
        form.main_btn_index = b;
        def.form_analysis = analysis;
    }
    if (def.form_analysis && def.field_bindings.empty() && def.bound_form()) {
        for (const auto& f : def.bound_form()->input_list) {
            if (!f.fillable || f.name.empty()) continue;
            def.field_bindings[unique_param(rules::sanitize_name(f.name), def.field_bindings)] = f;
        }
    }
    for (const auto& [key, value] : string_map(draft, "example_values")) {
        std::string param = key;
        if (!def.field_bindings.count(param)) {
            for (const auto& [pname, field] : def.field_bindings) {
                if (field.name == key) param = pname;
            }
        }
        def.example_values[param] = value;
    }

    if (!draft.contains("blocks") || !draft["blocks"].is_array()) {
        throw ValidationError("'blocks' must be a non-empty array", {"blocks"});
    }
    dom::DocumentPtr page;
    std::vector<segment::Block> found;
    std::size_t i = 0;
    for (const auto& entry : draft["blocks"]) {
        std::string label = "blocks[" + std::to_string(i) + "]";
        require_object(entry, label.c_str());
        if (entry.contains("rules") && entry.contains("block") && entry.contains("field_names")) {
            def.blocks.push_back(registry::service_block_from_json(entry));
            ++i;
            continue;
        }
        if (!page) {
            page = invoker::first_result_page(def, {}, prov());
            found = segment::segment(*page);
        }
        registry::ServiceBlock sb;
        sb.name = entry.contains("name") && entry["name"].is_string() ? entry["name"].get<std::string>()
                                                                       : "block_" + std::to_string(i + 1);
        if (entry.contains("block")) {
            sb.block = segment::block_from_json(entry["block"]);
        } else if (entry.contains("parent_selector") && entry["parent_selector"].is_string()) {
            auto wanted = entry["parent_selector"].get<std::string>();
            bool hit = false;
            for (const auto& b : found) {
                if (b.parent_selector.str() == wanted) {
                    sb.block = b;
                    hit = true;
                    break;
                }
            }
            if (!hit) throw ValidationError("no block under '" + wanted + "' on the result page", {label + ".parent_selector"});
        } else {
            throw ValidationError("block entry needs 'parent_selector' or 'block'", {label});
        }
        sb.rules = entry.contains("rules") ? rules::rules_from_json(entry["rules"]) : rules::generate_rules(*page, sb.block);
        sb.field_names = rules::suggest_field_names(*page, sb.block, sb.rules);
        for (const auto& [from, to] : string_map(entry, "rename")) {
            bool hit = false;
            for (auto& n : sb.field_names) {
                if (n.name == from) {
                    n.name = to;
                    hit = true;
                }
            }
            if (!hit) throw ValidationError("no field named '" + from + "'", {label + ".rename." + from});
        }
        def.blocks.push_back(std::move(sb));
        ++i;
    }
    return def;
}

Json Api::create(const Json& body) {
    auto def = complete_draft(body);
    bool public_service = body.is_object() && body.value("public", false) == true;
    auto created = registry_->create(std::move(def), public_service);
    return {{"id", created.id},
            {"api_url", api_url(created.id)},
            {"api_key", created.api_key.empty() ? Json(nullptr) : Json(created.api_key)}};
}

Json Api::get(int id) const {
    Json j = registry::to_json(*registry_->get(id));
    j["api_url"] = api_url(id);
    return j;
}

Json Api::list() const {
    Json arr = Json::array();
    for (const auto& def : registry_->list()) {
        arr.push_back({{"id", def->id},
                       {"name", def->name},
                       {"description", def->description},
                       {"source_url", def->source_url},
                       {"api_url", api_url(def->id)}});
    }
    return {{"services", arr}};
}

Json Api::update(int id, const Json& patch) {
    registry_->update(id, patch);
    return get(id);
}

Json Api::remove(int id) {
    registry_->remove(id);
    return {{"id", id}, {"deleted", true}};
}

Json Api::call(int id, const invoker::Query& query) {
    auto def = registry_->get(id);
    auto p = make_provider();
    invoker::InvokeOptions options;
    options.lexicon = config_.lexicon;
    return invoker::invoke(*def, query, *p, options);
}

int status_for(const Error& e) {
    static const std::map<std::string, int> codes = {
        {"validation_error", 400}, {"bad_request", 400},     {"parameter_error", 400}, {"filter_error", 400},
        {"selector_syntax", 400},  {"empty_rules", 400},     {"alignment_error", 400}, {"decode_error", 400},
        {"resolution_error", 400}, {"frame_error", 400},     {"not_in_document", 400}, {"script_required", 400},
        {"unauthorized", 401},     {"not_found", 404},       {"upstream_error", 502},  {"fixture_not_found", 502},
        {"partial_result", 502},   {"extraction_error", 502}, {"storage_error", 500},
    };
    auto it = codes.find(e.code());
    return it == codes.end() ? 500 : it->second;
}

Json error_json(const Error& e) {
    Json details = Json::array();
    for (const auto& d : e.details()) details.push_back(d);
    Json err{{"code", e.code()}, {"message", e.what()}, {"details", details}};
    if (auto* partial = dynamic_cast<const PartialResultError*>(&e)) err["pages_succeeded"] = partial->pages_succeeded();
    return {{"error", err}};
}

std::string body(const Json& j) { return j.dump(2, ' ', false, Json::error_handler_t::replace) + "\n"; }

Response respond(const std::function<Json()>& f) {
    try {
        return {200, body(f())};
    } catch (const Error& e) {
        return {status_for(e), body(error_json(e))};
    } catch (const Json::exception& e) {
        BadRequestError err(std::string("malformed JSON: ") + e.what());
        return {400, body(error_json(err))};
    } catch (const std::exception& e) {
        Error err("internal_error", e.what());
        return {500, body(error_json(err))};
    }
}

invoker::Query parse_query(std::string_view query) {
    invoker::Query out;
    std::size_t start = 0;
    while (start <= query.size()) {
        auto amp = query.find('&', start);
        auto part = query.substr(start, amp == std::string_view::npos ? std::string_view::npos : amp - start);
        if (!part.empty()) {
            auto eq = part.find('=');
            if (eq == std::string_view::npos) {
                out.emplace_back(url::form_decode(part), "");
            } else {
                out.emplace_back(url::form_decode(part.substr(0, eq)), url::form_decode(part.substr(eq + 1)));
            }
        }
        if (amp == std::string_view::npos) break;
        start = amp + 1;
    }
    return out;
}

struct Server::Impl {
    Api& api;
    ServerOptions options;
    httplib::Server http;
    std::thread background;

    Impl(Api& a, ServerOptions o) : api(a), options(std::move(o)) { routes(); }

    static void send(httplib::Response& res, const Response& r) {
        res.status = r.status;
        res.set_content(r.body, "application/json");
    }

    static int id_of(const httplib::Request& req) {
        try {
            return std::stoi(req.matches[1].str());
        } catch (const std::exception&) {
            throw NotFoundError("no service with id " + req.matches[1].str(), {req.matches[1].str()});
        }
    }

    void routes() {
        http.set_default_headers({{"Access-Control-Allow-Origin", "*"}});
        http.Options(".*", [](const httplib::Request&, httplib::Response& res) {
            res.set_header("Access-Control-Allow-Methods", "GET, POST, PUT, DELETE, OPTIONS");
            res.set_header("Access-Control-Allow-Headers", "Content-Type");
            res.status = 204;
        });
        auto with_body = [](const httplib::Request& req) { return Json::parse(req.body.empty() ? "{}" : req.body); };
        http.Post("/wrappers/analyze", [this, with_body](const httplib::Request& req, httplib::Response& res) {
            send(res, respond([&] { return api.analyze(with_body(req)); }));
        });
        http.Post("/wrappers/segment", [this, with_body](const httplib::Request& req, httplib::Response& res) {
            send(res, respond([&] { return api.segment(with_body(req)); }));
        });
        http.Post("/wrappers", [this, with_body](const httplib::Request& req, httplib::Response& res) {
            auto r = respond([&] { return api.create(with_body(req)); });
            if (r.status == 200) r.status = 201;
            send(res, r);
        });
        http.Get("/wrappers", [this](const httplib::Request&, httplib::Response& res) {
            send(res, respond([&] { return api.list(); }));
        });
        http.Get(R"(/wrappers/(\d+))", [this](const httplib::Request& req, httplib::Response& res) {
            send(res, respond([&] { return api.get(id_of(req)); }));
        });
        http.Put(R"(/wrappers/(\d+))", [this, with_body](const httplib::Request& req, httplib::Response& res) {
            send(res, respond([&] { return api.update(id_of(req), with_body(req)); }));
        });
        http.Delete(R"(/wrappers/(\d+))", [this](const httplib::Request& req, httplib::Response& res) {
            send(res, respond([&] { return api.remove(id_of(req)); }));
        });
        http.Get(R"(/call_service/(\d+))", [this](const httplib::Request& req, httplib::Response& res) {
            send(res, respond([&] {
                     auto q = req.target.find('?');
                     std::string_view query;
                     if (q != std::string::npos) query = std::string_view(req.target).substr(q + 1);
                     return api.call(id_of(req), parse_query(query));
                 }));
        });
        http.set_error_handler([](const httplib::Request& req, httplib::Response& res) {
            if (!res.body.empty()) return;
            Error err(res.status == 404 ? "not_found" : "http_error", "no route for " + req.method + " " + req.path);
            res.set_content(body(error_json(err)), "application/json");
        });
    }
};

Server::Server(Api& api, ServerOptions options) : impl_(std::make_unique<Impl>(api, std::move(options))) {}

Server::~Server() {
    stop();
    if (impl_->background.joinable()) impl_->background.join();
}

bool Server::run() {
    sigset_t set;
    sigemptyset(&set);
    sigaddset(&set, SIGINT);
    sigaddset(&set, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &set, nullptr);  // worker threads inherit the mask
    if (!impl_->http.bind_to_port(impl_->options.host, impl_->options.port)) return false;
    std::thread watcher([this, set] {
        int sig = 0;
        sigwait(&set, &sig);
        impl_->http.stop();
    });
    spdlog::info("listening on {}:{}", impl_->options.host, impl_->options.port);
    bool ok = impl_->http.listen_after_bind();
    pthread_kill(watcher.native_handle(), SIGTERM);
    watcher.join();
    return ok;
}

int Server::start_background() {
    int port = impl_->http.bind_to_any_port("127.0.0.1");
    if (port <= 0) return -1;
    impl_->background = std::thread([this] { impl_->http.listen_after_bind(); });
    impl_->http.wait_until_ready();
    return port;
}

void Server::stop() {
    if (impl_->http.is_running()) impl_->http.stop();
}

}  // namespace webwrap::api
