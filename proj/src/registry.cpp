#include "webwrap/registry.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <atomic>
#include <chrono>
#include <ctime>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include <spdlog/spdlog.h>

#include "webwrap/error.hpp"

namespace webwrap::registry {

namespace fs = std::filesystem;

bool is_reserved_param(std::string_view name) { return name == "key" || name == "__max_page"; }

std::map<int, std::string> ServiceBlock::names() const {
    std::map<int, std::string> out;
    for (const auto& n : field_names) out[n.field_id] = n.name;
    return out;
}

const forms::FormRecord* ServiceDefinition::bound_form() const {
    return form_analysis ? form_analysis->main_form() : nullptr;
}

namespace {

std::string block_label(std::size_t i) { return "blocks[" + std::to_string(i) + "]"; }

bool usable_name(const std::string& name) {
    return !name.empty() && rules::sanitize_name(name) == name && !is_reserved_param(name);
}

std::string str_field(const Json& j, const char* key, bool required = false) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) {
        if (required) throw ValidationError(std::string("'") + key + "' is required", {key});
        return {};
    }
    if (!it->is_string()) throw ValidationError(std::string("'") + key + "' must be a string", {key});
    return it->get<std::string>();
}

std::map<std::string, std::string> string_map(const Json& j, const char* key) {
    std::map<std::string, std::string> out;
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return out;
    if (!it->is_object()) throw ValidationError(std::string("'") + key + "' must be an object", {key});
    for (const auto& [k, v] : it->items()) {
        if (!v.is_string()) throw ValidationError(std::string("'") + key + "." + k + "' must be a string", {key + ("." + k)});
        out[k] = v.get<std::string>();
    }
    return out;
}

void write_atomically(const fs::path& path, const std::string& content) {
    static std::atomic<unsigned> counter{0};
    fs::path tmp = path;
    tmp += ".tmp." + std::to_string(::getpid()) + "." + std::to_string(counter++);
    int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
    if (fd < 0) throw StorageError("cannot write " + tmp.string());
    std::size_t off = 0;
    while (off < content.size()) {
        ssize_t n = ::write(fd, content.data() + off, content.size() - off);
        if (n < 0) {
            ::close(fd);
            throw StorageError("write failed for " + tmp.string());
        }
        off += static_cast<std::size_t>(n);
    }
    ::fsync(fd);
    ::close(fd);
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) throw StorageError("cannot rename " + tmp.string() + ": " + ec.message());
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw StorageError("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

void validate(const ServiceDefinition& def) {
    std::vector<std::string> bad;
    if (def.name.empty()) bad.push_back("name");
    if (def.source_url.rfind("http://", 0) != 0 && def.source_url.rfind("https://", 0) != 0) bad.push_back("source_url");

    const forms::FormRecord* form = nullptr;
    if (def.form_analysis) {
        form = def.bound_form();
        if (!form || !form->main_btn_index || *form->main_btn_index < 0 ||
            *form->main_btn_index >= static_cast<int>(form->query_button_list.size())) {
            bad.push_back("form_analysis");
            form = nullptr;
        }
    }

    for (const auto& [param, field] : def.field_bindings) {
        bool ok = usable_name(param) && form;
        if (ok) {
            ok = false;
            for (const auto& f : form->input_list) ok = ok || (f.selector == field.selector && f.name == field.name);
        }
        if (!ok) bad.push_back("field_bindings." + param);
    }
    if (!def.field_bindings.empty() && !def.form_analysis) bad.push_back("field_bindings");
    for (const auto& [param, value] : def.example_values) {
        if (!def.field_bindings.count(param)) bad.push_back("example_values." + param);
    }

    if (def.blocks.empty()) bad.push_back("blocks");
    std::set<std::string> block_names;
    for (std::size_t i = 0; i < def.blocks.size(); ++i) {
        const auto& b = def.blocks[i];
        if (b.name.empty() || !block_names.insert(b.name).second) bad.push_back(block_label(i) + ".name");
        if (b.rules.empty()) bad.push_back(block_label(i) + ".rules");
        auto ids = b.rules.ids();
        std::set<int> id_set(ids.begin(), ids.end());
        std::set<int> named;
        std::set<std::string> names;
        bool names_ok = b.field_names.size() == ids.size();
        for (const auto& n : b.field_names) {
            names_ok = names_ok && id_set.count(n.field_id) && named.insert(n.field_id).second &&
                       usable_name(n.name) && names.insert(n.name).second && !def.field_bindings.count(n.name);
        }
        if (!names_ok) bad.push_back(block_label(i) + ".field_names");
    }
    if (!bad.empty()) throw ValidationError("invalid service definition", bad);
}

Json to_json(const ServiceBlock& b) {
    Json names = Json::array();
    for (const auto& n : b.field_names) names.push_back(rules::to_json(n));
    return {{"name", b.name}, {"block", segment::to_json(b.block)}, {"rules", rules::to_json(b.rules)},
            {"field_names", names}};
}

Json to_json(const ServiceDefinition& def, const JsonOptions& options) {
    Json j;
    j["schema_version"] = kSchemaVersion;
    j["id"] = def.id;
    j["name"] = def.name;
    j["description"] = def.description;
    j["source_url"] = def.source_url;
    j["form_analysis"] = def.form_analysis ? forms::to_json(*def.form_analysis) : Json(nullptr);
    Json bindings = Json::object();
    for (const auto& [p, f] : def.field_bindings) bindings[p] = forms::to_json(f);
    j["field_bindings"] = bindings;
    Json examples = Json::object();
    for (const auto& [p, v] : def.example_values) examples[p] = v;
    j["example_values"] = examples;
    Json blocks = Json::array();
    for (const auto& b : def.blocks) blocks.push_back(to_json(b));
    j["blocks"] = blocks;
    j["public"] = def.api_key.empty();
    if (options.include_key) j["api_key"] = def.api_key;
    j["created_at"] = def.created_at;
    j["updated_at"] = def.updated_at;
    return j;
}

ServiceBlock service_block_from_json(const Json& j) {
    if (!j.is_object()) throw ValidationError("block entry must be an object", {"blocks"});
    ServiceBlock b;
    b.name = str_field(j, "name");
    if (!j.contains("block")) throw ValidationError("block entry needs 'block'", {"blocks"});
    b.block = segment::block_from_json(j["block"]);
    if (!j.contains("rules")) throw ValidationError("block entry needs 'rules'", {"blocks"});
    b.rules = rules::rules_from_json(j["rules"]);
    if (j.contains("field_names")) {
        if (!j["field_names"].is_array()) throw ValidationError("'field_names' must be an array", {"blocks"});
        for (const auto& n : j["field_names"]) b.field_names.push_back(rules::field_name_from_json(n));
    }
    return b;
}

ServiceDefinition definition_from_json(const Json& j) {
    if (!j.is_object()) throw ValidationError("service definition must be an object");
    ServiceDefinition d;
    if (j.contains("id") && !j["id"].is_null()) {
        if (!j["id"].is_number_integer()) throw ValidationError("'id' must be an integer", {"id"});
        d.id = j["id"].get<int>();
    }
    d.name = str_field(j, "name");
    d.description = str_field(j, "description");
    d.source_url = str_field(j, "source_url");
    if (j.contains("form_analysis") && !j["form_analysis"].is_null()) {
        d.form_analysis = forms::form_analysis_from_json(j["form_analysis"]);
    }
    if (j.contains("field_bindings") && !j["field_bindings"].is_null()) {
        if (!j["field_bindings"].is_object()) throw ValidationError("'field_bindings' must be an object", {"field_bindings"});
        for (const auto& [p, f] : j["field_bindings"].items()) d.field_bindings[p] = forms::field_from_json(f);
    }
    d.example_values = string_map(j, "example_values");
    if (j.contains("blocks") && !j["blocks"].is_null()) {
        if (!j["blocks"].is_array()) throw ValidationError("'blocks' must be an array", {"blocks"});
        for (const auto& b : j["blocks"]) d.blocks.push_back(service_block_from_json(b));
    }
    d.api_key = str_field(j, "api_key");
    d.created_at = str_field(j, "created_at");
    d.updated_at = str_field(j, "updated_at");
    return d;
}

Json merge_patch(Json target, const Json& patch) {
    if (!patch.is_object()) return patch;
    if (!target.is_object()) target = Json::object();
    for (const auto& [k, v] : patch.items()) {
        if (v.is_null()) {
            target.erase(k);
        } else {
            target[k] = merge_patch(target.contains(k) ? target[k] : Json(nullptr), v);
        }
    }
    return target;
}

std::string generate_key() {
    std::random_device rd;
    std::string out;
    static const char* hex = "0123456789abcdef";
    for (int i = 0; i < 4; ++i) {
        std::uint32_t w = rd();
        for (int s = 28; s >= 0; s -= 4) out.push_back(hex[(w >> s) & 0xf]);
    }
    return out;
}

std::string utc_timestamp() {
    auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

Registry::Registry(RegistryOptions options) : options_(std::move(options)) {
    std::error_code ec;
    fs::create_directories(options_.dir / "services", ec);
    if (ec) throw StorageError("cannot create store " + options_.dir.string() + ": " + ec.message());
    next_id_ = std::max(1, options_.first_id);
    load();
}

fs::path Registry::document_path(int id) const { return options_.dir / "services" / (std::to_string(id) + ".json"); }

void Registry::load() {
    auto snap = std::make_shared<Snapshot>();
    for (const auto& entry : fs::directory_iterator(options_.dir / "services")) {
        if (entry.path().extension() != ".json") continue;
        try {
            auto def = definition_from_json(Json::parse(read_file(entry.path())));
            (*snap)[def.id] = std::make_shared<const ServiceDefinition>(std::move(def));
        } catch (const std::exception& e) {
            spdlog::warn("skipping unreadable service document {}: {}", entry.path().string(), e.what());
        }
    }
    fs::path index = options_.dir / "index.json";
    if (fs::exists(index)) {
        try {
            auto j = Json::parse(read_file(index));
            next_id_ = std::max(next_id_, j.value("next_id", 1));
        } catch (const std::exception& e) {
            spdlog::warn("ignoring unreadable index {}: {}", index.string(), e.what());
        }
    }
    if (!snap->empty()) next_id_ = std::max(next_id_, snap->rbegin()->first + 1);
    publish(std::move(snap));
}

void Registry::write_index(const Snapshot& snap, int next_id) const {
    Json ids = Json::array();
    for (const auto& [id, def] : snap) ids.push_back(id);
    Json j{{"schema_version", kSchemaVersion}, {"next_id", next_id}, {"ids", ids}};
    write_atomically(options_.dir / "index.json", j.dump(2) + "\n");
}

void Registry::publish(std::shared_ptr<const Snapshot> snap) {
    std::lock_guard lock(snapshot_mutex_);
    snapshot_ = std::move(snap);
}

std::shared_ptr<const Registry::Snapshot> Registry::snapshot() const {
    std::lock_guard lock(snapshot_mutex_);
    return snapshot_;
}

ServiceDefinition Registry::create(ServiceDefinition draft, bool public_service) {
    std::lock_guard lock(writer_);
    if (draft.api_key.empty() && !public_service) draft.api_key = generate_key();
    draft.id = next_id_;
    draft.created_at = draft.updated_at = utc_timestamp();
    validate(draft);
    write_atomically(document_path(draft.id), to_json(draft, {.include_key = true}).dump(2) + "\n");
    auto snap = std::make_shared<Snapshot>(*snapshot());
    (*snap)[draft.id] = std::make_shared<const ServiceDefinition>(draft);
    ++next_id_;
    write_index(*snap, next_id_);
    publish(std::move(snap));
    return draft;
}

std::shared_ptr<const ServiceDefinition> Registry::get(int id) const {
    auto snap = snapshot();
    auto it = snap->find(id);
    if (it == snap->end()) throw NotFoundError("no service with id " + std::to_string(id), {std::to_string(id)});
    return it->second;
}

std::vector<std::shared_ptr<const ServiceDefinition>> Registry::list() const {
    std::vector<std::shared_ptr<const ServiceDefinition>> out;
    for (const auto& [id, def] : *snapshot()) out.push_back(def);
    return out;
}

ServiceDefinition Registry::update(int id, const Json& patch) {
    std::lock_guard lock(writer_);
    auto current = get(id);
    if (!patch.is_object()) throw ValidationError("patch must be a JSON object");
    std::vector<std::string> immutable;
    for (const char* key : {"id", "api_key", "created_at", "updated_at", "schema_version", "public"}) {
        if (patch.contains(key)) immutable.push_back(key);
    }
    if (!immutable.empty()) throw ValidationError("fields cannot be patched", immutable);
    auto merged = merge_patch(to_json(*current), patch);
    auto def = definition_from_json(merged);
    def.id = current->id;
    def.api_key = current->api_key;
    def.created_at = current->created_at;
    def.updated_at = utc_timestamp();
    validate(def);
    write_atomically(document_path(id), to_json(def, {.include_key = true}).dump(2) + "\n");
    auto snap = std::make_shared<Snapshot>(*snapshot());
    (*snap)[id] = std::make_shared<const ServiceDefinition>(def);
    publish(std::move(snap));
    return def;
}

void Registry::remove(int id) {
    std::lock_guard lock(writer_);
    get(id);
    std::error_code ec;
    fs::remove(document_path(id), ec);
    if (ec) throw StorageError("cannot delete service " + std::to_string(id) + ": " + ec.message());
    auto snap = std::make_shared<Snapshot>(*snapshot());
    snap->erase(id);
    write_index(*snap, next_id_);
    publish(std::move(snap));
}

}  // namespace webwrap::registry
