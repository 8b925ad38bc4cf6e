#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "webwrap/forms.hpp"
#include "webwrap/json.hpp"
#include "webwrap/rules.hpp"
#include "webwrap/segment.hpp"

namespace webwrap::registry {

inline constexpr int kSchemaVersion = 1;

// Parameter names the invoker consumes itself.
bool is_reserved_param(std::string_view name);

struct ServiceBlock {
    std::string name;  // key of this block's records in invocation responses
    segment::Block block;
    rules::ExtractionRules rules;
    std::vector<rules::FieldName> field_names;

    std::map<int, std::string> names() const;
    bool operator==(const ServiceBlock&) const = default;
};

struct ServiceDefinition {
    int id = 0;
    std::string name;
    std::string description;
    std::string source_url;
    std::optional<forms::FormAnalysis> form_analysis;  // absent: static page
    std::map<std::string, forms::FieldRecord> field_bindings;
    std::map<std::string, std::string> example_values;
    std::vector<ServiceBlock> blocks;
    std::string api_key;  // empty: public service
    std::string created_at;
    std::string updated_at;

    const forms::FormRecord* bound_form() const;
    bool operator==(const ServiceDefinition&) const = default;
};

// Throws ValidationError whose details name every offending field.
void validate(const ServiceDefinition& def);

struct JsonOptions {
    bool include_key = false;
};

Json to_json(const ServiceBlock& b);
Json to_json(const ServiceDefinition& def, const JsonOptions& options = {});
ServiceBlock service_block_from_json(const Json& j);
// Reads id, api_key and timestamps when present; validation is separate.
ServiceDefinition definition_from_json(const Json& j);

// RFC 7386 merge patch.
Json merge_patch(Json target, const Json& patch);

struct RegistryOptions {
    std::filesystem::path dir;
    int first_id = 1;  // used only when the store is empty
};

// One JSON document per service under <dir>/services plus <dir>/index.json.
// Every write goes to a temporary file that is then renamed into place.
class Registry {
public:
    explicit Registry(RegistryOptions options);

    // Assigns id, key (unless the draft carries one or is marked public by
    // an empty key and `public_service`), and timestamps.
    ServiceDefinition create(ServiceDefinition draft, bool public_service = false);

    // Throws NotFoundError.
    std::shared_ptr<const ServiceDefinition> get(int id) const;
    std::vector<std::shared_ptr<const ServiceDefinition>> list() const;

    // Applies a merge patch to the stored document. id, api_key and
    // created_at cannot be patched.
    ServiceDefinition update(int id, const Json& patch);
    void remove(int id);

    const std::filesystem::path& dir() const { return options_.dir; }
    std::filesystem::path document_path(int id) const;

private:
    using Snapshot = std::map<int, std::shared_ptr<const ServiceDefinition>>;

    void load();
    void write_index(const Snapshot& snap, int next_id) const;
    void publish(std::shared_ptr<const Snapshot> snap);
    std::shared_ptr<const Snapshot> snapshot() const;

    RegistryOptions options_;
    std::mutex writer_;
    mutable std::mutex snapshot_mutex_;
    std::shared_ptr<const Snapshot> snapshot_;
    int next_id_ = 1;
};

std::string generate_key();
std::string utc_timestamp();

}  // namespace webwrap::registry
