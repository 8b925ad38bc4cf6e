#pragma once

#include <json.hpp>

namespace webwrap {

// Insertion-ordered so emitted documents keep a stable, readable key order.
using Json = nlohmann::ordered_json;

}  // namespace webwrap
