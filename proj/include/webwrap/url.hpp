#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace webwrap::url {

// Resolves `ref` against `base` (RFC 3986 reference resolution). An empty base
// returns `ref` unchanged.
std::string resolve(std::string_view base, std::string_view ref);

// Lowercases scheme and host, drops the fragment, and defaults an empty path
// to "/" for hierarchical http(s) urls.
std::string normalize(std::string_view u);

// application/x-www-form-urlencoded component encoding (space -> '+').
std::string form_encode(std::string_view s);
std::string form_decode(std::string_view s);

std::string encode_query(const std::vector<std::pair<std::string, std::string>>& fields);

// Appends encoded fields to the query part of `u`, keeping any fragment out.
std::string with_query(std::string_view u, const std::vector<std::pair<std::string, std::string>>& fields);

struct Parts {
    std::string scheme;
    std::string authority;
    std::string path;
    std::string query;
    std::string fragment;
    bool has_authority = false;
    bool has_query = false;
    bool has_fragment = false;
};

Parts split(std::string_view u);
std::string join(const Parts& p);

}  // namespace webwrap::url
