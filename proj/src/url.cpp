#include "webwrap/url.hpp"

#include <algorithm>
#include <cctype>

namespace webwrap::url {

namespace {

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    return s;
}

std::string remove_dot_segments(std::string_view in) {
    std::string input(in);
    std::string out;
    while (!input.empty()) {
        if (input.rfind("../", 0) == 0) {
            input.erase(0, 3);
        } else if (input.rfind("./", 0) == 0) {
            input.erase(0, 2);
        } else if (input.rfind("/./", 0) == 0) {
            input.replace(0, 3, "/");
        } else if (input == "/.") {
            input = "/";
        } else if (input.rfind("/../", 0) == 0 || input == "/..") {
            input = input.size() == 3 ? "/" : input.substr(3);
            auto slash = out.rfind('/');
            out.erase(slash == std::string::npos ? 0 : slash);
        } else if (input == "." || input == "..") {
            input.clear();
        } else {
            std::size_t start = input[0] == '/' ? 1 : 0;
            std::size_t next = input.find('/', start);
            if (next == std::string::npos) next = input.size();
            out += input.substr(0, next);
            input.erase(0, next);
        }
    }
    return out;
}

std::string merge_paths(const Parts& base, std::string_view ref_path) {
    if (base.has_authority && base.path.empty()) return "/" + std::string(ref_path);
    auto slash = base.path.rfind('/');
    if (slash == std::string::npos) return std::string(ref_path);
    return base.path.substr(0, slash + 1) + std::string(ref_path);
}

}  // namespace

Parts split(std::string_view u) {
    Parts p;
    std::string_view rest = u;
    // scheme
    auto colon = rest.find(':');
    if (colon != std::string_view::npos && colon > 0 && std::isalpha(static_cast<unsigned char>(rest[0]))) {
        bool ok = std::all_of(rest.begin(), rest.begin() + colon, [](char c) {
            return std::isalnum(static_cast<unsigned char>(c)) || c == '+' || c == '-' || c == '.';
        });
        auto first_delim = rest.find_first_of("/?#");
        if (ok && (first_delim == std::string_view::npos || colon < first_delim)) {
            p.scheme = std::string(rest.substr(0, colon));
            rest.remove_prefix(colon + 1);
        }
    }
    if (auto hash = rest.find('#'); hash != std::string_view::npos) {
        p.fragment = std::string(rest.substr(hash + 1));
        p.has_fragment = true;
        rest = rest.substr(0, hash);
    }
    if (auto q = rest.find('?'); q != std::string_view::npos) {
        p.query = std::string(rest.substr(q + 1));
        p.has_query = true;
        rest = rest.substr(0, q);
    }
    if (rest.rfind("//", 0) == 0) {
        rest.remove_prefix(2);
        auto slash = rest.find('/');
        p.authority = std::string(rest.substr(0, slash));
        p.has_authority = true;
        rest = slash == std::string_view::npos ? std::string_view{} : rest.substr(slash);
    }
    p.path = std::string(rest);
    return p;
}

std::string join(const Parts& p) {
    std::string out;
    if (!p.scheme.empty()) out += p.scheme + ":";
    if (p.has_authority) out += "//" + p.authority;
    out += p.path;
    if (p.has_query) out += "?" + p.query;
    if (p.has_fragment) out += "#" + p.fragment;
    return out;
}

std::string resolve(std::string_view base, std::string_view ref) {
    // Trim surrounding whitespace the way browsers do for attribute urls.
    while (!ref.empty() && std::isspace(static_cast<unsigned char>(ref.front()))) ref.remove_prefix(1);
    while (!ref.empty() && std::isspace(static_cast<unsigned char>(ref.back()))) ref.remove_suffix(1);
    if (base.empty()) return std::string(ref);

    Parts r = split(ref);
    Parts b = split(base);
    Parts t;
    if (!r.scheme.empty()) {
        t = r;
        t.path = remove_dot_segments(r.path);
    } else {
        if (r.has_authority) {
            t.authority = r.authority;
            t.has_authority = true;
            t.path = remove_dot_segments(r.path);
            t.query = r.query;
            t.has_query = r.has_query;
        } else {
            if (r.path.empty()) {
                t.path = b.path;
                t.query = r.has_query ? r.query : b.query;
                t.has_query = r.has_query || b.has_query;
            } else {
                t.path = r.path[0] == '/' ? remove_dot_segments(r.path) : remove_dot_segments(merge_paths(b, r.path));
                t.query = r.query;
                t.has_query = r.has_query;
            }
            t.authority = b.authority;
            t.has_authority = b.has_authority;
        }
        t.scheme = b.scheme;
    }
    t.fragment = r.fragment;
    t.has_fragment = r.has_fragment;
    return join(t);
}

std::string normalize(std::string_view u) {
    Parts p = split(u);
    p.scheme = lower(p.scheme);
    p.authority = lower(p.authority);
    p.has_fragment = false;
    p.fragment.clear();
    if ((p.scheme == "http" || p.scheme == "https") && p.has_authority && p.path.empty()) p.path = "/";
    return join(p);
}

std::string form_encode(std::string_view s) {
    static const char* hex = "0123456789ABCDEF";
    std::string out;
    for (unsigned char c : s) {
        if (std::isalnum(c) || c == '-' || c == '_' || c == '.' || c == '*') {
            out += static_cast<char>(c);
        } else if (c == ' ') {
            out += '+';
        } else {
            out += '%';
            out += hex[c >> 4];
            out += hex[c & 15];
        }
    }
    return out;
}

std::string form_decode(std::string_view s) {
    std::string out;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '+') {
            out += ' ';
        } else if (s[i] == '%' && i + 2 < s.size() &&
                   std::isxdigit(static_cast<unsigned char>(s[i + 1])) &&
                   std::isxdigit(static_cast<unsigned char>(s[i + 2]))) {
            out += static_cast<char>(std::stoi(std::string(s.substr(i + 1, 2)), nullptr, 16));
            i += 2;
        } else {
            out += s[i];
        }
    }
    return out;
}

std::string encode_query(const std::vector<std::pair<std::string, std::string>>& fields) {
    std::string out;
    for (const auto& [name, value] : fields) {
        if (!out.empty()) out += '&';
        out += form_encode(name) + "=" + form_encode(value);
    }
    return out;
}

std::string with_query(std::string_view u, const std::vector<std::pair<std::string, std::string>>& fields) {
    Parts p = split(u);
    p.has_fragment = false;
    p.fragment.clear();
    if (fields.empty()) return join(p);
    std::string q = encode_query(fields);
    p.query = p.has_query && !p.query.empty() ? p.query + "&" + q : q;
    p.has_query = true;
    return join(p);
}

}  // namespace webwrap::url
