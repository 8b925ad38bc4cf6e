#include "webwrap/provider.hpp"

#include <algorithm>
#include <cctype>
#include <condition_variable>
#include <fstream>
#include <regex>
#include <sstream>

#include <httplib.h>
#include <spdlog/spdlog.h>

#include "webwrap/error.hpp"
#include "webwrap/json.hpp"
#include "webwrap/url.hpp"

namespace webwrap::provider {

namespace {

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
    return out;
}

std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw FixtureNotFoundError("cannot read fixture file " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// GET submissions replace the action's query with the form fields.
std::string get_url(const PageRequest& r) {
    if (r.method != Method::Get || r.field_values.empty()) return r.url;
    auto parts = url::split(r.url);
    parts.query = url::encode_query(r.field_values);
    parts.has_query = true;
    parts.has_fragment = false;
    parts.fragment.clear();
    return url::join(parts);
}

std::string describe(const PageRequest& r) {
    std::string s = std::string(to_string(r.method)) + " " + r.url;
    if (!r.field_values.empty()) s += " [" + url::encode_query(r.field_values) + "]";
    return s;
}

// Process-wide cap on simultaneous connections to one host.
class HostLimiter {
public:
    class Slot {
    public:
        Slot(HostLimiter& l, std::string host) : l_(l), host_(std::move(host)) {}
        ~Slot() { l_.release(host_); }
        Slot(const Slot&) = delete;
        Slot& operator=(const Slot&) = delete;

    private:
        HostLimiter& l_;
        std::string host_;
    };

    void acquire(const std::string& host, int limit) {
        std::unique_lock lock(m_);
        cv_.wait(lock, [&] { return active_[host] < limit; });
        ++active_[host];
    }

    void release(const std::string& host) {
        {
            std::lock_guard lock(m_);
            --active_[host];
        }
        cv_.notify_all();
    }

    static HostLimiter& instance() {
        static HostLimiter l;
        return l;
    }

private:
    std::mutex m_;
    std::condition_variable cv_;
    std::map<std::string, int> active_;
};

}  // namespace

std::string_view to_string(Method m) { return m == Method::Post ? "POST" : "GET"; }

Method method_from_string(std::string_view s) {
    std::string l = lower(s);
    if (l.empty() || l == "get") return Method::Get;
    if (l == "post") return Method::Post;
    throw ValidationError("unsupported method '" + std::string(s) + "'");
}

std::string sniff_charset(std::string_view bytes) {
    static const std::regex re(R"(<meta[^>]*charset\s*=\s*["']?\s*([A-Za-z0-9_:.\-]+))", std::regex::icase);
    std::string head(bytes.substr(0, 1024));
    std::smatch m;
    if (std::regex_search(head, m, re)) return lower(m[1].str());
    return {};
}

std::optional<dom::LoadedFrame> PageProvider::load_iframe(const std::string& parent_url, const std::string& src) {
    PageRequest r;
    r.url = url::resolve(parent_url, src);
    try {
        auto page = fetch(r);
        return dom::LoadedFrame{std::move(page.body), std::move(page.url), std::move(page.encoding)};
    } catch (const Error& e) {
        spdlog::warn("iframe {} left opaque: {}", r.url, e.what());
        return std::nullopt;
    }
}

dom::FrameLoader PageProvider::frame_loader() {
    return [this](const std::string& parent, const std::string& src) { return load_iframe(parent, src); };
}

dom::DocumentPtr PageProvider::load(const PageRequest& request) {
    auto page = fetch(request);
    dom::ParseOptions opts;
    opts.url = page.url;
    opts.encoding = dom::encoding_from_label(page.encoding);
    opts.frame_loader = frame_loader();
    return dom::parse_document(page.body, opts);
}

std::vector<std::string> PageProvider::fetch_log() const {
    std::lock_guard lock(log_mutex_);
    return log_;
}

void PageProvider::record_fetch(const std::string& what) {
    ++fetches_;
    std::lock_guard lock(log_mutex_);
    log_.push_back(what);
}

// ---------------------------------------------------------------- fixtures

FixtureProvider::FixtureProvider(std::filesystem::path dir) : dir_(std::move(dir)) {
    auto manifest_path = dir_ / "manifest.json";
    Json manifest;
    try {
        manifest = Json::parse(read_file(manifest_path));
    } catch (const Json::exception& e) {
        throw ValidationError("malformed fixture manifest " + manifest_path.string() + ": " + e.what());
    }
    if (!manifest.contains("pages") || !manifest["pages"].is_array()) {
        throw ValidationError("fixture manifest needs a \"pages\" array");
    }
    for (const auto& p : manifest["pages"]) {
        if (!p.is_object() || !p.contains("url") || !p.contains("file")) {
            throw ValidationError("fixture entry needs \"url\" and \"file\"");
        }
        FieldValues fields;
        if (auto it = p.find("fields"); it != p.end()) {
            for (const auto& [k, v] : it->items()) {
                if (v.is_array()) {
                    for (const auto& x : v) fields.emplace_back(k, x.get<std::string>());
                } else {
                    fields.emplace_back(k, v.get<std::string>());
                }
            }
        }
        Method method = method_from_string(p.value("method", "GET"));
        Entry e;
        e.file = dir_ / p["file"].get<std::string>();
        e.encoding = p.value("encoding", "");
        PageRequest probe{p["url"].get<std::string>(), method, std::nullopt, fields};
        e.url = get_url(probe);
        entries_[key(method, probe.url, fields)] = std::move(e);
    }
}

std::string FixtureProvider::key(Method method, std::string_view u, const FieldValues& fields) {
    FieldValues sorted = fields;
    std::stable_sort(sorted.begin(), sorted.end());
    return std::string(to_string(method)) + " " + url::normalize(u) + " " + url::encode_query(sorted);
}

FetchedPage FixtureProvider::fetch(const PageRequest& request) {
    auto k = key(request.method, request.url, request.field_values);
    auto it = entries_.find(k);
    if (it == entries_.end()) throw FixtureNotFoundError("no fixture for " + describe(request), {k});
    record_fetch(describe(request));
    FetchedPage page;
    page.body = read_file(it->second.file);
    page.url = it->second.url;
    page.encoding = it->second.encoding;
    if (page.encoding.empty()) page.encoding = sniff_charset(page.body);
    if (page.encoding.empty()) page.encoding = "utf-8";
    return page;
}

// ---------------------------------------------------------------- live

LiveProvider::LiveProvider(LiveOptions options) : options_(std::move(options)) {}

std::string LiveProvider::cookie_header(const std::string& host) const {
    std::lock_guard lock(cookie_mutex_);
    auto it = cookies_.find(host);
    if (it == cookies_.end()) return {};
    std::string out;
    for (const auto& [k, v] : it->second) {
        if (!out.empty()) out += "; ";
        out += k + "=" + v;
    }
    return out;
}

void LiveProvider::store_cookies(const std::string& host, const std::vector<std::string>& set_cookie) {
    std::lock_guard lock(cookie_mutex_);
    for (const auto& line : set_cookie) {
        auto pair = line.substr(0, line.find(';'));
        auto eq = pair.find('=');
        if (eq == std::string::npos || eq == 0) continue;
        cookies_[host][dom::collapse_whitespace(pair.substr(0, eq))] = pair.substr(eq + 1);
    }
}

FetchedPage LiveProvider::fetch(const PageRequest& request) {
    std::string target = get_url(request);
    Method method = request.method;
    std::string body = request.method == Method::Post ? url::encode_query(request.field_values) : std::string();

    for (int hop = 0;; ++hop) {
        auto parts = url::split(target);
        std::string scheme = lower(parts.scheme);
        if (scheme != "http" && scheme != "https") throw UpstreamError("unsupported url scheme in " + target);
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
        if (scheme == "https") throw UpstreamError("https is not available in this build: " + target);
#endif
        std::string host = lower(parts.authority);
        std::string path = parts.path.empty() ? "/" : parts.path;
        if (parts.has_query) path += "?" + parts.query;

        httplib::Client client(scheme + "://" + parts.authority);
        client.set_follow_location(false);
        client.set_connection_timeout(options_.timeout_seconds);
        client.set_read_timeout(options_.timeout_seconds);
        httplib::Headers headers{{"User-Agent", options_.user_agent}};
        if (auto c = cookie_header(host); !c.empty()) headers.emplace("Cookie", c);

        httplib::Result res;
        {
            HostLimiter::instance().acquire(host, options_.max_connections_per_host);
            HostLimiter::Slot slot(HostLimiter::instance(), host);
            record_fetch(std::string(to_string(method)) + " " + target);
            res = method == Method::Post
                      ? client.Post(path, headers, body, "application/x-www-form-urlencoded")
                      : client.Get(path, headers);
        }
        if (!res) throw UpstreamError("request to " + target + " failed: " + httplib::to_string(res.error()));

        std::vector<std::string> set_cookie;
        for (const auto& [k, v] : res->headers) {
            if (lower(k) == "set-cookie") set_cookie.push_back(v);
        }
        store_cookies(host, set_cookie);

        int status = res->status;
        if (status >= 300 && status < 400 && res->has_header("Location")) {
            if (hop >= options_.max_redirects) {
                throw UpstreamError("too many redirects from " + request.url, {"status " + std::to_string(status)});
            }
            target = url::resolve(target, res->get_header_value("Location"));
            if (status != 307 && status != 308) {
                method = Method::Get;
                body.clear();
            }
            continue;
        }
        if (status >= 400) {
            throw UpstreamError("upstream returned " + std::to_string(status) + " for " + target,
                                {"status " + std::to_string(status)});
        }

        FetchedPage page;
        page.body = std::move(res->body);
        page.url = url::normalize(target);
        static const std::regex charset_re(R"(charset\s*=\s*["']?([A-Za-z0-9_:.\-]+))", std::regex::icase);
        std::smatch m;
        std::string content_type = res->get_header_value("Content-Type");
        if (std::regex_search(content_type, m, charset_re)) page.encoding = lower(m[1].str());
        if (page.encoding.empty()) page.encoding = sniff_charset(page.body);
        if (page.encoding.empty()) page.encoding = "utf-8";
        return page;
    }
}

// ---------------------------------------------------------------- submission

namespace {

bool truthy(std::string_view v) {
    std::string l = lower(dom::collapse_whitespace(v));
    return !(l.empty() || l == "0" || l == "false" || l == "off" || l == "no");
}

}  // namespace

PageRequest make_submission(const dom::Document& doc, const forms::FormRecord& form, std::optional<int> button_index,
                            const std::map<std::string, std::string>& values) {
    FieldValues fields;
    for (const auto& f : form.input_list) {
        if (f.name.empty()) continue;
        auto el = try_resolve(doc, f.selector);
        if (el && doc[*el].attr("disabled")) continue;
        auto override_it = values.find(f.name);
        if (f.input_type == "checkbox" || f.input_type == "radio") {
            bool on = override_it != values.end() ? truthy(override_it->second)
                                                  : (el ? doc[*el].attr("checked") != nullptr : f.checked.value_or(false));
            if (!on) continue;
            fields.emplace_back(f.name, f.value.empty() ? "on" : f.value);
            continue;
        }
        fields.emplace_back(f.name, override_it != values.end() ? override_it->second : f.value);
    }

    const forms::ButtonCandidate* button = nullptr;
    if (button_index) {
        if (*button_index < 0 || *button_index >= static_cast<int>(form.query_button_list.size())) {
            throw ValidationError("button index " + std::to_string(*button_index) + " out of range");
        }
        button = &form.query_button_list[static_cast<std::size_t>(*button_index)];
    } else if (!form.query_button_list.empty()) {
        button = &form.query_button_list.front();
    }

    std::optional<dom::NodeId> button_el;
    if (button) button_el = try_resolve(doc, button->selector);

    PageRequest req;
    bool declarative_button = !button || button->kind == forms::ButtonKind::InputSubmit ||
                              button->kind == forms::ButtonKind::InputButton ||
                              button->kind == forms::ButtonKind::ButtonTag ||
                              (button->kind == forms::ButtonKind::Image && button_el && doc[*button_el].tag == "input");
    auto form_el = form.synthetic ? std::nullopt : try_resolve(doc, form.css_selector);
    if (declarative_button && form_el && doc[*form_el].tag == "form") {
        const auto& fn = doc[*form_el];
        const std::string& base = doc.base_url(*form_el);
        const auto* action = fn.attr("action");
        req.url = action && !dom::is_blank(*action) ? url::resolve(base, dom::collapse_whitespace(*action)) : base;
        const auto* method = fn.attr("method");
        req.method = method ? method_from_string(dom::collapse_whitespace(*method)) : Method::Get;
        if (button_el) {
            const auto& bn = doc[*button_el];
            if (const auto* bname = bn.attr("name"); bname && !bname->empty() && bn.tag != "a") {
                const auto* bval = bn.attr("value");
                fields.emplace_back(*bname, bval ? *bval : "");
            }
        }
    } else {
        const std::string* href = button_el ? doc[*button_el].attr("href") : nullptr;
        std::string h = href ? dom::collapse_whitespace(*href) : std::string();
        if (h.empty() || lower(h).rfind("javascript:", 0) == 0) {
            throw ScriptRequiredError("the chosen query button submits through a script; no declarative target exists",
                                      {button ? button->selector.str() : form.css_selector.str()});
        }
        req.url = url::with_query(url::resolve(doc.base_url(*button_el), h), fields);
        req.method = Method::Get;
        return req;
    }
    if (!fields.empty()) req.form_target = form.css_selector;
    req.field_values = std::move(fields);
    return req;
}

}  // namespace webwrap::provider
