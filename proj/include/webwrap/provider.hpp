#pragma once

#include <atomic>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "webwrap/dom.hpp"
#include "webwrap/forms.hpp"
#include "webwrap/selector.hpp"

namespace webwrap::provider {

using FieldValues = std::vector<std::pair<std::string, std::string>>;

enum class Method { Get, Post };

std::string_view to_string(Method m);
Method method_from_string(std::string_view s);

struct PageRequest {
    std::string url;
    Method method = Method::Get;
    std::optional<SelectorPath> form_target;  // set iff field_values is nonempty
    FieldValues field_values;
};

struct FetchedPage {
    std::string body;
    std::string url;       // final url after redirects (GET submissions include the query)
    std::string encoding;  // charset label
};

// Charset declared by a <meta> tag in the first 1024 bytes, or "".
std::string sniff_charset(std::string_view bytes);

class PageProvider {
public:
    virtual ~PageProvider() = default;

    virtual FetchedPage fetch(const PageRequest& request) = 0;

    // Inner document for an iframe; nullopt leaves the iframe opaque.
    virtual std::optional<dom::LoadedFrame> load_iframe(const std::string& parent_url, const std::string& src);

    dom::FrameLoader frame_loader();

    // fetch + parse with iframes loaded through this provider.
    dom::DocumentPtr load(const PageRequest& request);

    int fetch_count() const { return fetches_.load(); }
    std::vector<std::string> fetch_log() const;

protected:
    void record_fetch(const std::string& what);

private:
    std::atomic<int> fetches_{0};
    mutable std::mutex log_mutex_;
    std::vector<std::string> log_;
};

// Offline corpus: a directory holding manifest.json and the HTML files it
// names. Never touches the network.
class FixtureProvider : public PageProvider {
public:
    explicit FixtureProvider(std::filesystem::path dir);

    FetchedPage fetch(const PageRequest& request) override;

    static std::string key(Method method, std::string_view url, const FieldValues& fields);

private:
    struct Entry {
        std::filesystem::path file;
        std::string url;
        std::string encoding;
    };
    std::filesystem::path dir_;
    std::map<std::string, Entry> entries_;
};

struct LiveOptions {
    int max_redirects = 5;
    int max_connections_per_host = 4;
    int timeout_seconds = 20;
    std::string user_agent = "webwrap/1.0";
};

// Plain HTTP(S) fetching. Cookies set by responses are replayed for the
// lifetime of the instance, so create one per invocation.
class LiveProvider : public PageProvider {
public:
    explicit LiveProvider(LiveOptions options = {});

    FetchedPage fetch(const PageRequest& request) override;

private:
    std::string cookie_header(const std::string& host) const;
    void store_cookies(const std::string& host, const std::vector<std::string>& set_cookie);

    LiveOptions options_;
    mutable std::mutex cookie_mutex_;
    std::map<std::string, std::map<std::string, std::string>> cookies_;
};

// Declarative form submission. Field values override record defaults by
// field name; unnamed and disabled fields are skipped, unchecked boxes are
// left out, and hidden fields travel unchanged. Real forms submit to their
// action with their method; anchor, image and other click-bound buttons
// submit as GET to their href. Throws ScriptRequiredError when no
// declarative target exists.
PageRequest make_submission(const dom::Document& doc, const forms::FormRecord& form, std::optional<int> button_index,
                            const std::map<std::string, std::string>& values);

}  // namespace webwrap::provider
