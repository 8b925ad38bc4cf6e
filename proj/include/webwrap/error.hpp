#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace webwrap {

// Every failure raised by the library carries a stable machine code. The HTTP
// layer maps codes to status lines; the CLI prints them on stderr.
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& message, std::vector<std::string> details = {})
        : std::runtime_error(message), code_(std::move(code)), details_(std::move(details)) {}

    const std::string& code() const noexcept { return code_; }
    const std::vector<std::string>& details() const noexcept { return details_; }

private:
    std::string code_;
    std::vector<std::string> details_;
};

#define WEBWRAP_ERROR(Name, Code)                                                       \
    class Name : public Error {                                                         \
    public:                                                                             \
        explicit Name(const std::string& message, std::vector<std::string> details = {}) \
            : Error(Code, message, std::move(details)) {}                               \
    }

WEBWRAP_ERROR(DecodeError, "decode_error");
WEBWRAP_ERROR(SelectorSyntaxError, "selector_syntax");
WEBWRAP_ERROR(NotInDocumentError, "not_in_document");
WEBWRAP_ERROR(FrameError, "frame_error");
WEBWRAP_ERROR(AlignmentError, "alignment_error");
WEBWRAP_ERROR(EmptyRulesError, "empty_rules");
WEBWRAP_ERROR(ExtractionError, "extraction_error");
WEBWRAP_ERROR(ValidationError, "validation_error");
WEBWRAP_ERROR(NotFoundError, "not_found");
WEBWRAP_ERROR(AuthorizationError, "unauthorized");
WEBWRAP_ERROR(ParameterError, "parameter_error");
WEBWRAP_ERROR(FilterError, "filter_error");
WEBWRAP_ERROR(UpstreamError, "upstream_error");
WEBWRAP_ERROR(FixtureNotFoundError, "fixture_not_found");
WEBWRAP_ERROR(ScriptRequiredError, "script_required");
WEBWRAP_ERROR(BadRequestError, "bad_request");
WEBWRAP_ERROR(StorageError, "storage_error");

#undef WEBWRAP_ERROR

// Resolution failures also report which step (0-based, counted across frames)
// had no matching node.
class ResolutionError : public Error {
public:
    ResolutionError(const std::string& message, std::size_t step)
        : Error("resolution_error", message, {"step " + std::to_string(step)}), step_(step) {}
    std::size_t step() const noexcept { return step_; }

private:
    std::size_t step_;
};

// Raised when extraction fails after some result pages were already processed.
class PartialResultError : public Error {
public:
    PartialResultError(const std::string& message, int pages_succeeded, std::vector<std::string> details = {})
        : Error("partial_result", message, std::move(details)), pages_succeeded_(pages_succeeded) {}
    int pages_succeeded() const noexcept { return pages_succeeded_; }

private:
    int pages_succeeded_;
};

}  // namespace webwrap
