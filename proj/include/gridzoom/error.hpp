#pragma once

#include <stdexcept>
#include <string>

namespace gridzoom {

enum class ErrorCode {
    indivisible_region,
    degenerate_embedding,
    scoring_backend,
    unknown_label,
    placement_failure,
    empty_selection,
    bad_argument,
    bad_config,
    bad_image,
    io_failure,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    [[nodiscard]] ErrorCode code() const noexcept { return code_; }
    [[nodiscard]] const char* code_name() const noexcept { return error_code_name(code_); }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
    throw Error(code, message);
}

inline const char* error_code_name(ErrorCode code) {
    switch (code) {
    case ErrorCode::indivisible_region: return "indivisible_region";
    case ErrorCode::degenerate_embedding: return "degenerate_embedding";
    case ErrorCode::scoring_backend: return "scoring_backend";
    case ErrorCode::unknown_label: return "unknown_label";
    case ErrorCode::placement_failure: return "placement_failure";
    case ErrorCode::empty_selection: return "empty_selection";
    case ErrorCode::bad_argument: return "bad_argument";
    case ErrorCode::bad_config: return "bad_config";
    case ErrorCode::bad_image: return "bad_image";
    case ErrorCode::io_failure: return "io_failure";
    }
    return "unknown";
}

} // namespace gridzoom
