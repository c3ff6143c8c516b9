#pragma once

#include <stdexcept>
#include <string>

namespace oblab {

enum class ErrorKind {
    non_finite_sample,
    out_of_domain,
    radius_too_small,
    degenerate_denominator,
    parameter,
    classification,
    insufficient_data,
    format,
    missing_input,
};

inline const char* to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::non_finite_sample: return "non-finite-sample";
        case ErrorKind::out_of_domain: return "out-of-domain";
        case ErrorKind::radius_too_small: return "radius-too-small";
        case ErrorKind::degenerate_denominator: return "degenerate-denominator";
        case ErrorKind::parameter: return "parameter";
        case ErrorKind::classification: return "classification";
        case ErrorKind::insufficient_data: return "insufficient-data";
        case ErrorKind::format: return "format";
        case ErrorKind::missing_input: return "missing-input";
    }
    return "unknown";
}

/// Every failure raised by the library carries a kind so callers (and the CLI
/// report) can branch on it without parsing messages.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

}  // namespace oblab
