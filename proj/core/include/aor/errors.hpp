#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace aor {

/// Network-level failure that persisted through the retry budget.
class TransportError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// The endpoint answered, but not in the shape we asked for
/// (non-retryable HTTP status, unparseable response body, ...).
class ProtocolError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Judge output did not yield the expected number of scores.
class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A prompt builder refused to emit an over-length prompt.
class PromptSizeError : public std::runtime_error {
public:
    PromptSizeError(std::size_t measured, std::size_t limit)
        : std::runtime_error("prompt length " + std::to_string(measured) +
                             " exceeds limit " + std::to_string(limit)),
          measured_(measured),
          limit_(limit) {}

    std::size_t measured() const { return measured_; }
    std::size_t limit() const { return limit_; }

private:
    std::size_t measured_;
    std::size_t limit_;
};

/// No usable answer exists (every extraction failed, or a vote over an
/// empty candidate set was requested).
class AbstainError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace aor
