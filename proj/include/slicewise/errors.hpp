#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace slicewise {

// ============================================================================
// Error hierarchy
// ============================================================================

/// Base for every error raised by the library.
class error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input file. `field()` names the offending header field.
class format_error : public error {
public:
    format_error(std::string field, const std::string& message)
        : error(field + ": " + message), field_(std::move(field)) {}
    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

/// Well-formed input that this library does not handle (datatype, 4D, ...).
class unsupported_error : public error {
public:
    using error::error;
};

/// A documented precondition was violated by the caller.
class contract_error : public error {
public:
    using error::error;
};

class bounds_error : public contract_error {
public:
    using contract_error::contract_error;
};

class io_error : public error {
public:
    using error::error;
};

/// A metric has no defined value for the given inputs (empty mask, no slices).
class undefined_metric_error : public error {
public:
    using error::error;
};

/// Connection refused, dropped or timed out while talking to a remote backend.
class transport_error : public error {
public:
    transport_error(const std::string& message, std::optional<std::size_t> frame = std::nullopt)
        : error(message), frame_(frame) {}
    std::optional<std::size_t> frame() const noexcept { return frame_; }

private:
    std::optional<std::size_t> frame_;
};

/// The remote side answered, but the answer breaks the wire protocol.
class protocol_error : public error {
public:
    protocol_error(const std::string& message, std::optional<std::size_t> frame = std::nullopt)
        : error(message), frame_(frame) {}
    std::optional<std::size_t> frame() const noexcept { return frame_; }

private:
    std::optional<std::size_t> frame_;
};

}  // namespace slicewise
