#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace strombench {

/// Smallest record size the wire format accepts, in bytes.
inline constexpr std::size_t kMinEventSize = 27;

/// One synthetic sensor measurement.
struct SensorEvent {
    std::int64_t created_at_ms = 0; // wall clock, milliseconds since epoch
    std::int64_t sensor_id = 0;
    double temperature_c = 0.0;

    friend bool operator==(const SensorEvent&, const SensorEvent&) = default;
};

/// A serialized event. Size is part of the contract: records are padded to an
/// exact target size.
using EncodedRecord = std::string;

class SizeTooSmallError : public std::runtime_error {
public:
    SizeTooSmallError(std::size_t requested, std::size_t minimum);
    std::size_t requested() const { return requested_; }
    std::size_t minimum() const { return minimum_; }

private:
    std::size_t requested_;
    std::size_t minimum_;
};

class EncodingError : public std::runtime_error {
public:
    explicit EncodingError(const std::string& what) : std::runtime_error(what) {}
};

class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, std::size_t byte_offset);
    std::size_t byte_offset() const { return byte_offset_; }

private:
    std::size_t byte_offset_;
};

class MissingFieldError : public std::runtime_error {
public:
    explicit MissingFieldError(const std::string& field);
    const std::string& field() const { return field_; }

private:
    std::string field_;
};

/// Temperature rendered with exactly one decimal place, which keeps record
/// sizes deterministic.
std::string format_temperature(double celsius);

/// Size of the compact encoding of `e` (no padding). Any target at or above
/// this (and at or above kMinEventSize) is representable exactly.
std::size_t min_encoded_size(const SensorEvent& e);

/// Encodes `e` as a JSON record of exactly `target_size` bytes. The slack
/// between the compact encoding and the target is absorbed by a "pad" string
/// field; slack smaller than the pad field syntax itself is absorbed as
/// insignificant whitespace.
///
/// Throws SizeTooSmallError when target_size < max(kMinEventSize,
/// min_encoded_size(e)) and EncodingError on a non-finite temperature.
EncodedRecord serialize_event(const SensorEvent& e, std::size_t target_size);

/// Parses a record produced by serialize_event (padding is discarded).
/// Throws ParseError (with byte offset) on malformed input and
/// MissingFieldError when a required field is absent.
SensorEvent deserialize_event(std::string_view bytes);

} // namespace strombench
