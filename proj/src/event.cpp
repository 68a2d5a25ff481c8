#include "strombench/event.hpp"

#include <cmath>
#include <cstdio>

#include <json.hpp>

namespace strombench {

SizeTooSmallError::SizeTooSmallError(std::size_t requested, std::size_t minimum)
    : std::runtime_error("target size " + std::to_string(requested) +
                         " is below the minimum of " + std::to_string(minimum) +
                         " bytes"),
      requested_(requested),
      minimum_(minimum) {}

ParseError::ParseError(const std::string& what, std::size_t byte_offset)
    : std::runtime_error(what), byte_offset_(byte_offset) {}

MissingFieldError::MissingFieldError(const std::string& field)
    : std::runtime_error("missing field \"" + field + "\""), field_(field) {}

std::string format_temperature(double celsius) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.1f", celsius);
    return buf;
}

namespace {

// Everything except the closing brace, so padding can be appended in place.
std::string compact_body(const SensorEvent& e) {
    std::string body;
    body.reserve(48);
    body += "{\"ts\":";
    body += std::to_string(e.created_at_ms);
    body += ",\"id\":";
    body += std::to_string(e.sensor_id);
    body += ",\"t\":";
    body += format_temperature(e.temperature_c);
    return body;
}

// ,"pad":"" — cost of an empty pad field.
constexpr std::size_t kPadFieldOverhead = 9;

} // namespace

std::size_t min_encoded_size(const SensorEvent& e) {
    return compact_body(e).size() + 1;
}

EncodedRecord serialize_event(const SensorEvent& e, std::size_t target_size) {
    if (!std::isfinite(e.temperature_c)) {
        throw EncodingError("temperature is not finite");
    }
    std::string body = compact_body(e);
    const std::size_t compact = body.size() + 1;
    const std::size_t minimum = compact > kMinEventSize ? compact : kMinEventSize;
    if (target_size < minimum) {
        throw SizeTooSmallError(target_size, minimum);
    }
    const std::size_t slack = target_size - compact;
    if (slack >= kPadFieldOverhead) {
        body += ",\"pad\":\"";
        body.append(slack - kPadFieldOverhead, 'x');
        body += '"';
    } else {
        body.append(slack, ' ');
    }
    body += '}';
    return body;
}

SensorEvent deserialize_event(std::string_view bytes) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(bytes);
    } catch (const nlohmann::json::parse_error& err) {
        throw ParseError(err.what(), err.byte);
    }
    if (!doc.is_object()) {
        throw ParseError("record is not a JSON object", 0);
    }
    for (const char* field : {"ts", "id", "t"}) {
        if (!doc.contains(field)) {
            throw MissingFieldError(field);
        }
    }
    if (!doc["ts"].is_number_integer() || !doc["id"].is_number_integer() ||
        !doc["t"].is_number()) {
        throw ParseError("field has unexpected type", 0);
    }
    SensorEvent e;
    e.created_at_ms = doc["ts"].get<std::int64_t>();
    e.sensor_id = doc["id"].get<std::int64_t>();
    e.temperature_c = doc["t"].get<double>();
    return e;
}

} // namespace strombench
