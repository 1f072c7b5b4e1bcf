#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace instasent {

// Seconds since the Unix epoch, UTC.
using UtcSeconds = std::int64_t;

// Accepts either an integer second count or an ISO-8601 timestamp of the form
// YYYY-MM-DDTHH:MM:SS with an optional fraction and a `Z` or +HH:MM offset.
std::optional<UtcSeconds> ParseTimestamp(std::string_view text);

// YYYY-MM-DDTHH:MM:SSZ
std::string FormatIso8601(UtcSeconds t);

}  // namespace instasent
