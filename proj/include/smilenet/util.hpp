#pragma once

#include <charconv>
#include <string>

namespace smilenet {

// Shortest decimal form that parses back to the same double; keeps text
// formats (manifests, reports, config files) byte-stable across round trips.
inline std::string format_double(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

}  // namespace smilenet
