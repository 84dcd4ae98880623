#pragma once

#include <charconv>
#include <string>
#include <system_error>

namespace softctrl {

// Shortest decimal form that round-trips the exact binary64 value; keeps
// emitted CSV/JSON artifacts byte-reproducible without 17-digit noise.
inline std::string fmt_double(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

}  // namespace softctrl
