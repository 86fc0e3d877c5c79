#pragma once

#include <cstdio>
#include <stdexcept>
#include <string>

namespace ehrelay {

// Shortest exact decimal form; strtod gives the same bits back, which is
// what keeps every text format in the project round-trip clean.
inline std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// File open/read/write trouble, as opposed to malformed content.
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace ehrelay
