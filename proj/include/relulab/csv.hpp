#pragma once

#include <cstdio>
#include <string>
#include <string_view>
#include <vector>

namespace relulab::csv {

// RFC 4180: quote fields containing a comma, quote, CR or LF; double inner quotes.
inline std::string field(std::string_view s) {
    if (s.find_first_of(",\"\r\n") == std::string_view::npos) {
        return std::string(s);
    }
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') {
            out += '"';
        }
        out += c;
    }
    out += '"';
    return out;
}

// 17 significant digits round-trip every double exactly.
inline std::string number(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string row(const std::vector<std::string>& fields) {
    std::string out;
    for (std::size_t k = 0; k < fields.size(); ++k) {
        if (k > 0) {
            out += ',';
        }
        out += field(fields[k]);
    }
    out += "\r\n";
    return out;
}

} // namespace relulab::csv
