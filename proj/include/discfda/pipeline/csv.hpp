#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "../error.hpp"

namespace discfda::pipeline {

/// Floats are written at 17 significant digits so they round-trip exactly.
inline std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string csv_field(std::string_view s) {
    if (s.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(s);
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

/// Comma-separated, header row first, LF line endings.
class CsvWriter {
public:
    explicit CsvWriter(std::vector<std::string> header) { row_strings(header); }

    template <class... Cells>
    void row(const Cells&... cells) {
        bool first = true;
        (append(cells, first), ...);
        out_ << '\n';
    }

    void row_strings(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << csv_field(cells[i]);
        out_ << '\n';
    }

    std::string str() const { return out_.str(); }

private:
    void append(double v, bool& first) { sep(first) << fmt17(v); }
    void append(int v, bool& first) { sep(first) << v; }
    void append(std::size_t v, bool& first) { sep(first) << v; }
    void append(std::string_view v, bool& first) { sep(first) << csv_field(v); }
    void append(const std::string& v, bool& first) { sep(first) << csv_field(v); }
    void append(const char* v, bool& first) { sep(first) << csv_field(v); }

    std::ostream& sep(bool& first) {
        if (!first) out_ << ',';
        first = false;
        return out_;
    }

    std::ostringstream out_;
};

/// Splits one CSV record (RFC 4180 quoting, no embedded newlines).
inline std::vector<std::string> split_csv_line(std::string_view line) {
    std::vector<std::string> cells;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            cells.push_back(std::move(cur));
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    cells.push_back(std::move(cur));
    return cells;
}

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw Error(ErrorCode::IoError, "cannot write " + path);
    f << content;
    if (!f) throw Error(ErrorCode::IoError, "write failed for " + path);
}

inline std::string read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error(ErrorCode::IoError, "cannot read " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

}  // namespace discfda::pipeline
