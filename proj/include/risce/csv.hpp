#pragma once

#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace risce {

/// Full round-trip formatting for 64-bit floats.
inline std::string fmt_double(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

struct CsvReport {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> footer; // written as trailing "# ..." comment lines

    void add_row(std::vector<std::string> row) {
        if (row.size() != header.size())
            throw std::invalid_argument("CsvReport: row width mismatch");
        rows.push_back(std::move(row));
    }
};

inline std::string csv_to_string(const CsvReport& r) {
    std::string out;
    auto join = [&out](const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) out += ',';
            out += cells[i];
        }
        out += '\n';
    };
    join(r.header);
    for (const auto& row : r.rows) join(row);
    for (const auto& f : r.footer) out += "# " + f + "\n";
    return out;
}

inline void save_csv(const CsvReport& r, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("save_csv: cannot open " + path);
    out << csv_to_string(r);
    if (!out) throw std::runtime_error("save_csv: write failed for " + path);
}

} // namespace risce
