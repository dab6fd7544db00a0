#pragma once

// CSV dialect: comma separated, '.' decimal point, LF line endings, '#'
// comment lines for metadata ("# key = value") before the header row.
// Numbers are written with 17 significant digits.

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "record.hpp"

namespace xsymp {

using Metadata = std::vector<std::pair<std::string, std::string>>;

inline double parse_csv_number(const std::string& cell, std::size_t line = 0);

/// Cells are kept as text; numeric cells are written by format_double and
/// read back by value().
struct CsvTable {
    Metadata metadata;
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;

    double value(std::size_t row, std::size_t col) const { return parse_csv_number(rows.at(row).at(col), row); }
    double value(std::size_t row, const std::string& col) const { return value(row, column(col)); }

    std::size_t column(const std::string& name) const {
        for (std::size_t i = 0; i < columns.size(); ++i)
            if (columns[i] == name) return i;
        throw Error("CSV has no column '" + name + "'");
    }
    std::string meta(const std::string& key) const {
        for (const auto& [k, v] : metadata)
            if (k == key) return v;
        throw Error("CSV has no metadata key '" + key + "'");
    }
};

inline std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// Writes text to path through a temporary file in the same directory and
/// a rename, so readers never observe a partial file.
inline void write_atomic(const std::filesystem::path& path, const std::string& text) {
    namespace fs = std::filesystem;
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw Error("cannot write '" + tmp.string() + "'");
        f << text;
        f.flush();
        if (!f) throw Error("write failed for '" + tmp.string() + "'");
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) throw Error("cannot rename '" + tmp.string() + "' to '" + path.string() + "': " + ec.message());
}

inline std::string render_csv(const CsvTable& t) {
    std::string out;
    for (const auto& [k, v] : t.metadata) out += "# " + k + " = " + v + "\n";
    for (std::size_t i = 0; i < t.columns.size(); ++i) out += (i ? "," : "") + t.columns[i];
    out += "\n";
    for (const auto& row : t.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) out += ',';
            out += row[i];
        }
        out += "\n";
    }
    return out;
}

inline void write_csv(const std::filesystem::path& path, const CsvTable& t) { write_atomic(path, render_csv(t)); }

/// The data rows of a run: t, GE, GHE, delta and, when the record carries
/// them, the three components of the angular momentum drift. A missing GE
/// is written as nan.
inline CsvTable run_table(const RunRecord& rec, Metadata meta) {
    CsvTable t;
    t.metadata = std::move(meta);
    t.columns = {"t", "GE", "GHE", "delta"};
    const bool with_j = !rec.samples.empty() && rec.samples.front().j_drift.has_value();
    if (with_j) t.columns.insert(t.columns.end(), {"Jx_drift", "Jy_drift", "Jz_drift"});
    t.rows.reserve(rec.samples.size());
    for (const Sample& s : rec.samples) {
        std::vector<std::string> row{format_double(s.t),
                                     format_double(s.ge ? *s.ge : std::numeric_limits<double>::quiet_NaN()),
                                     format_double(s.ghe), format_double(s.delta)};
        if (with_j)
            for (double j : *s.j_drift) row.push_back(format_double(j));
        t.rows.push_back(std::move(row));
    }
    return t;
}

inline double parse_csv_number(const std::string& cell, std::size_t line) {
    if (cell == "nan") return std::numeric_limits<double>::quiet_NaN();
    if (cell == "inf") return std::numeric_limits<double>::infinity();
    if (cell == "-inf") return -std::numeric_limits<double>::infinity();
    errno = 0;
    char* end = nullptr;
    const double v = std::strtod(cell.c_str(), &end);
    if (cell.empty() || end != cell.c_str() + cell.size() || errno == ERANGE)
        throw Error("CSV line " + std::to_string(line) + ": bad number '" + cell + "'");
    return v;
}

inline CsvTable parse_csv(const std::string& text) {
    CsvTable t;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    bool header = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line[0] == '#') {
            const std::string body = line.substr(line.size() > 1 && line[1] == ' ' ? 2 : 1);
            const auto eq = body.find(" = ");
            if (eq == std::string::npos) t.metadata.emplace_back(body, "");
            else t.metadata.emplace_back(body.substr(0, eq), body.substr(eq + 3));
            continue;
        }
        std::vector<std::string> cells;
        std::string cell;
        std::istringstream ls(line);
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        if (line.back() == ',') cells.emplace_back();
        if (!header) {
            t.columns = cells;
            header = true;
            continue;
        }
        if (cells.size() != t.columns.size())
            throw Error("CSV line " + std::to_string(lineno) + ": expected " + std::to_string(t.columns.size()) +
                        " fields");
        t.rows.push_back(std::move(cells));
    }
    if (!header) throw Error("CSV has no header row");
    return t;
}

inline CsvTable read_csv(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open '" + path.string() + "'");
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_csv(ss.str());
}

}  // namespace xsymp
