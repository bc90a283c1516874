#include "mbs/csv.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "mbs/error.hpp"

namespace mbs {

namespace {

std::string trim(std::string s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return "";
    const auto last = s.find_last_not_of(" \t\r");
    s = s.substr(first, last - first + 1);
    if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
    return s;
}

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream in(line);
    while (std::getline(in, field, ',')) out.push_back(trim(field));
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

}  // namespace

std::size_t CsvTable::column_index(const std::string& name) const {
    for (std::size_t c = 0; c < columns.size(); ++c) {
        if (columns[c] == name) return c;
    }
    fail(ErrorCode::SchemaMismatch, "missing column '" + name + "'");
}

const std::vector<double>& CsvTable::column(const std::string& name) const {
    return data[column_index(name)];
}

CsvTable parse_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    CsvTable table;
    bool have_header = false;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        auto fields = split(line);
        if (!have_header) {
            table.columns = std::move(fields);
            table.data.resize(table.columns.size());
            have_header = true;
            continue;
        }
        if (fields.size() != table.columns.size()) {
            fail(ErrorCode::SchemaMismatch, "line " + std::to_string(line_no) + " has " +
                                                std::to_string(fields.size()) + " fields, expected " +
                                                std::to_string(table.columns.size()));
        }
        for (std::size_t c = 0; c < fields.size(); ++c) {
            const std::string& f = fields[c];
            const std::string where =
                "line " + std::to_string(line_no) + ", column '" + table.columns[c] + "'";
            if (f.empty()) fail(ErrorCode::SchemaMismatch, "missing value at " + where);
            double v = 0.0;
            const char* begin = f.data();
            const char* end = f.data() + f.size();
            if (*begin == '+') ++begin;
            const auto [ptr, ec] = std::from_chars(begin, end, v);
            if (ec != std::errc() || ptr != end) {
                fail(ErrorCode::SchemaMismatch, "non-numeric value '" + f + "' at " + where);
            }
            if (!std::isfinite(v)) fail(ErrorCode::NonFinite, "non-finite value at " + where);
            table.data[c].push_back(v);
        }
    }
    if (!have_header) fail(ErrorCode::SchemaMismatch, "CSV input has no header row");
    return table;
}

CsvTable read_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::Io, "cannot open input file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_csv(buf.str());
}

void write_csv(const std::string& path, const std::vector<std::string>& columns,
               const std::vector<std::vector<double>>& data) {
    require(columns.size() == data.size(), "column names and data differ in count");
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorCode::Io, "cannot write '" + path + "'");
    for (std::size_t c = 0; c < columns.size(); ++c) out << (c ? "," : "") << columns[c];
    out << '\n';
    const std::size_t n = data.empty() ? 0 : data.front().size();
    char buf[32];
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t c = 0; c < data.size(); ++c) {
            std::snprintf(buf, sizeof buf, "%.17g", data[c][i]);
            out << (c ? "," : "") << buf;
        }
        out << '\n';
    }
    if (!out) fail(ErrorCode::Io, "failed writing '" + path + "'");
}

}  // namespace mbs
