#pragma once

#include <string>
#include <vector>

namespace mbs {

/// Numeric table read from a comma-separated file with a header row.
struct CsvTable {
    std::vector<std::string> columns;
    /// Column-major values: data[c][row].
    std::vector<std::vector<double>> data;

    std::size_t rows() const { return data.empty() ? 0 : data.front().size(); }
    /// Index of `name`; throws SchemaMismatch naming the column when absent.
    std::size_t column_index(const std::string& name) const;
    const std::vector<double>& column(const std::string& name) const;
};

/// Parses numeric CSV text. Fields may be wrapped in double quotes; empty
/// lines are skipped. Errors: SchemaMismatch for ragged rows, missing or
/// non-numeric cells; NonFinite for nan/inf cells.
CsvTable parse_csv(const std::string& text);
/// Reads and parses a file; Io error when it cannot be opened.
CsvTable read_csv(const std::string& path);

/// Writes columns with round-trip precision.
void write_csv(const std::string& path, const std::vector<std::string>& columns,
               const std::vector<std::vector<double>>& data);

}  // namespace mbs
