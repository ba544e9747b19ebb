#ifndef FACT_CSV_HPP
#define FACT_CSV_HPP

#include <iosfwd>
#include <string>
#include <vector>

#include "fact/dataset.hpp"

namespace fact {

/// Parsed CSV: header row plus string cells. Dialect: comma separator,
/// '.' decimal point, UTF-8, leading '#' lines skipped as comments.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    int column_index(const std::string& name) const;  // -1 when absent
};

CsvTable read_csv(std::istream& in);
CsvTable read_csv_file(const std::string& path);

/// Converts a parsed table into a scaled Dataset. The response column is
/// selected by name; `exclude` columns (e.g. a date column) are dropped
/// from the feature matrix. Throws std::invalid_argument with the
/// offending column or cell named.
Dataset dataset_from_csv(const CsvTable& table, const std::string& response_column,
                         const std::vector<std::string>& exclude = {});

/// Extracts one column as raw strings (used for date labels).
std::vector<std::string> csv_column(const CsvTable& table, const std::string& name);

/// Deterministic double formatting shared by all CSV/JSON writers.
std::string format_double(double v);

/// Writes rows of already-formatted cells; `comment_lines` are emitted
/// first, each prefixed with "# ".
void write_csv_file(const std::string& path,
                    const std::vector<std::string>& comment_lines,
                    const std::vector<std::string>& header,
                    const std::vector<std::vector<std::string>>& rows);

std::string csv_to_string(const std::vector<std::string>& comment_lines,
                          const std::vector<std::string>& header,
                          const std::vector<std::vector<std::string>>& rows);

}  // namespace fact

#endif  // FACT_CSV_HPP
