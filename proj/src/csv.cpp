#include "fact/csv.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace fact {

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    for (char ch : line) {
        if (ch == ',') {
            cells.push_back(cell);
            cell.clear();
        } else if (ch != '\r') {
            cell.push_back(ch);
        }
    }
    cells.push_back(cell);
    return cells;
}

}  // namespace

int CsvTable::column_index(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == name) return static_cast<int>(i);
    }
    return -1;
}

CsvTable read_csv(std::istream& in) {
    CsvTable table;
    std::string line;
    bool have_header = false;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        auto cells = split_line(line);
        if (!have_header) {
            table.header = std::move(cells);
            have_header = true;
        } else {
            if (cells.size() != table.header.size()) {
                throw std::invalid_argument(
                    "CSV row " + std::to_string(table.rows.size() + 2) + " has " +
                    std::to_string(cells.size()) + " cells, header has " +
                    std::to_string(table.header.size()));
            }
            table.rows.push_back(std::move(cells));
        }
    }
    if (!have_header) throw std::invalid_argument("CSV: missing header row");
    return table;
}

CsvTable read_csv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open CSV file: " + path);
    return read_csv(in);
}

Dataset dataset_from_csv(const CsvTable& table, const std::string& response_column,
                         const std::vector<std::string>& exclude) {
    const int rcol = table.column_index(response_column);
    if (rcol < 0) {
        throw std::invalid_argument("response column not found: " + response_column);
    }
    std::vector<std::size_t> feature_cols;
    std::vector<std::string> names;
    for (std::size_t c = 0; c < table.header.size(); ++c) {
        if (static_cast<int>(c) == rcol) continue;
        bool excluded = false;
        for (const auto& e : exclude) {
            if (table.header[c] == e) excluded = true;
        }
        if (excluded) continue;
        feature_cols.push_back(c);
        names.push_back(table.header[c]);
    }
    if (feature_cols.empty()) {
        throw std::invalid_argument("CSV has no feature columns");
    }
    const std::size_t n = table.rows.size();
    Matrix raw(n, feature_cols.size());
    std::vector<double> response(n);
    auto parse_cell = [&](const std::string& s, std::size_t row,
                          const std::string& col) -> double {
        try {
            std::size_t pos = 0;
            const double v = std::stod(s, &pos);
            if (pos != s.size()) throw std::invalid_argument("trailing characters");
            return v;
        } catch (const std::exception&) {
            throw std::invalid_argument("cannot parse numeric cell '" + s +
                                        "' in column " + col + ", row " +
                                        std::to_string(row + 2));
        }
    };
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t i = 0; i < feature_cols.size(); ++i) {
            raw(r, i) = parse_cell(table.rows[r][feature_cols[i]], r,
                                   table.header[feature_cols[i]]);
        }
        response[r] = parse_cell(table.rows[r][static_cast<std::size_t>(rcol)], r,
                                 response_column);
    }
    return make_scaled_dataset(std::move(raw), std::move(response), std::move(names));
}

std::vector<std::string> csv_column(const CsvTable& table, const std::string& name) {
    const int c = table.column_index(name);
    if (c < 0) throw std::invalid_argument("column not found: " + name);
    std::vector<std::string> out;
    out.reserve(table.rows.size());
    for (const auto& row : table.rows) out.push_back(row[static_cast<std::size_t>(c)]);
    return out;
}

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

std::string csv_to_string(const std::vector<std::string>& comment_lines,
                          const std::vector<std::string>& header,
                          const std::vector<std::vector<std::string>>& rows) {
    std::ostringstream out;
    for (const auto& c : comment_lines) out << "# " << c << "\n";
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (i) out << ',';
        out << header[i];
    }
    out << "\n";
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) out << ',';
            out << row[i];
        }
        out << "\n";
    }
    return out.str();
}

void write_csv_file(const std::string& path,
                    const std::vector<std::string>& comment_lines,
                    const std::vector<std::string>& header,
                    const std::vector<std::vector<std::string>>& rows) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open output file: " + path);
    out << csv_to_string(comment_lines, header, rows);
}

}  // namespace fact
