#pragma once

#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <string>
#include <vector>

namespace pamtt {

/// Shortest round-trip decimal form of a double.
std::string format_double(double v);

/// Comma-separated writer with a fixed header. Numbers are written in their
/// shortest round-trip form so output is byte-stable.
class CsvWriter {
public:
    CsvWriter(const std::filesystem::path& path, std::vector<std::string> header);

    void row(std::initializer_list<double> values);
    void row(const std::vector<double>& values);
    void row_text(const std::vector<std::string>& cells);

    std::size_t columns() const { return header_.size(); }

private:
    std::ofstream out_;
    std::filesystem::path path_;
    std::vector<std::string> header_;
};

/// Minimal reader for the files this project writes: header plus numeric rows.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;

    /// Index of a column; throws SchemaError naming the column when absent.
    std::size_t column(const std::string& name) const;
};

CsvTable read_csv(const std::filesystem::path& path);

}  // namespace pamtt
