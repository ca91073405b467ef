#pragma once

#include "ringfc/data.hpp"

#include <filesystem>
#include <map>
#include <ostream>
#include <string>
#include <vector>

namespace ringfc::app {

// Every CSV the tool reads or writes, by name. Headers are emitted exactly in this order.
const std::map<std::string, std::vector<std::string>>& csv_schemas();
const std::vector<std::string>& csv_schema(const std::string& name);
// Human-readable listing used by --help and the golden test.
std::string describe_schemas();

class CsvWriter {
public:
    CsvWriter(const std::filesystem::path& path, const std::string& schema);
    CsvWriter& operator<<(double v);
    CsvWriter& operator<<(const std::string& v);
    void end_row();
    void close();

private:
    std::filesystem::path path_;
    std::string buffer_;
    std::size_t columns_;
    std::size_t in_row_ = 0;
};

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::size_t column(const std::string& name) const;  // throws DataError naming the missing column
};

Table read_csv(const std::filesystem::path& path);
// Checks the header against a schema and reports every missing column at once.
void require_columns(const Table& t, const std::string& schema, const std::filesystem::path& path);
double to_double(const std::string& s, const std::filesystem::path& path, std::size_t row);

// Long-format map (wavelength_nm, voltage_V, transmission) -> gridded MeasuredMap.
MeasuredMap load_map(const std::filesystem::path& path, const std::string& dataset_id);
IdlerSpectra load_idler(const std::filesystem::path& path, const std::string& dataset_id);
void write_map(const std::filesystem::path& path, const MeasuredMap& m);
void write_idler(const std::filesystem::path& path, const MeasuredMap& m);

std::string format_double(double v);

} // namespace ringfc::app
