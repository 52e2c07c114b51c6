#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

namespace bprelab {

// All artifacts are rendered to a string first and written in one shot;
// numbers use 17-significant-digit locale-free formatting so identical runs
// produce identical bytes.
struct CsvDoc {
    std::vector<std::string> comments;  // emitted as leading "# ..." lines
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;

    std::string render() const;
};

std::string csv_cell(double v);
std::string csv_cell(std::uint64_t v);
std::string csv_cell(std::int64_t v);
std::string csv_cell(const std::string& v);

void write_text_file(const std::filesystem::path& file, const std::string& content);
void write_csv_file(const std::filesystem::path& file, const CsvDoc& doc);
// dump(2) with sorted keys and a trailing newline
void write_json_file(const std::filesystem::path& file, const nlohmann::json& j);

std::string read_text_file(const std::filesystem::path& file);

}  // namespace bprelab
