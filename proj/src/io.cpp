#include "bprelab/io.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "bprelab/numeric.hpp"

namespace bprelab {

std::string CsvDoc::render() const {
    std::string out;
    for (const auto& c : comments) {
        out += "# ";
        out += c;
        out += '\n';
    }
    for (std::size_t i = 0; i < columns.size(); ++i) {
        if (i > 0) out += ',';
        out += columns[i];
    }
    out += '\n';
    for (const auto& row : rows) {
        if (row.size() != columns.size())
            throw std::logic_error("csv: row width differs from header");
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i > 0) out += ',';
            out += row[i];
        }
        out += '\n';
    }
    return out;
}

std::string csv_cell(double v) { return format17(v); }
std::string csv_cell(std::uint64_t v) { return std::to_string(v); }
std::string csv_cell(std::int64_t v) { return std::to_string(v); }
std::string csv_cell(const std::string& v) { return v; }

void write_text_file(const std::filesystem::path& file, const std::string& content) {
    std::ofstream out(file, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + file.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw std::runtime_error("write failed: " + file.string());
}

void write_csv_file(const std::filesystem::path& file, const CsvDoc& doc) {
    write_text_file(file, doc.render());
}

void write_json_file(const std::filesystem::path& file, const nlohmann::json& j) {
    write_text_file(file, j.dump(2) + "\n");
}

std::string read_text_file(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open for reading: " + file.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace bprelab
