#pragma once

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace fblab {

/// Shortest text with 17 significant digits; round-trips every double.
std::string format_real(double v);

/// In-memory CSV table with a fixed header; cells are formatted on insertion
/// so the byte stream depends only on the values.
class CsvTable {
public:
    explicit CsvTable(std::vector<std::string> header);

    class Row {
    public:
        Row& operator<<(double v);
        Row& operator<<(long v);
        Row& operator<<(int v) { return *this << static_cast<long>(v); }
        Row& operator<<(bool v);
        Row& operator<<(const std::string& v);
        Row& operator<<(const char* v) { return *this << std::string(v); }

    private:
        friend class CsvTable;
        explicit Row(std::vector<std::string>& cells) : cells_(cells) {}
        std::vector<std::string>& cells_;
    };

    /// Starts a new row; stream the cells into it.
    Row row();

    std::size_t n_rows() const { return rows_.size(); }
    const std::vector<std::string>& header() const { return header_; }
    std::string str() const;

    /// Throws ErrorKind::Io on failure, or when a row has the wrong width.
    void write(const std::filesystem::path& file) const;

private:
    std::vector<std::string> header_;
    std::vector<std::vector<std::string>> rows_;
};

/// One acceptance-style check listed in summary.txt.
struct Check {
    std::string name;
    bool passed = false;
    std::string detail;
};

void write_text(const std::filesystem::path& file, const std::string& text);
void write_json(const std::filesystem::path& file, const nlohmann::json& doc);

}  // namespace fblab
