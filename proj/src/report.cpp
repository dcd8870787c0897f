#include "fblab/report.hpp"

#include "fblab/errors.hpp"

#include <charconv>
#include <fstream>

namespace fblab {

std::string format_real(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
    return std::string(buf, res.ptr);
}

CsvTable::CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

CsvTable::Row CsvTable::row() {
    rows_.emplace_back();
    return Row(rows_.back());
}

CsvTable::Row& CsvTable::Row::operator<<(double v) {
    cells_.push_back(format_real(v));
    return *this;
}

CsvTable::Row& CsvTable::Row::operator<<(long v) {
    cells_.push_back(std::to_string(v));
    return *this;
}

CsvTable::Row& CsvTable::Row::operator<<(bool v) {
    cells_.push_back(v ? "true" : "false");
    return *this;
}

CsvTable::Row& CsvTable::Row::operator<<(const std::string& v) {
    // Quote only when needed.
    if (v.find_first_of(",\"\n") == std::string::npos) {
        cells_.push_back(v);
    } else {
        std::string q = "\"";
        for (char c : v) {
            if (c == '"') q += '"';
            q += c;
        }
        cells_.push_back(q + "\"");
    }
    return *this;
}

std::string CsvTable::str() const {
    std::string out;
    auto line = [&out](const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) out += ',';
            out += cells[i];
        }
        out += '\n';
    };
    line(header_);
    for (const auto& r : rows_) line(r);
    return out;
}

void CsvTable::write(const std::filesystem::path& file) const {
    for (const auto& r : rows_)
        if (r.size() != header_.size())
            throw Error(ErrorKind::Io, "row width " + std::to_string(r.size()) + " does not match the header of " +
                                           file.string());
    write_text(file, str());
}

void write_text(const std::filesystem::path& file, const std::string& text) {
    std::ofstream out(file, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::Io, "cannot open " + file.string() + " for writing");
    out << text;
    out.flush();
    if (!out) throw Error(ErrorKind::Io, "failed writing " + file.string());
}

void write_json(const std::filesystem::path& file, const nlohmann::json& doc) {
    write_text(file, doc.dump(2) + "\n");
}

}  // namespace fblab
