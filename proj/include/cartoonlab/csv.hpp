#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace cartoonlab {

// 17 significant digits: enough for bit-faithful double round-trips.
inline std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

class CsvWriter {
public:
    explicit CsvWriter(std::vector<std::string> columns) : columns_(std::move(columns)) {}

    void add_comment(const std::string& line) { comments_.push_back("# " + line); }

    void add_row(std::vector<std::string> cells) {
        if (cells.size() != columns_.size())
            throw std::invalid_argument("csv: row has " + std::to_string(cells.size()) +
                                        " cells, expected " + std::to_string(columns_.size()));
        rows_.push_back(std::move(cells));
    }

    std::string str() const {
        std::ostringstream out;
        for (const auto& c : comments_) out << c << '\n';
        out << join(columns_) << '\n';
        for (const auto& r : rows_) out << join(r) << '\n';
        return out.str();
    }

    void write(const std::string& path) const {
        std::ofstream f(path, std::ios::binary);
        if (!f) throw std::runtime_error("csv: cannot open " + path);
        f << str();
    }

    std::size_t row_count() const { return rows_.size(); }

private:
    static std::string join(const std::vector<std::string>& cells) {
        std::string out;
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) out += ',';
            out += cells[i];
        }
        return out;
    }

    std::vector<std::string> columns_;
    std::vector<std::string> comments_;
    std::vector<std::vector<std::string>> rows_;
};

}  // namespace cartoonlab
