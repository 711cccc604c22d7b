#pragma once
// Plot-ready text tables. Tab-separated, one header line, doubles in
// shortest round-trip form; identical inputs serialize to identical bytes.

#include <string>
#include <vector>

#include "io_util.hpp"

namespace prefnp {

struct TsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    void add_row(std::vector<std::string> row) {
        if (row.size() != header.size())
            throw std::runtime_error("TsvTable: row width does not match header");
        rows.push_back(std::move(row));
    }

    std::string to_text() const {
        std::string out;
        for (size_t i = 0; i < header.size(); ++i) {
            if (i) out += '\t';
            out += header[i];
        }
        out += '\n';
        for (const auto& row : rows) {
            for (size_t i = 0; i < row.size(); ++i) {
                if (i) out += '\t';
                out += row[i];
            }
            out += '\n';
        }
        return out;
    }

    static TsvTable from_text(const std::string& text) {
        TsvTable table;
        const auto lines = split(text, '\n');
        if (lines.empty() || lines[0].empty()) throw std::runtime_error("TsvTable: empty input");
        for (auto col : split(lines[0], '\t')) table.header.emplace_back(col);
        for (size_t li = 1; li < lines.size(); ++li) {
            if (lines[li].empty()) continue;
            std::vector<std::string> row;
            for (auto col : split(lines[li], '\t')) row.emplace_back(col);
            table.add_row(std::move(row));
        }
        return table;
    }

    size_t column(const std::string& name) const {
        for (size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return i;
        throw std::runtime_error("TsvTable: no column " + name);
    }
};

}  // namespace prefnp
