#pragma once

#include <string>
#include <vector>

namespace mw {

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    int column(const std::string& name) const;  // -1 when absent
};

CsvTable read_csv(const std::string& path);

// Round-trip exact double formatting (shortest form that parses back bitwise).
std::string format_double(double v);

double parse_double(const std::string& cell, const std::string& context);
long long parse_int(const std::string& cell, const std::string& context);

void write_csv(const std::string& path, const CsvTable& table);

}  // namespace mw
