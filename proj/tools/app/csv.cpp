#include "csv.hpp"

#include "epigen/error.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace epigen::app
{

std::string format_double(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_csv(std::ostream& out, const std::string& digest, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows)
{
    out << "# config_digest=" << digest << '\n';
    for (std::size_t i = 0; i < header.size(); ++i) {
        out << (i ? "," : "") << header[i];
    }
    out << '\n';
    for (const auto& row : rows) {
        if (row.size() != header.size()) {
            throw Error("csv row width does not match header");
        }
        for (std::size_t i = 0; i < row.size(); ++i) {
            out << (i ? "," : "") << format_double(row[i]);
        }
        out << '\n';
    }
}

void write_csv(const std::string& path, const std::string& digest, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error("cannot write " + path);
    }
    write_csv(out, digest, header, rows);
    if (!out) {
        throw Error("write failed: " + path);
    }
}

std::vector<std::vector<double>> read_csv(const std::string& path, std::string* digest,
                                          std::vector<std::string>* header)
{
    std::ifstream in(path);
    if (!in) {
        throw Error("cannot read " + path);
    }
    std::string line;
    std::vector<std::vector<double>> rows;
    bool have_header = false;
    while (std::getline(in, line)) {
        if (line.rfind("# config_digest=", 0) == 0) {
            if (digest) {
                *digest = line.substr(16);
            }
            continue;
        }
        std::stringstream ss(line);
        std::string cell;
        if (!have_header) {
            have_header = true;
            while (std::getline(ss, cell, ',')) {
                if (header) {
                    header->push_back(cell);
                }
            }
            continue;
        }
        std::vector<double> row;
        while (std::getline(ss, cell, ',')) {
            row.push_back(std::stod(cell));
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

} // namespace epigen::app
