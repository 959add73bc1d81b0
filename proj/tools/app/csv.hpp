#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace epigen::app
{

/// Formats with 17 significant digits so that values round-trip exactly.
std::string format_double(double v);

/// CSV table: a "# config_digest=<hex>" line, the header, then one line per row.
void write_csv(std::ostream& out, const std::string& digest, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows);

/// Same, to a file; throws when the file cannot be written.
void write_csv(const std::string& path, const std::string& digest, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows);

/// Parses a file written by write_csv; returns the rows and fills digest and header.
std::vector<std::vector<double>> read_csv(const std::string& path, std::string* digest = nullptr,
                                          std::vector<std::string>* header = nullptr);

} // namespace epigen::app
