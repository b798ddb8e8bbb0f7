#pragma once

#include <string>
#include <vector>

namespace mlkbf {

/// Shortest text that parses back to the same double within 17 significant
/// digits; CSV cells use this so files round-trip losslessly and re-runs
/// are byte-identical.
std::string format_double(double x);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

void write_csv(const std::string& path, const CsvTable& table);

CsvTable read_csv(const std::string& path);

}  // namespace mlkbf
