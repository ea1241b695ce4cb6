#pragma once

#include <string>
#include <vector>

namespace fricmot {

// Shortest round-trip decimal text for a double; deterministic across runs.
std::string format_double(double v);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

// Numeric CSV with a header line. Blank lines and lines starting with '#' are skipped.
CsvTable read_csv(const std::string& path);

class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> header);
  void row(const std::vector<std::string>& cells);
  const std::string& str() const { return text_; }

 private:
  std::size_t width_;
  std::string text_;
};

void write_text_file(const std::string& path, const std::string& text);

}  // namespace fricmot
