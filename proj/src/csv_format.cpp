#include <charconv>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include "mars/dataset.hpp"

namespace mars {
namespace {

std::string strip(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n\"");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n\"");
  return s.substr(first, last - first + 1);
}

}  // namespace

LabeledSplit load_csv(const std::filesystem::path& path, const CsvSchema& schema) {
  const std::string file = path.string();
  std::ifstream in(path);
  if (!in) throw ParseError(file, 0, "cannot open file");

  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  std::map<std::string, int> label_index;
  std::vector<std::string> class_labels;

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (schema.has_header && line_no == 1) continue;
    if (strip(line).empty()) continue;

    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, schema.delimiter)) cells.push_back(strip(cell));
    // Trailing empty cells mark a shorter (ragged) row.
    while (!cells.empty() && cells.back().empty()) cells.pop_back();

    std::size_t first_value = 0;
    if (schema.label_first) {
      if (cells.empty() || cells[0].empty()) throw ParseError(file, line_no, "missing label");
      auto [it, inserted] = label_index.try_emplace(cells[0], static_cast<int>(class_labels.size()));
      if (inserted) class_labels.push_back(cells[0]);
      labels.push_back(it->second);
      first_value = 1;
    }
    if (cells.size() <= first_value) throw ParseError(file, line_no, "row has no values");

    std::vector<double> values;
    for (std::size_t i = first_value; i < cells.size(); ++i) {
      const std::string& c = cells[i];
      double v = 0;
      const auto [ptr, ec] = std::from_chars(c.data(), c.data() + c.size(), v);
      if (c.empty() || ec != std::errc{} || ptr != c.data() + c.size()) {
        throw ParseError(file, line_no, "not a number in column " + std::to_string(i + 1) + ": '" + c + "'");
      }
      values.push_back(v);
    }
    rows.push_back(std::move(values));
  }
  if (rows.empty()) throw ParseError(file, line_no, "no data rows");

  std::size_t max_time = 0;
  for (const auto& r : rows) max_time = std::max(max_time, r.size());
  LabeledSplit out;
  out.problem_name = path.stem().string();
  out.class_labels = std::move(class_labels);
  out.batch.values = Tensor3<double>(rows.size(), max_time, 1);
  for (std::size_t b = 0; b < rows.size(); ++b) {
    for (std::size_t t = 0; t < rows[b].size(); ++t) out.batch.values(b, t, 0) = rows[b][t];
    out.batch.lengths.push_back(rows[b].size());
  }
  out.batch.labels = std::move(labels);
  return out;
}

void write_csv(const std::filesystem::path& path, const TimeSeriesBatch& batch,
               std::span<const std::string> class_labels) {
  if (batch.channels() != 1) throw StructuralError("write_csv: only univariate batches");
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << std::setprecision(17);
  for (std::size_t b = 0; b < batch.size(); ++b) {
    bool first = true;
    if (batch.labeled()) {
      const auto label = static_cast<std::size_t>(batch.labels[b]);
      if (label >= class_labels.size()) throw StructuralError("write_csv: label without a name");
      out << class_labels[label];
      first = false;
    }
    for (std::size_t t = 0; t < batch.lengths[b]; ++t) {
      if (!first) out << ',';
      out << batch.values(b, t, 0);
      first = false;
    }
    out << '\n';
  }
}

}  // namespace mars
