#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

#include "mars/dataset.hpp"

namespace mars {
namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) parts.push_back(cur);
  if (!s.empty() && s.back() == sep) parts.emplace_back();
  return parts;
}

std::vector<std::string> words(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  std::string w;
  while (in >> w) out.push_back(w);
  return out;
}

bool parse_bool(const std::string& file, std::size_t line, const std::string& key,
                const std::string& value) {
  const auto v = lower(value);
  if (v == "true") return true;
  if (v == "false") return false;
  throw ParseError(file, line, "@" + key + " expects true/false, got '" + value + "'");
}

double parse_value(const std::string& file, std::size_t line, const std::string& token) {
  const std::string t = trim(token);
  if (t == "?" || lower(t) == "nan") {
    throw ParseError(file, line, "missing values are not supported");
  }
  double value = 0;
  const auto* end = t.data() + t.size();
  const auto [ptr, ec] = std::from_chars(t.data(), end, value);
  if (ec != std::errc{} || ptr != end || t.empty()) {
    throw ParseError(file, line, "not a number: '" + t + "'");
  }
  return value;
}

struct Header {
  std::string problem_name;
  bool timestamps = false;
  std::optional<bool> univariate;
  std::optional<std::size_t> dimensions;
  bool has_labels = false;
  std::vector<std::string> labels;
};

}  // namespace

LabeledSplit read_ts_file(const std::filesystem::path& path) {
  const std::string file = path.string();
  std::ifstream in(path);
  if (!in) throw ParseError(file, 0, "cannot open file");

  Header header;
  bool in_data = false;
  std::size_t line_no = 0;
  std::string line;
  std::vector<std::vector<std::vector<double>>> records;  // [row][dim][t]
  std::vector<int> labels;
  std::map<std::string, int> label_index;
  std::optional<std::size_t> dims;

  while (std::getline(in, line)) {
    ++line_no;
    const std::string text = trim(line);
    if (text.empty() || text[0] == '#') continue;

    if (!in_data) {
      if (text[0] != '@') throw ParseError(file, line_no, "expected a header line before @data");
      const auto tokens = words(text.substr(1));
      if (tokens.empty()) throw ParseError(file, line_no, "empty header key");
      const std::string key = lower(tokens[0]);
      const auto need_value = [&]() -> const std::string& {
        if (tokens.size() < 2) throw ParseError(file, line_no, "@" + tokens[0] + " needs a value");
        return tokens[1];
      };
      if (key == "problemname") {
        header.problem_name = need_value();
      } else if (key == "timestamps") {
        header.timestamps = parse_bool(file, line_no, key, need_value());
        if (header.timestamps) throw ParseError(file, line_no, "timestamped series are not supported");
      } else if (key == "missing" || key == "equallength") {
        parse_bool(file, line_no, key, need_value());
      } else if (key == "univariate") {
        header.univariate = parse_bool(file, line_no, key, need_value());
      } else if (key == "dimensions" || key == "dimension") {
        std::size_t d = 0;
        const auto& v = need_value();
        const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), d);
        if (ec != std::errc{} || d == 0) throw ParseError(file, line_no, "bad @dimensions value");
        header.dimensions = d;
      } else if (key == "serieslength") {
        need_value();
      } else if (key == "classlabel") {
        header.has_labels = parse_bool(file, line_no, key, need_value());
        if (header.has_labels) {
          if (tokens.size() < 3) throw ParseError(file, line_no, "@classLabel true lists no labels");
          for (std::size_t i = 2; i < tokens.size(); ++i) {
            if (label_index.contains(tokens[i])) {
              throw ParseError(file, line_no, "duplicate class label '" + tokens[i] + "'");
            }
            label_index[tokens[i]] = static_cast<int>(header.labels.size());
            header.labels.push_back(tokens[i]);
          }
        }
      } else if (key == "data") {
        in_data = true;
        if (header.univariate.value_or(false)) {
          if (header.dimensions && *header.dimensions != 1) {
            throw ParseError(file, line_no, "@univariate true conflicts with @dimensions");
          }
          dims = 1;
        } else if (header.dimensions) {
          dims = header.dimensions;
        }
      } else {
        throw ParseError(file, line_no, "unknown header key @" + tokens[0]);
      }
      continue;
    }

    auto fields = split(text, ':');
    if (header.has_labels) {
      if (fields.size() < 2) throw ParseError(file, line_no, "record has no class label");
      const std::string label = trim(fields.back());
      fields.pop_back();
      const auto it = label_index.find(label);
      if (it == label_index.end()) throw ParseError(file, line_no, "unknown class label '" + label + "'");
      labels.push_back(it->second);
    }
    if (!dims) dims = fields.size();
    if (fields.size() != *dims) {
      throw ParseError(file, line_no, "expected " + std::to_string(*dims) + " dimensions, found " +
                                          std::to_string(fields.size()));
    }
    std::vector<std::vector<double>> record;
    record.reserve(fields.size());
    for (const auto& field : fields) {
      std::vector<double> series;
      for (const auto& token : split(field, ',')) series.push_back(parse_value(file, line_no, token));
      if (series.empty()) throw ParseError(file, line_no, "empty dimension");
      record.push_back(std::move(series));
    }
    records.push_back(std::move(record));
  }
  if (!in_data) throw ParseError(file, line_no, "missing @data section");
  if (records.empty()) throw ParseError(file, line_no, "no records after @data");

  std::size_t max_time = 0;
  for (const auto& r : records) {
    for (const auto& s : r) max_time = std::max(max_time, s.size());
  }
  LabeledSplit out;
  out.problem_name = header.problem_name;
  out.class_labels = header.labels;
  out.batch.values = Tensor3<double>(records.size(), max_time, *dims);
  for (std::size_t b = 0; b < records.size(); ++b) {
    std::size_t len = 0;
    for (std::size_t d = 0; d < *dims; ++d) {
      const auto& s = records[b][d];
      len = std::max(len, s.size());
      for (std::size_t t = 0; t < s.size(); ++t) out.batch.values(b, t, d) = s[t];
    }
    out.batch.lengths.push_back(len);
  }
  out.batch.labels = std::move(labels);
  return out;
}

Dataset load_ts(const std::filesystem::path& path) {
  namespace fs = std::filesystem;
  fs::path train_path, test_path;
  const std::string stem = path.filename().string();
  const auto ends_with = [&](const std::string& suffix) {
    return stem.size() >= suffix.size() && stem.compare(stem.size() - suffix.size(), suffix.size(), suffix) == 0;
  };
  if (ends_with("_TRAIN.ts")) {
    train_path = path;
    test_path = path.parent_path() / (stem.substr(0, stem.size() - 9) + "_TEST.ts");
  } else if (ends_with("_TEST.ts")) {
    test_path = path;
    train_path = path.parent_path() / (stem.substr(0, stem.size() - 8) + "_TRAIN.ts");
  } else if (fs::is_directory(path)) {
    const std::string name = fs::path(path).lexically_normal().filename().string().empty()
                                 ? fs::path(path).lexically_normal().parent_path().filename().string()
                                 : fs::path(path).lexically_normal().filename().string();
    train_path = path / (name + "_TRAIN.ts");
    test_path = path / (name + "_TEST.ts");
  } else {
    train_path = path.parent_path() / (stem + "_TRAIN.ts");
    test_path = path.parent_path() / (stem + "_TEST.ts");
  }

  auto train = read_ts_file(train_path);
  auto test = read_ts_file(test_path);
  if (train.class_labels != test.class_labels) {
    throw ParseError(test_path.string(), 0, "class label list differs from the training split");
  }
  if (train.batch.channels() != test.batch.channels()) {
    throw ParseError(test_path.string(), 0, "dimension count differs from the training split");
  }
  Dataset ds;
  std::string name = train.problem_name;
  if (name.empty()) name = train_path.filename().string().substr(0, train_path.filename().string().size() - 9);
  ds.manifest = make_manifest(name, train.batch, test.batch, train.class_labels);
  ds.train = std::move(train.batch);
  ds.test = std::move(test.batch);
  return ds;
}

}  // namespace mars
