#include "af/csvio.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "af/errors.hpp"

namespace af {

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

double parse_double(const std::string& s, const std::filesystem::path& path, int line_no) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || (end && *end != '\0' && *end != '\r'))
    throw ValidationError(path.string() + ":" + std::to_string(line_no) +
                          ": bad numeric field '" + s + "'");
  return v;
}

}  // namespace

void write_samples_csv(const std::filesystem::path& path, const Mat& samples) {
  std::FILE* f = std::fopen(path.string().c_str(), "wb");
  if (!f) throw ValidationError("cannot open '" + path.string() + "' for writing");
  for (int c = 0; c < samples.cols(); ++c)
    std::fprintf(f, c == 0 ? "dim_%d" : ",dim_%d", c + 1);
  std::fputc('\n', f);
  for (int i = 0; i < samples.rows(); ++i) {
    for (int c = 0; c < samples.cols(); ++c)
      std::fprintf(f, c == 0 ? "%.17g" : ",%.17g", samples(i, c));
    std::fputc('\n', f);
  }
  if (std::fclose(f) != 0) throw ValidationError("write failed for '" + path.string() + "'");
}

Mat read_samples_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line))
    throw ValidationError(path.string() + ": empty file, expected a header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const std::vector<std::string> header = split_line(line);
  const int d = static_cast<int>(header.size());
  for (int c = 0; c < d; ++c) {
    if (header[c] != "dim_" + std::to_string(c + 1))
      throw ValidationError(path.string() + ": bad header field '" + header[c] + "'");
  }
  std::vector<double> values;
  int rows = 0, line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::vector<std::string> fields = split_line(line);
    if (static_cast<int>(fields.size()) != d)
      throw ValidationError(path.string() + ":" + std::to_string(line_no) +
                            ": expected " + std::to_string(d) + " fields");
    for (const std::string& s : fields) values.push_back(parse_double(s, path, line_no));
    ++rows;
  }
  Mat out(rows, d);
  std::copy(values.begin(), values.end(), out.data());
  return out;
}

BayesianLogisticPosteriorParams read_logit_dataset_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path.string() + "'");
  std::vector<std::vector<double>> rows;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::vector<std::string> fields = split_line(line);
    std::vector<double> row;
    row.reserve(fields.size());
    for (const std::string& s : fields) row.push_back(parse_double(s, path, line_no));
    if (!rows.empty() && rows.front().size() != row.size())
      throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": ragged row");
    rows.push_back(std::move(row));
  }
  if (rows.empty() || rows.front().size() < 2)
    throw ValidationError(path.string() + ": need feature columns plus a label column");
  const int n = static_cast<int>(rows.size());
  const int width = static_cast<int>(rows.front().size());
  BayesianLogisticPosteriorParams data;
  data.features = Mat(n, width - 1);
  data.labels.resize(n);
  for (int i = 0; i < n; ++i) {
    for (int c = 0; c < width - 1; ++c) data.features(i, c) = rows[i][c];
    data.labels[i] = rows[i][width - 1];
  }
  return data;
}

void write_logit_dataset_csv(const std::filesystem::path& path,
                             const BayesianLogisticPosteriorParams& data) {
  std::FILE* f = std::fopen(path.string().c_str(), "wb");
  if (!f) throw ValidationError("cannot open '" + path.string() + "' for writing");
  for (int i = 0; i < data.features.rows(); ++i) {
    for (int c = 0; c < data.features.cols(); ++c)
      std::fprintf(f, c == 0 ? "%.17g" : ",%.17g", data.features(i, c));
    std::fprintf(f, ",%g\n", data.labels[i]);
  }
  if (std::fclose(f) != 0) throw ValidationError("write failed for '" + path.string() + "'");
}

}  // namespace af
