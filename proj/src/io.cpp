#include "sbtk/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "sbtk/errors.hpp"

namespace sbtk {

namespace {

std::string position_message(const std::string& path, int line, int column,
                             const std::string& what) {
  std::ostringstream msg;
  msg << path << ":" << line << ":" << column << ": " << what;
  return msg.str();
}

// Splits on whitespace, reporting the 1-based column of each token.
std::vector<std::pair<std::string, int>> tokenize(const std::string& line) {
  std::vector<std::pair<std::string, int>> tokens;
  size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (i >= line.size()) break;
    const size_t start = i;
    while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    tokens.emplace_back(line.substr(start, i - start), static_cast<int>(start) + 1);
  }
  return tokens;
}

double parse_double(const std::string& path, int line, const std::pair<std::string, int>& tok) {
  try {
    size_t used = 0;
    const double v = std::stod(tok.first, &used);
    if (used != tok.first.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ParseError(path, line, tok.second, "expected a number, got '" + tok.first + "'");
  }
}

long parse_int(const std::string& path, int line, const std::pair<std::string, int>& tok) {
  long v = 0;
  const auto* begin = tok.first.data();
  const auto* end = begin + tok.first.size();
  const auto res = std::from_chars(begin, end, v);
  if (res.ec != std::errc() || res.ptr != end)
    throw ParseError(path, line, tok.second, "expected an integer, got '" + tok.first + "'");
  return v;
}

}  // namespace

ParseError::ParseError(const std::string& path, int line, int column, const std::string& what)
    : std::runtime_error(position_message(path, line, column, what)), line_(line),
      column_(column) {}

PartialTensor read_tensor(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ParseError(path, 0, 0, "cannot open file");
  std::string line;
  int line_no = 0;

  PartialTensor t;
  // header
  while (std::getline(is, line)) {
    ++line_no;
    auto tokens = tokenize(line);
    if (tokens.empty()) continue;
    if (tokens[0].first != "dims")
      throw ParseError(path, line_no, tokens[0].second, "expected 'dims J1 J2 ... JP'");
    if (tokens.size() < 3)
      throw ParseError(path, line_no, tokens[0].second, "tensor order must be at least 2");
    for (size_t i = 1; i < tokens.size(); ++i) {
      const long d = parse_int(path, line_no, tokens[i]);
      if (d < 1) throw ParseError(path, line_no, tokens[i].second, "dimensions must be positive");
      t.dims.push_back(static_cast<int>(d));
    }
    break;
  }
  if (t.dims.empty()) throw ParseError(path, line_no, 1, "missing 'dims' header");

  const int order = t.order();
  std::vector<Eigen::VectorXi> index_rows;
  std::vector<double> values;
  while (std::getline(is, line)) {
    ++line_no;
    auto tokens = tokenize(line);
    if (tokens.empty()) continue;
    if (static_cast<int>(tokens.size()) != order + 1)
      throw ParseError(path, line_no, tokens[0].second,
                       "expected " + std::to_string(order) + " indices and one value");
    Eigen::VectorXi idx(order);
    for (int p = 0; p < order; ++p) {
      const long v = parse_int(path, line_no, tokens[p]);
      if (v < 0 || v >= t.dims[p])
        throw ParseError(path, line_no, tokens[p].second,
                         "index out of range for mode " + std::to_string(p));
      idx[p] = static_cast<int>(v);
    }
    index_rows.push_back(idx);
    values.push_back(parse_double(path, line_no, tokens[order]));
  }
  if (values.empty()) throw ParseError(path, line_no, 1, "tensor has no observed entries");

  t.indices.resize(index_rows.size(), order);
  t.values.resize(values.size());
  for (size_t i = 0; i < index_rows.size(); ++i) {
    t.indices.row(static_cast<int>(i)) = index_rows[i].transpose();
    t.values[static_cast<int>(i)] = values[i];
  }
  t.validate();
  return t;
}

void write_tensor(const PartialTensor& tensor, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw DomainError("cannot open " + path + " for writing");
  os << "dims";
  for (int d : tensor.dims) os << " " << d;
  os << "\n";
  os.precision(17);
  for (int o = 0; o < tensor.observed(); ++o) {
    for (int p = 0; p < tensor.order(); ++p) os << tensor.indices(o, p) << " ";
    os << tensor.values[o] << "\n";
  }
  if (!os) throw NumericalError("failed writing tensor to " + path);
}

std::string read_text_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DomainError("cannot open " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream os(path);
  if (!os) throw DomainError("cannot open " + path + " for writing");
  os << content;
  if (!os) throw NumericalError("failed writing " + path);
}

}  // namespace sbtk
