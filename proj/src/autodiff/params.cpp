#include "gfmlab/autodiff/params.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "gfmlab/errors.hpp"

namespace gfmlab::ad {

ParamSet::ParamSet(std::vector<NamedTensor> entries) : entries_(std::move(entries)) {}

void ParamSet::add(std::string name, Tensor value) {
  if (contains(name)) throw ContractError("duplicate parameter name '" + name + "'");
  entries_.push_back({std::move(name), std::move(value)});
}

bool ParamSet::contains(std::string_view name) const {
  for (const auto& e : entries_)
    if (e.name == name) return true;
  return false;
}

const Tensor& ParamSet::get(std::string_view name) const {
  for (const auto& e : entries_)
    if (e.name == name) return e.value;
  throw ContractError("no parameter named '" + std::string(name) + "'");
}

Tensor& ParamSet::get(std::string_view name) {
  for (auto& e : entries_)
    if (e.name == name) return e.value;
  throw ContractError("no parameter named '" + std::string(name) + "'");
}

std::size_t ParamSet::total_size() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.value.size();
  return n;
}

std::vector<double> ParamSet::flatten() const {
  std::vector<double> flat;
  flat.reserve(total_size());
  for (const auto& e : entries_) {
    auto v = e.value.values();
    flat.insert(flat.end(), v.begin(), v.end());
  }
  return flat;
}

ParamSet ParamSet::unflatten(std::span<const double> flat) const {
  if (flat.size() != total_size()) {
    throw ContractError("unflatten: expected " + std::to_string(total_size()) + " values, got " +
                        std::to_string(flat.size()));
  }
  ParamSet out = *this;
  std::size_t offset = 0;
  for (auto& e : out.entries_) {
    auto dst = e.value.values();
    std::copy(flat.begin() + offset, flat.begin() + offset + dst.size(), dst.begin());
    offset += dst.size();
  }
  return out;
}

std::string ParamSet::describe_index(std::size_t k) const {
  std::size_t offset = 0;
  for (const auto& e : entries_) {
    if (k < offset + e.value.size()) {
      const std::size_t local = k - offset;
      const std::size_t cols = e.value.cols();
      return e.name + "[" + std::to_string(local / cols) + "][" + std::to_string(local % cols) + "]";
    }
    offset += e.value.size();
  }
  throw ContractError("parameter index out of range");
}

bool ParamSet::same_layout(const ParamSet& other) const {
  if (entries_.size() != other.entries_.size()) return false;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i].name != other.entries_[i].name ||
        !entries_[i].value.same_shape(other.entries_[i].value)) {
      return false;
    }
  }
  return true;
}

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view token, const std::string& where) {
  double v = 0.0;
  const char* first = token.data();
  const char* last = token.data() + token.size();
  if (!token.empty() && *first == '+') ++first;
  auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc() || res.ptr != last) {
    throw FormatError(where + ": cannot parse number '" + std::string(token) + "'");
  }
  return v;
}

void write_checkpoint(std::ostream& out, const ParamSet& params) {
  for (const auto& e : params.entries()) {
    out << e.name << ' ' << e.value.rows() << ' ' << e.value.cols() << '\n';
    bool first = true;
    for (double v : e.value.values()) {
      if (!first) out << ' ';
      out << format_double(v);
      first = false;
    }
    out << '\n';
  }
}

ParamSet read_checkpoint(std::istream& in, const std::string& source) {
  ParamSet params;
  std::string header;
  std::size_t line_no = 0;
  while (std::getline(in, header)) {
    ++line_no;
    if (header.empty()) continue;
    const std::string where = source + ":" + std::to_string(line_no);
    std::istringstream hs(header);
    std::string name;
    std::size_t rows = 0, cols = 0;
    std::string extra;
    if (!(hs >> name >> rows >> cols) || (hs >> extra)) {
      throw FormatError(where + ": expected 'name rows cols'");
    }
    std::string body;
    if (!std::getline(in, body)) throw FormatError(where + ": missing value line for " + name);
    ++line_no;
    const std::string body_where = source + ":" + std::to_string(line_no);
    std::istringstream bs(body);
    std::vector<double> values;
    values.reserve(rows * cols);
    std::string tok;
    while (bs >> tok) values.push_back(parse_double(tok, body_where));
    if (values.size() != rows * cols) {
      throw FormatError(body_where + ": expected " + std::to_string(rows * cols) +
                        " values for " + name + ", got " + std::to_string(values.size()));
    }
    params.add(name, Tensor(rows, cols, std::move(values)));
  }
  return params;
}

void save_checkpoint(const std::filesystem::path& path, const ParamSet& params) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path.string());
  write_checkpoint(out, params);
}

ParamSet load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  return read_checkpoint(in, path.string());
}

}  // namespace gfmlab::ad
