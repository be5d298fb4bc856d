#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "gfmlab/autodiff/tensor.hpp"

namespace gfmlab::ad {

struct NamedTensor {
  std::string name;
  Tensor value;
  bool operator==(const NamedTensor&) const = default;
};

// Ordered named parameter collection. flatten() concatenates the tensors in
// declaration order; that order defines parameter indices everywhere.
class ParamSet {
 public:
  ParamSet() = default;
  explicit ParamSet(std::vector<NamedTensor> entries);

  void add(std::string name, Tensor value);
  const Tensor& get(std::string_view name) const;
  Tensor& get(std::string_view name);
  bool contains(std::string_view name) const;

  const std::vector<NamedTensor>& entries() const { return entries_; }
  std::size_t total_size() const;

  std::vector<double> flatten() const;
  // Same layout, new values; throws if the length differs.
  ParamSet unflatten(std::span<const double> flat) const;
  // Name of the tensor and the (row, col) that flat index k falls in.
  std::string describe_index(std::size_t k) const;

  bool same_layout(const ParamSet& other) const;
  bool operator==(const ParamSet&) const = default;

 private:
  std::vector<NamedTensor> entries_;
};

// Checkpoint text format: per tensor, a header line `name rows cols` and a
// line of whitespace-separated values printed with 17 significant digits.
void write_checkpoint(std::ostream& out, const ParamSet& params);
ParamSet read_checkpoint(std::istream& in, const std::string& source = "<stream>");
void save_checkpoint(const std::filesystem::path& path, const ParamSet& params);
ParamSet load_checkpoint(const std::filesystem::path& path);

// Shortest-round-trip-safe decimal (17 significant digits).
std::string format_double(double v);
// Strict parse of a full token; throws FormatError naming `where`.
double parse_double(std::string_view token, const std::string& where);

}  // namespace gfmlab::ad
