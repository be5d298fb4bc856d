#include "gfmlab/graphcore/graph_io.hpp"

#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "gfmlab/autodiff/params.hpp"
#include "gfmlab/errors.hpp"
#include "gfmlab/graphcore/text.hpp"

namespace gfmlab {

namespace fs = std::filesystem;
using ad::format_double;
using ad::parse_double;

namespace {

std::ifstream open_in(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw FormatError("cannot open " + p.string());
  return in;
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream out(p);
  if (!out) throw FormatError("cannot write " + p.string());
  return out;
}

}  // namespace

void save_graph(const Graph& g, const fs::path& dir) {
  validate(g);
  fs::create_directories(dir);
  const std::size_t n = g.num_nodes(), d = g.feature_dim();
  {
    auto out = open_out(dir / "meta");
    out << "name = " << g.name << '\n'
        << "num_nodes = " << n << '\n'
        << "feature_dim = " << d << '\n'
        << "num_classes = " << g.num_classes << '\n'
        << "domain = " << g.domain << '\n';
  }
  {
    auto out = open_out(dir / "nodes.csv");
    out << "node_id,label";
    for (std::size_t k = 0; k < d; ++k) out << ",f" << k;
    out << '\n';
    for (std::size_t i = 0; i < n; ++i) {
      out << i << ',' << (g.has_labels() ? g.labels[i] : kUnlabeled);
      for (std::size_t k = 0; k < d; ++k) out << ',' << format_double(g.x(i, k));
      out << '\n';
    }
  }
  {
    auto out = open_out(dir / "edges.csv");
    out << "src,dst,weight\n";
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j)
        if (g.a(i, j) != 0.0) out << i << ',' << j << ',' << format_double(g.a(i, j)) << '\n';
  }
}

Graph load_graph(const fs::path& dir) {
  Graph g;
  std::map<std::string, std::string> meta;
  {
    const fs::path p = dir / "meta";
    auto in = open_in(p);
    std::string line;
    std::size_t no = 0;
    while (std::getline(in, line)) {
      ++no;
      if (trim(line).empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos) {
        throw FormatError(p.string() + ":" + std::to_string(no) + ": expected 'key = value'");
      }
      meta[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    for (const char* key : {"name", "num_nodes", "feature_dim", "num_classes", "domain"}) {
      if (!meta.count(key)) throw FormatError(p.string() + ": missing key '" + key + "'");
    }
  }
  const std::string meta_where = (dir / "meta").string();
  const long long n_ll = parse_int(meta["num_nodes"], meta_where);
  const long long d_ll = parse_int(meta["feature_dim"], meta_where);
  const long long c_ll = parse_int(meta["num_classes"], meta_where);
  if (n_ll < 0 || d_ll < 0 || c_ll < 0) throw FormatError(meta_where + ": negative size");
  const auto n = static_cast<std::size_t>(n_ll);
  const auto d = static_cast<std::size_t>(d_ll);
  g.name = meta["name"];
  g.domain = meta["domain"];
  g.num_classes = static_cast<int>(c_ll);
  g.x = Tensor(n, d);
  g.a = Tensor(n, n);
  g.labels.assign(n, kUnlabeled);

  {
    const fs::path p = dir / "nodes.csv";
    auto in = open_in(p);
    std::string line;
    std::size_t no = 0;
    std::vector<char> seen(n, 0);
    std::size_t rows = 0;
    bool any_label = false;
    while (std::getline(in, line)) {
      ++no;
      const std::string where = p.string() + ":" + std::to_string(no);
      if (no == 1) {
        if (split_csv(line).size() != d + 2) throw FormatError(where + ": header must have " + std::to_string(d + 2) + " columns");
        continue;
      }
      if (trim(line).empty()) continue;
      const auto f = split_csv(line);
      if (f.size() != d + 2) {
        throw FormatError(where + ": expected " + std::to_string(d + 2) + " columns, got " +
                          std::to_string(f.size()));
      }
      const long long id = parse_int(trim(f[0]), where);
      if (id < 0 || static_cast<std::size_t>(id) >= n) throw FormatError(where + ": node_id out of range");
      const auto v = static_cast<std::size_t>(id);
      if (seen[v]) throw FormatError(where + ": duplicate node_id " + std::to_string(v));
      seen[v] = 1;
      const long long y = parse_int(trim(f[1]), where);
      if (y != kUnlabeled && (y < 0 || y >= c_ll)) {
        throw FormatError(where + ": label " + std::to_string(y) + " out of range [0, " +
                          std::to_string(c_ll) + ")");
      }
      g.labels[v] = static_cast<int>(y);
      any_label = any_label || y != kUnlabeled;
      for (std::size_t k = 0; k < d; ++k) g.x(v, k) = parse_double(trim(f[k + 2]), where);
      ++rows;
    }
    if (rows != n) {
      throw FormatError(p.string() + ": expected " + std::to_string(n) + " node rows, got " +
                        std::to_string(rows));
    }
    if (!any_label) g.labels.clear();
  }

  {
    const fs::path p = dir / "edges.csv";
    auto in = open_in(p);
    std::string line;
    std::size_t no = 0;
    while (std::getline(in, line)) {
      ++no;
      if (no == 1) continue;
      if (trim(line).empty()) continue;
      const std::string where = p.string() + ":" + std::to_string(no);
      const auto f = split_csv(line);
      if (f.size() != 2 && f.size() != 3) {
        throw FormatError(where + ": expected src,dst[,weight]");
      }
      const long long s = parse_int(trim(f[0]), where);
      const long long t = parse_int(trim(f[1]), where);
      if (s < 0 || t < 0 || static_cast<std::size_t>(s) >= n || static_cast<std::size_t>(t) >= n) {
        throw FormatError(where + ": endpoint out of range");
      }
      if (s == t) throw FormatError(where + ": self loop");
      const double w = f.size() == 3 ? parse_double(trim(f[2]), where) : 1.0;
      if (!(w > 0.0)) throw FormatError(where + ": edge weight must be positive");
      const auto u = static_cast<std::size_t>(s), v = static_cast<std::size_t>(t);
      if (g.a(u, v) != 0.0) {
        if (g.a(u, v) != w) {
          throw FormatError(where + ": asymmetric edge " + std::to_string(u) + "-" +
                            std::to_string(v) + " (conflicting weights; graph must be undirected)");
        }
        throw FormatError(where + ": edge " + std::to_string(u) + "-" + std::to_string(v) +
                          " listed more than once");
      }
      g.a(u, v) = g.a(v, u) = w;
    }
  }
  validate(g);
  return g;
}

}  // namespace gfmlab
