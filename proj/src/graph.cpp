#include "spherad/graph.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <utility>

#include "spherad/error.hpp"
#include "spherad/number.hpp"

namespace spherad {

namespace {

constexpr double kSymmetryTol = 1e-9;
const char* kEdgeListHeader = "# edgelist n=";

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open file: " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  return lines;
}

Tensor parse_matrix(const std::vector<std::string>& lines,
                    const std::string& path) {
  if (lines.empty()) throw DataError("empty matrix file: " + path);
  const int rows = static_cast<int>(lines.size());
  const auto first = split_csv_line(lines[0]);
  const int cols = static_cast<int>(first.size());
  Tensor t(rows, cols);
  for (int i = 0; i < rows; ++i) {
    const auto cells = split_csv_line(lines[i]);
    if (static_cast<int>(cells.size()) != cols)
      throw DataError("ragged row " + std::to_string(i) + " in " + path +
                      ": expected " + std::to_string(cols) + " columns, got " +
                      std::to_string(cells.size()));
    for (int j = 0; j < cols; ++j)
      t.at(i, j) = parse_double(cells[j], path + " row " + std::to_string(i));
  }
  if (!all_finite(t)) throw DataError("non-finite entry in " + path);
  return t;
}

Tensor parse_edge_list(const std::vector<std::string>& lines,
                       const std::string& path) {
  const std::string& header = lines[0];
  const long n = parse_long(header.substr(std::strlen(kEdgeListHeader)),
                            path + " header");
  if (n <= 0) throw DataError("edge list node count must be positive in " + path);
  Tensor w(static_cast<int>(n), static_cast<int>(n));
  Tensor seen(static_cast<int>(n), static_cast<int>(n));
  for (std::size_t k = 1; k < lines.size(); ++k) {
    if (lines[k].empty()) continue;
    const auto cells = split_csv_line(lines[k]);
    const std::string where = path + " line " + std::to_string(k + 1);
    if (cells.size() != 3)
      throw DataError("expected 'i,j,w' in " + where);
    const long i = parse_long(cells[0], where);
    const long j = parse_long(cells[1], where);
    const double weight = parse_double(cells[2], where);
    if (i < 0 || i >= n || j < 0 || j >= n)
      throw DataError("edge endpoint out of range in " + where);
    if (i == j)
      throw DataError("self loop on node " + std::to_string(i) + " in " + where);
    const int a = static_cast<int>(i), b = static_cast<int>(j);
    if (seen.at(a, b) != 0.0)
      throw DataError("duplicate edge (" + std::to_string(i) + "," +
                      std::to_string(j) + ") in " + path);
    seen.at(a, b) = seen.at(b, a) = 1.0;
    w.at(a, b) = w.at(b, a) = weight;
  }
  return w;
}

void check_and_symmetrize(Tensor& w, const std::string& origin) {
  if (w.rows != w.cols)
    throw DataError("adjacency must be square, got " + w.shape_str() +
                    (origin.empty() ? "" : " in " + origin));
  double worst = 0.0;
  int wi = 0, wj = 0;
  for (int i = 0; i < w.rows; ++i) {
    for (int j = i + 1; j < w.cols; ++j) {
      const double d = std::abs(w.at(i, j) - w.at(j, i));
      if (d > worst) {
        worst = d;
        wi = i;
        wj = j;
      }
    }
  }
  if (worst > kSymmetryTol)
    throw DataError("asymmetric adjacency" +
                    (origin.empty() ? std::string() : " in " + origin) +
                    ": entries (" + std::to_string(wi) + "," +
                    std::to_string(wj) + ")=" + repr_double(w.at(wi, wj)) +
                    " and (" + std::to_string(wj) + "," + std::to_string(wi) +
                    ")=" + repr_double(w.at(wj, wi)) + " differ by " +
                    repr_double(worst));
  for (int i = 0; i < w.rows; ++i)
    for (int j = i + 1; j < w.cols; ++j)
      w.at(i, j) = w.at(j, i) = 0.5 * (w.at(i, j) + w.at(j, i));
}

}  // namespace

Tensor profile_features(const Tensor& w) {
  Tensor x = w;
  row_normalize_inplace(x);
  return x;
}

Graph make_graph(Tensor w) {
  Graph g;
  check_and_symmetrize(w, "");
  g.n = w.rows;
  g.x = profile_features(w);
  g.w = std::move(w);
  g.x_is_profile = true;
  validate_graph(g);
  return g;
}

Graph make_graph(Tensor w, Tensor x) {
  Graph g;
  check_and_symmetrize(w, "");
  g.n = w.rows;
  g.w = std::move(w);
  g.x = std::move(x);
  g.x_is_profile = false;
  validate_graph(g);
  return g;
}

void validate_graph(const Graph& g) {
  if (g.w.rows != g.n || g.w.cols != g.n)
    throw DataError("adjacency shape " + g.w.shape_str() +
                    " does not match node count " + std::to_string(g.n));
  if (g.x.rows != g.n)
    throw DataError("feature matrix has " + std::to_string(g.x.rows) +
                    " rows for " + std::to_string(g.n) + " nodes");
  if (!all_finite(g.w) || !all_finite(g.x))
    throw DataError("non-finite entry in graph data");
  for (int i = 0; i < g.n; ++i) {
    if (g.w.at(i, i) != 0.0)
      throw DataError("nonzero self weight at node " + std::to_string(i));
    for (int j = 0; j < g.n; ++j) {
      if (g.w.at(i, j) < 0.0)
        throw DataError("negative weight at (" + std::to_string(i) + "," +
                        std::to_string(j) + ")");
      if (std::abs(g.w.at(i, j) - g.w.at(j, i)) > 1e-12)
        throw DataError("asymmetric adjacency at (" + std::to_string(i) + "," +
                        std::to_string(j) + ")");
    }
  }
}

Graph load_graph(const std::string& adjacency_path,
                 const std::optional<std::string>& features_path) {
  const auto lines = read_lines(adjacency_path);
  if (lines.empty()) throw DataError("empty adjacency file: " + adjacency_path);
  Tensor w;
  if (lines[0].rfind(kEdgeListHeader, 0) == 0) {
    w = parse_edge_list(lines, adjacency_path);
  } else {
    w = parse_matrix(lines, adjacency_path);
  }
  check_and_symmetrize(w, adjacency_path);
  Graph g;
  g.n = w.rows;
  g.w = std::move(w);
  if (features_path) {
    g.x = parse_matrix(read_lines(*features_path), *features_path);
    g.x_is_profile = false;
  } else {
    g.x = profile_features(g.w);
    g.x_is_profile = true;
  }
  validate_graph(g);
  return g;
}

void save_matrix_csv(const Tensor& t, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write file: " + path);
  for (int i = 0; i < t.rows; ++i) {
    for (int j = 0; j < t.cols; ++j) {
      if (j) out << ',';
      out << repr_double(t.at(i, j));
    }
    out << '\n';
  }
  if (!out) throw DataError("write failed: " + path);
}

Tensor load_matrix_csv(const std::string& path) {
  return parse_matrix(read_lines(path), path);
}

void save_graph(const Graph& g, const std::string& adjacency_path,
                const std::optional<std::string>& features_path) {
  validate_graph(g);
  save_matrix_csv(g.w, adjacency_path);
  if (features_path) save_matrix_csv(g.x, *features_path);
}

Graph normalize_adjacency(const Graph& g) {
  double max_row = 0.0;
  for (int i = 0; i < g.n; ++i) {
    double s = 0.0;
    for (int j = 0; j < g.n; ++j) s += g.w.at(i, j);
    max_row = std::max(max_row, s);
  }
  Graph out = g;
  if (max_row > 0.0) {
    const double inv = 1.0 / max_row;
    for (double& v : out.w.v) v *= inv;
  }
  return out;
}

Graph permute_graph(const Graph& g, const std::vector<int>& perm) {
  if (static_cast<int>(perm.size()) != g.n)
    throw DataError("permutation length " + std::to_string(perm.size()) +
                    " does not match node count " + std::to_string(g.n));
  std::vector<char> hit(g.n, 0);
  for (int p : perm) {
    if (p < 0 || p >= g.n || hit[p])
      throw DataError("permutation is not a bijection on 0.." +
                      std::to_string(g.n - 1));
    hit[p] = 1;
  }
  Graph out;
  out.n = g.n;
  out.w = Tensor(g.n, g.n);
  out.x = Tensor(g.x.rows, g.x.cols);
  out.x_is_profile = g.x_is_profile;
  for (int i = 0; i < g.n; ++i) {
    for (int j = 0; j < g.n; ++j) out.w.at(perm[i], perm[j]) = g.w.at(i, j);
    for (int j = 0; j < g.x.cols; ++j) out.x.at(perm[i], j) = g.x.at(i, j);
  }
  return out;
}

std::vector<int> random_permutation(int n, Rng& rng) {
  std::vector<int> perm(n);
  for (int i = 0; i < n; ++i) perm[i] = i;
  for (int i = n - 1; i > 0; --i) {
    const int j = static_cast<int>(rng.next_u64() % (i + 1));
    std::swap(perm[i], perm[j]);
  }
  return perm;
}

PartialMask full_mask(int n) {
  PartialMask m;
  m.m = Tensor::ones(n, n);
  return m;
}

PartialMask random_pair_mask(int n, double hide_fraction, Rng& rng) {
  if (!(hide_fraction >= 0.0 && hide_fraction <= 1.0))
    throw DataError("hide fraction must lie in [0, 1]");
  std::vector<std::pair<int, int>> pairs;
  pairs.reserve(static_cast<std::size_t>(n) * (n - 1) / 2);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) pairs.emplace_back(i, j);
  for (int i = static_cast<int>(pairs.size()) - 1; i > 0; --i) {
    const int j = static_cast<int>(rng.next_u64() % (i + 1));
    std::swap(pairs[i], pairs[j]);
  }
  const auto hidden = static_cast<std::size_t>(
      std::llround(hide_fraction * static_cast<double>(pairs.size())));
  PartialMask m = full_mask(n);
  for (std::size_t k = 0; k < hidden && k < pairs.size(); ++k) {
    m.m.at(pairs[k].first, pairs[k].second) = 0.0;
    m.m.at(pairs[k].second, pairs[k].first) = 0.0;
  }
  return m;
}

void validate_mask(const PartialMask& mask, int n) {
  if (mask.m.rows != n || mask.m.cols != n)
    throw DataError("mask shape " + mask.m.shape_str() +
                    " does not match node count " + std::to_string(n));
  for (int i = 0; i < n; ++i) {
    if (mask.m.at(i, i) != 1.0)
      throw DataError("mask diagonal must be 1 (self weights are known zero)");
    for (int j = 0; j < n; ++j) {
      const double v = mask.m.at(i, j);
      if (v != 0.0 && v != 1.0)
        throw DataError("mask entries must be 0 or 1, got " + repr_double(v) +
                        " at (" + std::to_string(i) + "," + std::to_string(j) +
                        ")");
      if (v != mask.m.at(j, i))
        throw DataError("mask must be symmetric, mismatch at (" +
                        std::to_string(i) + "," + std::to_string(j) + ")");
    }
  }
}

PartialGraph apply_mask(const Graph& g, const PartialMask& mask) {
  validate_graph(g);
  validate_mask(mask, g.n);
  PartialGraph pg;
  pg.mask = mask.m;
  pg.g = g;
  for (int k = 0; k < g.w.size(); ++k)
    if (mask.m.v[k] == 0.0) pg.g.w.v[k] = 0.0;
  if (g.x_is_profile) pg.g.x = profile_features(pg.g.w);
  return pg;
}

}  // namespace spherad
