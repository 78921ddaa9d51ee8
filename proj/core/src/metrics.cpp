#include "gazespiral/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>

#include "gazespiral/parallel.hpp"

namespace gazespiral {

SymbolSequence SymbolSequence::from_string(const std::string& s, std::string id) {
  SymbolSequence out;
  out.recording_id = std::move(id);
  for (char c : s) out.items.push_back(static_cast<unsigned char>(c));
  return out;
}

DistanceMatrix DistanceMatrix::from_rows(const std::vector<std::vector<double>>& rows) {
  DistanceMatrix m(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != rows.size()) throw DataError("distance matrix is not square");
    for (std::size_t j = 0; j < rows.size(); ++j) m.values_[i * m.n_ + j] = rows[i][j];
  }
  for (std::size_t i = 0; i < m.n_; ++i) {
    if (m(i, i) != 0.0) throw DataError("distance matrix diagonal must be zero");
    for (std::size_t j = 0; j < m.n_; ++j) {
      if (!(m(i, j) >= 0.0)) throw DataError("distance matrix entries must be non-negative");
      if (m(i, j) != m(j, i)) throw DataError("distance matrix must be symmetric");
    }
  }
  return m;
}

void DistanceMatrix::set(std::size_t i, std::size_t j, double v) {
  values_[i * n_ + j] = v;
  values_[j * n_ + i] = v;
}

std::vector<std::vector<double>> DistanceMatrix::rows() const {
  std::vector<std::vector<double>> out(n_);
  for (std::size_t i = 0; i < n_; ++i) out[i].assign(values_.begin() + i * n_, values_.begin() + (i + 1) * n_);
  return out;
}

std::vector<double> DistanceMatrix::upper_triangle() const {
  std::vector<double> out;
  out.reserve(n_ * (n_ - 1) / 2);
  for (std::size_t i = 0; i < n_; ++i)
    for (std::size_t j = i + 1; j < n_; ++j) out.push_back((*this)(i, j));
  return out;
}

double cosine_distance(const FeatureVector& u, const FeatureVector& v) {
  if (u.size() != v.size())
    throw ParameterError("cosine_distance: dimension mismatch (" + std::to_string(u.size()) + " vs " +
                         std::to_string(v.size()) + ")");
  double dot = 0.0, nu = 0.0, nv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += u.values[i] * v.values[i];
    nu += u.values[i] * u.values[i];
    nv += v.values[i] * v.values[i];
  }
  if (nu <= 0.0 || nv <= 0.0) return 1.0;
  // sqrt(nu * nu) == nu exactly, so identical vectors land on 0.
  return std::clamp(1.0 - dot / std::sqrt(nu * nv), 0.0, 1.0);
}

namespace detail {

std::vector<std::vector<double>> levenshtein_table(std::size_t n, std::size_t m, const CostFn& sub, double gap) {
  if (!(gap > 0.0)) throw ParameterError("gap cost must be > 0");
  std::vector<std::vector<double>> d(n + 1, std::vector<double>(m + 1, 0.0));
  for (std::size_t i = 1; i <= n; ++i) d[i][0] = d[i - 1][0] + gap;
  for (std::size_t j = 1; j <= m; ++j) d[0][j] = d[0][j - 1] + gap;
  for (std::size_t i = 1; i <= n; ++i)
    for (std::size_t j = 1; j <= m; ++j)
      d[i][j] = std::min({d[i - 1][j - 1] + sub(i - 1, j - 1), d[i - 1][j] + gap, d[i][j - 1] + gap});
  return d;
}

double smith_waterman_score(std::size_t n, std::size_t m, const std::function<double(std::size_t, std::size_t)>& score,
                            double gap) {
  if (!(gap > 0.0)) throw ParameterError("gap cost must be > 0");
  std::vector<double> prev(m + 1, 0.0), cur(m + 1, 0.0);
  double best = 0.0;
  for (std::size_t i = 1; i <= n; ++i) {
    cur[0] = 0.0;
    for (std::size_t j = 1; j <= m; ++j) {
      cur[j] = std::max({0.0, prev[j - 1] + score(i - 1, j - 1), prev[j] - gap, cur[j - 1] - gap});
      best = std::max(best, cur[j]);
    }
    std::swap(prev, cur);
  }
  return best;
}

DtwResult dtw_path(std::size_t n, std::size_t m, const CostFn& cost) {
  // (cost, length) ordered by cost, then by longer length.
  auto better = [](const DtwResult& x, const DtwResult& y) {
    const double tol = 1e-12 * std::max({1.0, std::abs(x.cost), std::abs(y.cost)});
    if (x.cost < y.cost - tol) return true;
    if (y.cost < x.cost - tol) return false;
    return x.length > y.length;
  };
  std::vector<DtwResult> prev(m), cur(m);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      DtwResult best;
      bool have = false;
      auto consider = [&](const DtwResult& r) {
        if (!have || better(r, best)) best = r, have = true;
      };
      if (i > 0 && j > 0) consider(prev[j - 1]);
      if (i > 0) consider(prev[j]);
      if (j > 0) consider(cur[j - 1]);
      if (!have) best = DtwResult{0.0, 0};
      cur[j] = DtwResult{best.cost + cost(i, j), best.length + 1};
    }
    std::swap(prev, cur);
  }
  return prev[m - 1];
}

}  // namespace detail

namespace {

void require_non_empty(std::size_t n, std::size_t m) {
  if (n == 0 || m == 0) throw ParameterError("alignment of an empty sequence");
}

void require_same_dim(const FeatureSequence& a, const FeatureSequence& b) {
  const std::size_t dim = a.items.front().size();
  for (const auto* s : {&a, &b})
    for (const auto& v : s->items)
      if (v.size() != dim) throw ParameterError("feature sequences have mixed dimensions");
}

CostFn feature_cost(const FeatureSequence& a, const FeatureSequence& b) {
  return [&a, &b](std::size_t i, std::size_t j) { return cosine_distance(a.items[i], b.items[j]); };
}

CostFn symbol_cost(const SymbolSequence& a, const SymbolSequence& b) {
  return [&a, &b](std::size_t i, std::size_t j) { return a.items[i] == b.items[j] ? 0.0 : 1.0; };
}

LocalAlignment local_from_score(double score, std::size_t n, std::size_t m) {
  return {score, std::clamp(1.0 - score / static_cast<double>(std::min(n, m)), 0.0, 1.0)};
}

}  // namespace

double levenshtein(const FeatureSequence& a, const FeatureSequence& b, double gap) {
  require_non_empty(a.size(), b.size());
  require_same_dim(a, b);
  return detail::levenshtein_table(a.size(), b.size(), feature_cost(a, b), gap)[a.size()][b.size()];
}

double levenshtein(const SymbolSequence& a, const SymbolSequence& b, double gap) {
  require_non_empty(a.size(), b.size());
  return detail::levenshtein_table(a.size(), b.size(), symbol_cost(a, b), gap)[a.size()][b.size()];
}

double levenshtein_normalized(const FeatureSequence& a, const FeatureSequence& b, double gap) {
  return levenshtein(a, b, gap) / static_cast<double>(std::max(a.size(), b.size()));
}

double levenshtein_normalized(const SymbolSequence& a, const SymbolSequence& b, double gap) {
  return levenshtein(a, b, gap) / static_cast<double>(std::max(a.size(), b.size()));
}

LocalAlignment smith_waterman(const FeatureSequence& a, const FeatureSequence& b, double gap) {
  require_non_empty(a.size(), b.size());
  require_same_dim(a, b);
  const double s = detail::smith_waterman_score(
      a.size(), b.size(),
      [&](std::size_t i, std::size_t j) { return 1.0 - 2.0 * cosine_distance(a.items[i], b.items[j]); }, gap);
  return local_from_score(s, a.size(), b.size());
}

LocalAlignment smith_waterman(const SymbolSequence& a, const SymbolSequence& b, double gap) {
  require_non_empty(a.size(), b.size());
  const double s = detail::smith_waterman_score(
      a.size(), b.size(), [&](std::size_t i, std::size_t j) { return a.items[i] == b.items[j] ? 1.0 : -1.0; }, gap);
  return local_from_score(s, a.size(), b.size());
}

detail::DtwResult dtw_raw(const FeatureSequence& a, const FeatureSequence& b) {
  require_non_empty(a.size(), b.size());
  require_same_dim(a, b);
  return detail::dtw_path(a.size(), b.size(), feature_cost(a, b));
}

double dtw(const FeatureSequence& a, const FeatureSequence& b) {
  const auto r = dtw_raw(a, b);
  return r.cost / static_cast<double>(r.length);
}

double dtw(const SymbolSequence& a, const SymbolSequence& b) {
  require_non_empty(a.size(), b.size());
  const auto r = detail::dtw_path(a.size(), b.size(), symbol_cost(a, b));
  return r.cost / static_cast<double>(r.length);
}

const char* to_string(AlignmentMethod m) {
  switch (m) {
    case AlignmentMethod::Levenshtein: return "levenshtein";
    case AlignmentMethod::SmithWaterman: return "smith_waterman";
    case AlignmentMethod::Dtw: return "dtw";
  }
  return "?";
}

AlignmentMethod alignment_method_from_string(const std::string& s) {
  if (s == "levenshtein") return AlignmentMethod::Levenshtein;
  if (s == "smith_waterman" || s == "smith-waterman") return AlignmentMethod::SmithWaterman;
  if (s == "dtw") return AlignmentMethod::Dtw;
  throw ParameterError("unknown alignment method '" + s + "'");
}

double sequence_distance(const ScanpathSequence& a, const ScanpathSequence& b, AlignmentMethod method,
                         const AlignmentOptions& options) {
  if (a.index() != b.index()) throw ParameterError("cannot align feature and symbol sequences");
  if (const auto* fa = std::get_if<FeatureSequence>(&a)) {
    const auto& fb = std::get<FeatureSequence>(b);
    switch (method) {
      case AlignmentMethod::Levenshtein: return levenshtein_normalized(*fa, fb, options.feature_gap);
      case AlignmentMethod::SmithWaterman: return smith_waterman(*fa, fb, options.feature_gap).distance;
      case AlignmentMethod::Dtw: return dtw(*fa, fb);
    }
  }
  const auto& sa = std::get<SymbolSequence>(a);
  const auto& sb = std::get<SymbolSequence>(b);
  switch (method) {
    case AlignmentMethod::Levenshtein: return levenshtein_normalized(sa, sb, options.symbol_gap);
    case AlignmentMethod::SmithWaterman: return smith_waterman(sa, sb, options.symbol_gap).distance;
    case AlignmentMethod::Dtw: return dtw(sa, sb);
  }
  return 0.0;
}

DistanceMatrix pairwise_matrix(std::span<const ScanpathSequence> seqs, AlignmentMethod method,
                               const AlignmentOptions& options) {
  if (seqs.size() < 2) throw ParameterError("pairwise_matrix needs at least two sequences");
  for (const auto& s : seqs)
    if (s.index() != seqs.front().index()) throw ParameterError("mixed feature and symbol sequences");
  const std::size_t n = seqs.size();
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) pairs.emplace_back(i, j);
  std::vector<double> values(pairs.size());
  parallel_for(pairs.size(), [&](std::size_t p) {
    const auto [i, j] = pairs[p];
    // Fixed argument order (lower index first) keeps the matrix exactly symmetric.
    values[p] = sequence_distance(seqs[i], seqs[j], method, options);
  });
  DistanceMatrix m(n);
  for (std::size_t p = 0; p < pairs.size(); ++p) m.set(pairs[p].first, pairs[p].second, values[p]);
  return m;
}

double pearson(const DistanceMatrix& m1, const DistanceMatrix& m2) {
  if (m1.size() != m2.size()) throw ParameterError("pearson: matrix sizes differ");
  if (m1.size() < 3) throw ParameterError("pearson: need n >= 3");
  const auto x = m1.upper_triangle();
  const auto y = m2.upper_triangle();
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) mx += x[i], my += y[i];
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx <= 0.0 || syy <= 0.0) throw DataError("degenerate matrix");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::string distance_matrix_to_json(const DistanceMatrix& m, const std::string& method,
                                    const AlignmentOptions& options) {
  nlohmann::ordered_json j;
  j["n"] = m.size();
  j["method"] = method;
  j["options"] = {{"feature_gap", options.feature_gap}, {"symbol_gap", options.symbol_gap}};
  j["values"] = m.rows();
  return j.dump();
}

LoadedMatrix distance_matrix_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    LoadedMatrix out;
    out.matrix = DistanceMatrix::from_rows(j.at("values").get<std::vector<std::vector<double>>>());
    if (out.matrix.size() != j.at("n").get<std::size_t>()) throw ParseError("distance matrix: n mismatch");
    out.method = j.at("method").get<std::string>();
    if (j.contains("options")) {
      out.options.feature_gap = j["options"].value("feature_gap", kFeatureGap);
      out.options.symbol_gap = j["options"].value("symbol_gap", kSymbolGap);
    }
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("distance matrix json: ") + e.what());
  }
}

}  // namespace gazespiral
