#pragma once

// Dense kernels: SVD, PCA, ridge / least squares, k-nearest neighbours and
// balanced assignment. All functions are pure.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "dcsim/error.hpp"
#include "dcsim/matrix.hpp"

namespace dcsim {

struct TruncatedSVDResult {
  DataMatrix U;                        // rows x rank
  std::vector<double> singular_values;  // nonincreasing
  DataMatrix Vt;                       // rank x cols

  std::size_t rank() const { return singular_values.size(); }

  DataMatrix reconstruct() const {
    DataMatrix scaled = U;
    for (std::size_t r = 0; r < scaled.rows(); ++r)
      for (std::size_t c = 0; c < scaled.cols(); ++c) scaled(r, c) *= singular_values[c];
    return matmul(scaled, Vt);
  }
};

namespace detail {

// Column-major working copy for the one-sided Jacobi sweeps.
using Columns = std::vector<std::vector<double>>;

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Thin SVD of a tall matrix (rows >= cols) by Hestenes one-sided Jacobi.
// Returns all min(rows, cols) triplets sorted by singular value.
inline TruncatedSVDResult jacobi_svd_tall(const DataMatrix& a) {
  const std::size_t m = a.rows();
  const std::size_t n = a.cols();
  Columns u(n, std::vector<double>(m));
  Columns v(n, std::vector<double>(n, 0.0));
  for (std::size_t c = 0; c < n; ++c) {
    for (std::size_t r = 0; r < m; ++r) u[c][r] = a(r, c);
    v[c][c] = 1.0;
  }

  constexpr double tol = 1e-15;
  constexpr int max_sweeps = 80;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    bool rotated = false;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double alpha = dot(u[p], u[p]);
        const double beta = dot(u[q], u[q]);
        const double gamma = dot(u[p], u[q]);
        if (alpha == 0.0 || beta == 0.0) continue;
        if (std::abs(gamma) <= tol * std::sqrt(alpha * beta)) continue;
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double cs = 1.0 / std::sqrt(1.0 + t * t);
        const double sn = cs * t;
        for (std::size_t r = 0; r < m; ++r) {
          const double up = u[p][r];
          const double uq = u[q][r];
          u[p][r] = cs * up - sn * uq;
          u[q][r] = sn * up + cs * uq;
        }
        for (std::size_t r = 0; r < n; ++r) {
          const double vp = v[p][r];
          const double vq = v[q][r];
          v[p][r] = cs * vp - sn * vq;
          v[q][r] = sn * vp + cs * vq;
        }
      }
    }
    if (!rotated) break;
  }

  std::vector<double> sigma(n);
  for (std::size_t c = 0; c < n; ++c) sigma[c] = std::sqrt(dot(u[c], u[c]));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return sigma[x] > sigma[y]; });

  const double largest = n ? sigma[order[0]] : 0.0;
  const double negligible = largest * static_cast<double>(std::max(m, n)) *
                            std::numeric_limits<double>::epsilon();

  TruncatedSVDResult out{DataMatrix(m, n), std::vector<double>(n), DataMatrix(n, n)};
  Columns basis;  // accepted left vectors, for completing null directions
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t c = order[k];
    std::vector<double> left = u[c];
    double s = sigma[c];
    if (s > negligible && s > 0.0) {
      for (auto& x : left) x /= s;
    } else {
      // Zero singular value: pick any unit vector orthogonal to the basis so far.
      s = 0.0;
      for (std::size_t e = 0; e < m; ++e) {
        std::vector<double> cand(m, 0.0);
        cand[e] = 1.0;
        for (int pass = 0; pass < 2; ++pass)
          for (const auto& b : basis) {
            const double proj = dot(cand, b);
            for (std::size_t r = 0; r < m; ++r) cand[r] -= proj * b[r];
          }
        const double norm = std::sqrt(dot(cand, cand));
        if (norm > 1e-6) {
          for (auto& x : cand) x /= norm;
          left = std::move(cand);
          break;
        }
      }
    }
    std::vector<double> right = v[c];
    // Sign convention: first non-negligible entry of each right vector is >= 0.
    for (double x : right) {
      if (std::abs(x) > 1e-12) {
        if (x < 0) {
          for (auto& y : right) y = -y;
          for (auto& y : left) y = -y;
        }
        break;
      }
    }
    out.singular_values[k] = s;
    for (std::size_t r = 0; r < m; ++r) out.U(r, k) = left[r];
    for (std::size_t r = 0; r < n; ++r) out.Vt(k, r) = right[r];
    basis.push_back(std::move(left));
  }
  return out;
}

}  // namespace detail

/// Full thin SVD, A = U diag(s) Vᵀ with min(rows, cols) triplets.
inline TruncatedSVDResult thin_svd(const DataMatrix& a) {
  if (a.rows() == 0 || a.cols() == 0) throw ShapeError("thin_svd: empty matrix");
  if (a.rows() >= a.cols()) return detail::jacobi_svd_tall(a);
  // Wide input: decompose the transpose and swap the factors.
  auto t = detail::jacobi_svd_tall(a.transpose());
  TruncatedSVDResult out{t.Vt.transpose(), t.singular_values, t.U.transpose()};
  for (std::size_t k = 0; k < out.rank(); ++k) {
    for (std::size_t c = 0; c < out.Vt.cols(); ++c) {
      const double x = out.Vt(k, c);
      if (std::abs(x) > 1e-12) {
        if (x < 0) {
          for (std::size_t j = 0; j < out.Vt.cols(); ++j) out.Vt(k, j) = -out.Vt(k, j);
          for (std::size_t r = 0; r < out.U.rows(); ++r) out.U(r, k) = -out.U(r, k);
        }
        break;
      }
    }
  }
  return out;
}

/// Best rank-`rank` approximation of `a` in Frobenius norm.
inline TruncatedSVDResult truncated_svd(const DataMatrix& a, std::size_t rank) {
  if (rank < 1 || rank > std::min(a.rows(), a.cols())) {
    throw ParameterError("truncated_svd: rank " + std::to_string(rank) + " outside [1, " +
                         std::to_string(std::min(a.rows(), a.cols())) + "]");
  }
  auto full = thin_svd(a);
  std::vector<std::size_t> keep(rank);
  std::iota(keep.begin(), keep.end(), 0);
  return {full.U.select_cols(keep), {full.singular_values.begin(), full.singular_values.begin() + static_cast<std::ptrdiff_t>(rank)},
          full.Vt.select_rows(keep)};
}

/// Centered principal component map: x -> (x - mean) · components.
struct PcaMap {
  std::vector<double> mean;
  DataMatrix components;            // input_dim x output_dim, orthonormal columns
  std::vector<double> explained_variance;  // per component, sample covariance eigenvalues

  std::size_t input_dim() const { return mean.size(); }
  std::size_t output_dim() const { return components.cols(); }
};

inline PcaMap fit_pca(const DataMatrix& a, std::size_t output_dim) {
  if (output_dim < 1 || output_dim >= a.cols()) {
    throw ParameterError("fit_pca: output dimension " + std::to_string(output_dim) +
                         " must lie in [1, " + std::to_string(a.cols()) + ")");
  }
  if (a.rows() < 2) throw ParameterError("fit_pca: need at least 2 rows");
  PcaMap map;
  map.mean = column_means(a);
  DataMatrix centered = a;
  for (std::size_t r = 0; r < a.rows(); ++r)
    for (std::size_t c = 0; c < a.cols(); ++c) centered(r, c) -= map.mean[c];
  if (frobenius_norm(centered) == 0.0) throw DegenerateInputError("fit_pca: input has zero variance");

  auto svd = thin_svd(centered);
  map.components = DataMatrix(a.cols(), output_dim);
  const std::size_t available = svd.rank();
  for (std::size_t k = 0; k < output_dim; ++k) {
    if (k < available) {
      for (std::size_t c = 0; c < a.cols(); ++c) map.components(c, k) = svd.Vt(k, c);
      map.explained_variance.push_back(svd.singular_values[k] * svd.singular_values[k] /
                                       static_cast<double>(a.rows() - 1));
    }
  }
  if (available < output_dim) {
    // Fewer samples than requested directions: complete with an orthonormal basis.
    for (std::size_t k = available; k < output_dim; ++k) {
      for (std::size_t e = 0; e < a.cols(); ++e) {
        std::vector<double> cand(a.cols(), 0.0);
        cand[e] = 1.0;
        for (int pass = 0; pass < 2; ++pass)
          for (std::size_t j = 0; j < k; ++j) {
            double proj = 0.0;
            for (std::size_t c = 0; c < a.cols(); ++c) proj += cand[c] * map.components(c, j);
            for (std::size_t c = 0; c < a.cols(); ++c) cand[c] -= proj * map.components(c, j);
          }
        double norm = 0.0;
        for (double x : cand) norm += x * x;
        norm = std::sqrt(norm);
        if (norm > 1e-6) {
          for (std::size_t c = 0; c < a.cols(); ++c) map.components(c, k) = cand[c] / norm;
          break;
        }
      }
      map.explained_variance.push_back(0.0);
    }
  }
  return map;
}

inline DataMatrix apply_pca(const PcaMap& map, const DataMatrix& a) {
  if (a.cols() != map.input_dim()) {
    throw ShapeError("apply_pca: input has " + std::to_string(a.cols()) + " columns, map expects " +
                     std::to_string(map.input_dim()));
  }
  DataMatrix centered = a;
  centered.set_col_names({});
  for (std::size_t r = 0; r < a.rows(); ++r)
    for (std::size_t c = 0; c < a.cols(); ++c) centered(r, c) -= map.mean[c];
  return matmul(centered, map.components);
}

namespace detail {

// In-place Cholesky factor (lower) of a symmetric positive definite matrix.
inline bool cholesky(DataMatrix& a) {
  const std::size_t n = a.rows();
  for (std::size_t j = 0; j < n; ++j) {
    double d = a(j, j);
    for (std::size_t k = 0; k < j; ++k) d -= a(j, k) * a(j, k);
    if (!(d > 0.0)) return false;
    d = std::sqrt(d);
    a(j, j) = d;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = a(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= a(i, k) * a(j, k);
      a(i, j) = s / d;
    }
    for (std::size_t k = j + 1; k < n; ++k) a(j, k) = 0.0;
  }
  return true;
}

inline DataMatrix cholesky_solve(const DataMatrix& lower, const DataMatrix& rhs) {
  const std::size_t n = lower.rows();
  DataMatrix x = rhs;
  for (std::size_t col = 0; col < rhs.cols(); ++col) {
    for (std::size_t i = 0; i < n; ++i) {
      double s = x(i, col);
      for (std::size_t k = 0; k < i; ++k) s -= lower(i, k) * x(k, col);
      x(i, col) = s / lower(i, i);
    }
    for (std::size_t i = n; i-- > 0;) {
      double s = x(i, col);
      for (std::size_t k = i + 1; k < n; ++k) s -= lower(k, i) * x(k, col);
      x(i, col) = s / lower(i, i);
    }
  }
  return x;
}

}  // namespace detail

struct LeastSquaresResult {
  DataMatrix solution;
  std::size_t numerical_rank = 0;
  double condition = 0.0;  // sigma_max / sigma_min over retained values; inf if rank deficient
};

/// Minimum-norm least squares solution of A·X ≈ B via the SVD pseudoinverse.
inline LeastSquaresResult least_squares(const DataMatrix& a, const DataMatrix& b,
                                        double rcond = 1e-12) {
  if (a.rows() != b.rows()) throw ShapeError("least_squares: row counts differ");
  auto svd = thin_svd(a);
  const double smax = svd.singular_values.empty() ? 0.0 : svd.singular_values.front();
  LeastSquaresResult out;
  out.solution = DataMatrix(a.cols(), b.cols());
  DataMatrix utb = matmul_tn(svd.U, b);  // rank x b.cols
  double smin = smax;
  for (std::size_t k = 0; k < svd.rank(); ++k) {
    const double s = svd.singular_values[k];
    if (s <= rcond * smax || s == 0.0) continue;
    ++out.numerical_rank;
    smin = s;
    for (std::size_t c = 0; c < a.cols(); ++c) {
      const double vk = svd.Vt(k, c) / s;
      for (std::size_t j = 0; j < b.cols(); ++j) out.solution(c, j) += vk * utb(k, j);
    }
  }
  out.condition = out.numerical_rank < std::min(a.rows(), a.cols())
                      ? std::numeric_limits<double>::infinity()
                      : (smin > 0 ? smax / smin : std::numeric_limits<double>::infinity());
  return out;
}

/// W minimizing ‖A·W − B‖²_F + λ‖W‖²_F.
inline DataMatrix ridge_solve(const DataMatrix& a, const DataMatrix& b, double lambda) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ParameterError("ridge_solve: lambda must be >= 0");
  if (a.rows() != b.rows()) throw ShapeError("ridge_solve: A and B row counts differ");
  if (lambda == 0.0) return least_squares(a, b).solution;
  DataMatrix gram = matmul_tn(a, a);
  for (std::size_t i = 0; i < gram.rows(); ++i) gram(i, i) += lambda;
  if (!detail::cholesky(gram)) return least_squares(a, b).solution;
  return detail::cholesky_solve(gram, matmul_tn(a, b));
}

/// Indices of the k rows nearest to `query_row` (itself excluded), ordered by
/// distance with ties going to the lower row index.
inline std::vector<std::size_t> knn_indices(const DataMatrix& a, std::size_t query_row, std::size_t k) {
  if (query_row >= a.rows()) throw ParameterError("knn_indices: query row out of range");
  if (k < 1 || k >= a.rows()) {
    throw ParameterError("knn_indices: k=" + std::to_string(k) + " must lie in [1, rows-1=" +
                         std::to_string(a.rows() == 0 ? 0 : a.rows() - 1) + "]");
  }
  std::vector<std::pair<double, std::size_t>> dist;
  dist.reserve(a.rows() - 1);
  const auto q = a.row(query_row);
  for (std::size_t r = 0; r < a.rows(); ++r) {
    if (r == query_row) continue;
    dist.emplace_back(squared_distance(q, a.row(r)), r);
  }
  std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());
  std::vector<std::size_t> out(k);
  for (std::size_t i = 0; i < k; ++i) out[i] = dist[i].second;
  return out;
}

struct Assignment {
  std::vector<std::size_t> permutation;  // row i -> column permutation[i]
  double total_cost = 0.0;
};

/// Minimum-cost perfect matching on a square cost matrix (Hungarian method with
/// potentials, O(n³)).
inline Assignment min_cost_assignment(const DataMatrix& cost) {
  if (cost.rows() != cost.cols()) {
    throw ShapeError("min_cost_assignment: cost matrix is " + std::to_string(cost.rows()) + "x" +
                     std::to_string(cost.cols()) + ", expected square");
  }
  const std::size_t n = cost.rows();
  constexpr double inf = std::numeric_limits<double>::infinity();
  // 1-based arrays; column 0 is a virtual source.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<std::size_t> match(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (std::size_t i = 1; i <= n; ++i) {
    match[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = match[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  Assignment out;
  out.permutation.assign(n, 0);
  for (std::size_t j = 1; j <= n; ++j) out.permutation[match[j] - 1] = j - 1;
  for (std::size_t i = 0; i < n; ++i) out.total_cost += cost(i, out.permutation[i]);
  return out;
}

/// Euclidean distance matrix between the rows of a and the rows of b.
inline DataMatrix pairwise_distances(const DataMatrix& a, const DataMatrix& b) {
  if (a.cols() != b.cols()) throw ShapeError("pairwise_distances: column counts differ");
  DataMatrix out(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.rows(); ++j) out(i, j) = std::sqrt(squared_distance(a.row(i), b.row(j)));
  return out;
}

}  // namespace dcsim
