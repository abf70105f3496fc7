#include "dpmix/neighbor_counts.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace dpmix {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Thresholds {
  std::vector<double> t2;
  int m = 0;

  explicit Thresholds(const std::vector<double>& radii) {
    for (std::size_t j = 0; j < radii.size(); ++j) {
      if (!(radii[j] >= 0.0)) throw ArgumentError("ball_counts: radii must be non-negative");
      if (j > 0 && radii[j] < radii[j - 1]) throw ArgumentError("ball_counts: radii must be ascending");
      t2.push_back(radii[j] * radii[j]);
    }
    m = static_cast<int>(t2.size());
  }

  // First j with d2 <= t2[j], or m.
  int bin(double d2) const {
    return static_cast<int>(std::lower_bound(t2.begin(), t2.end(), d2) - t2.begin());
  }

  bool near_edge(double d2, int b, double tol) const {
    return (b < m && t2[b] - d2 <= tol) || (b > 0 && d2 - t2[b - 1] <= tol);
  }
};

inline double exact_d2(const RowMat& A, Eigen::Index i, const RowMat& B, Eigen::Index j) {
  return (A.row(i) - B.row(j)).squaredNorm();
}

CountMatrix prefix_counts(const std::vector<std::int32_t>& hist, Eigen::Index n, int m) {
  CountMatrix out(n, m);
  for (Eigen::Index i = 0; i < n; ++i) {
    std::int32_t run = 0;
    const std::int32_t* h = hist.data() + i * (m + 1);
    for (int j = 0; j < m; ++j) {
      run += h[j];
      out(i, j) = run;
    }
  }
  return out;
}


// Rounding slack for d2 = |a|² + |b|² − 2a·b computed in double.
inline double gemm_tol(double na, double nb, Eigen::Index d) {
  return 8.0 * static_cast<double>(d + 2) * 1.2e-16 * (na + nb) + 1e-300;
}

constexpr Eigen::Index kTile = 512;

using RowMatF = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Rounding slack per unit of (d + 2)(|a|² + |b|²) for d2 = |a|² + |b|² − 2a·b
// with the dot product in float (inputs rounded too) or in double.
constexpr double kFloatTol = 8.0 * 5.9604644775390625e-08;
constexpr double kDoubleTol = 8.0 * 1.2e-16;
constexpr Eigen::Index kFloatMinDim = 16;

struct TileSide {
  const RowMat& c;   // coordinates relative to the row group's center
  const Vec& norm2;  // squared norms of c
  const RowMatF& f;  // c rounded to float
  Eigen::Index start;  // group-order offset
};

struct TileScratch {
  RowMat pd;
  RowMatF pf;
  std::vector<double> d2, tol;
  std::vector<std::int32_t> col;
};

// Adds, for every pair in the tile and every threshold j in [blo, bhi), the
// indicator d2 > t2[j] to both endpoints' "beyond" rows. Pairs whose rounded d2
// is within tolerance of a threshold are redone from the original coordinates.
void tile_beyond(const TileSide& R, Eigen::Index i0, Eigen::Index ti, const TileSide& C, Eigen::Index j0,
                 Eigen::Index tj, bool diag, int blo, int bhi, const Thresholds& th, const RowMat& Xp,
                 bool use_float, std::vector<std::int32_t>& beyond, int m, TileScratch& s) {
  const int w = bhi - blo;
  const double unit = (use_float ? kFloatTol : kDoubleTol) * static_cast<double>(R.c.cols() + 2);
  if (use_float)
    s.pf.noalias() = R.f.middleRows(i0, ti) * C.f.middleRows(j0, tj).transpose();
  else
    s.pd.noalias() = R.c.middleRows(i0, ti) * C.c.middleRows(j0, tj).transpose();
  s.d2.resize(tj);
  s.tol.resize(tj);
  s.col.assign(static_cast<std::size_t>(w) * tj, 0);
  const double* y2 = C.norm2.data() + j0;
  const double* t2 = th.t2.data();
  double* d2 = s.d2.data();
  double* tol = s.tol.data();
  for (Eigen::Index r = 0; r < ti; ++r) {
    const double x2 = R.norm2(i0 + r);
    if (use_float) {
      const float* pr = s.pf.data() + r * tj;
      for (Eigen::Index c = 0; c < tj; ++c) d2[c] = x2 + y2[c] - 2.0 * static_cast<double>(pr[c]);
    } else {
      const double* pr = s.pd.data() + r * tj;
      for (Eigen::Index c = 0; c < tj; ++c) d2[c] = x2 + y2[c] - 2.0 * pr[c];
    }
    for (Eigen::Index c = 0; c < tj; ++c) tol[c] = unit * (x2 + y2[c]) + 1e-300;
    if (diag)
      for (Eigen::Index c = 0; c <= r && c < tj; ++c) d2[c] = -std::numeric_limits<double>::infinity();
    std::int32_t* row = beyond.data() + (R.start + i0 + r) * m;
    int near = 0;
    for (int j = blo; j < bhi; ++j) {
      const double t = t2[j];
      std::int32_t* col = s.col.data() + static_cast<std::size_t>(j - blo) * tj;
      std::int32_t acc = 0;
      int nf = 0;
      for (Eigen::Index c = 0; c < tj; ++c) {
        const std::int32_t v = t < d2[c];
        acc += v;
        col[c] += v;
        nf |= std::abs(d2[c] - t) <= tol[c];
      }
      row[j] += acc;
      near |= nf;
    }
    if (!near) continue;
    for (Eigen::Index c = 0; c < tj; ++c) {
      bool flagged = false;
      for (int j = blo; j < bhi; ++j) flagged |= std::abs(d2[c] - t2[j]) <= tol[c];
      if (!flagged) continue;
      const double exact = exact_d2(Xp, R.start + i0 + r, Xp, C.start + j0 + c);
      for (int j = blo; j < bhi; ++j) {
        const std::int32_t delta = static_cast<std::int32_t>(t2[j] < exact) - static_cast<std::int32_t>(t2[j] < d2[c]);
        row[j] += delta;
        s.col[static_cast<std::size_t>(j - blo) * tj + c] += delta;
      }
    }
  }
  for (Eigen::Index c = 0; c < tj; ++c) {
    std::int32_t* dst = beyond.data() + (C.start + j0 + c) * m;
    for (int j = blo; j < bhi; ++j) dst[j] += s.col[static_cast<std::size_t>(j - blo) * tj + c];
  }
}

}  // namespace

CountMatrix ball_counts_direct(const Mat& Q, const Mat& X, const std::vector<double>& radii) {
  const Thresholds th(radii);
  CountMatrix out = CountMatrix::Zero(Q.rows(), th.m);
  for (Eigen::Index i = 0; i < Q.rows(); ++i)
    for (Eigen::Index j = 0; j < X.rows(); ++j) {
      const int b = th.bin((Q.row(i) - X.row(j)).squaredNorm());
      for (int c = b; c < th.m; ++c) ++out(i, c);
    }
  return out;
}

CountMatrix ball_counts(const Mat& Q, const Mat& X, const std::vector<double>& radii) {
  const Thresholds th(radii);
  const int m = th.m;
  const Eigen::Index nq = Q.rows(), nx = X.rows(), d = X.cols();
  if (Q.cols() != d) throw ShapeError("ball_counts: dimension mismatch");
  std::vector<std::int32_t> hist(static_cast<std::size_t>(nq) * (m + 1), 0);
  if (nq == 0) return CountMatrix::Zero(0, m);
  if (nx == 0) return CountMatrix::Zero(nq, m);

  const Vec origin = X.colwise().mean().transpose();
  const RowMat Qc = Q.rowwise() - origin.transpose();
  const RowMat Xc = X.rowwise() - origin.transpose();
  const RowMat Qr = Q, Xr = X;
  const Vec qn = Qc.rowwise().squaredNorm();
  const Vec xn = Xc.rowwise().squaredNorm();
  RowMat P;
  for (Eigen::Index i0 = 0; i0 < nq; i0 += kTile) {
    const Eigen::Index ti = std::min(kTile, nq - i0);
    for (Eigen::Index j0 = 0; j0 < nx; j0 += kTile) {
      const Eigen::Index tj = std::min(kTile, nx - j0);
      P.noalias() = Qc.middleRows(i0, ti) * Xc.middleRows(j0, tj).transpose();
      for (Eigen::Index r = 0; r < ti; ++r) {
        std::int32_t* h = hist.data() + (i0 + r) * (m + 1);
        const double a = qn(i0 + r);
        for (Eigen::Index c = 0; c < tj; ++c) {
          const double bnorm = xn(j0 + c);
          double d2 = a + bnorm - 2.0 * P(r, c);
          int b = th.bin(d2);
          if (th.near_edge(d2, b, gemm_tol(a, bnorm, d))) {
            d2 = exact_d2(Qr, i0 + r, Xr, j0 + c);
            b = th.bin(d2);
          }
          ++h[b];
        }
      }
    }
  }
  return prefix_counts(hist, nq, m);
}

CountMatrix ball_counts_self(const Mat& X, const std::vector<double>& radii) {
  const Thresholds th(radii);
  const int m = th.m;
  const Eigen::Index n = X.rows(), d = X.cols();
  std::vector<std::int32_t> hist(static_cast<std::size_t>(n) * (m + 1), 0);
  auto H = [&](Eigen::Index i) { return hist.data() + i * (m + 1); };
  const RowMat Xr = X;
  const int self_bin = th.bin(0.0);
  for (Eigen::Index i = 0; i < n; ++i) ++H(i)[self_bin];

  if (n <= 2048) {
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = i + 1; j < n; ++j) {
        const int b = th.bin(exact_d2(Xr, i, Xr, j));
        ++H(i)[b];
        ++H(j)[b];
      }
    return prefix_counts(hist, n, m);
  }

  // Farthest-first grouping. Groups whose distance interval falls between two
  // consecutive thresholds are counted in bulk; the rest are tiled.
  const int G = static_cast<int>(std::clamp<Eigen::Index>(n / 1024, 2, 64));
  std::vector<Eigen::Index> centers{0};
  std::vector<double> mind2(n);
  std::vector<int> owner(n, 0);
  for (Eigen::Index i = 0; i < n; ++i) mind2[i] = exact_d2(Xr, i, Xr, 0);
  while (static_cast<int>(centers.size()) < G) {
    const Eigen::Index far = std::max_element(mind2.begin(), mind2.end()) - mind2.begin();
    if (mind2[far] == 0.0) break;
    const int g = static_cast<int>(centers.size());
    centers.push_back(far);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double v = exact_d2(Xr, i, Xr, far);
      if (v < mind2[i]) {
        mind2[i] = v;
        owner[i] = g;
      }
    }
  }
  const int ng = static_cast<int>(centers.size());
  std::vector<double> rho(ng, 0.0);
  std::vector<Eigen::Index> start(ng + 1, 0);
  for (Eigen::Index i = 0; i < n; ++i) {
    ++start[owner[i] + 1];
    rho[owner[i]] = std::max(rho[owner[i]], std::sqrt(mind2[i]));
  }
  for (int g = 0; g < ng; ++g) start[g + 1] += start[g];
  // Work in group-contiguous order so histogram rows touched by a tile are adjacent.
  std::vector<Eigen::Index> order(n);
  {
    std::vector<Eigen::Index> fill(start.begin(), start.end() - 1);
    for (Eigen::Index i = 0; i < n; ++i) order[fill[owner[i]]++] = i;
  }
  const RowMat Xp = Xr(order, Eigen::all);
  // beyond[p * m + j] = #{ y : d2(x_p, y) > t2[j] }, p in group order.
  std::vector<std::int32_t> beyond(static_cast<std::size_t>(n) * m, 0);
  auto Bp = [&](Eigen::Index p) { return beyond.data() + p * m; };
  auto bulk = [&](Eigen::Index s, Eigen::Index len, int upto, std::int32_t add) {
    for (Eigen::Index p = s; p < s + len; ++p)
      for (int j = 0; j < upto; ++j) Bp(p)[j] += add;
  };

  TileScratch scratch;
  const bool use_float = d >= kFloatMinDim;
  for (int a = 0; a < ng; ++a) {
    const Eigen::Index sa = start[a], na = start[a + 1] - sa;
    if (na == 0) continue;
    const Vec origin = Xr.row(centers[a]).transpose();
    const RowMat A = Xp.middleRows(sa, na).rowwise() - origin.transpose();
    const Vec an = A.rowwise().squaredNorm();
    const RowMatF Af = A.cast<float>();
    for (int bgrp = a; bgrp < ng; ++bgrp) {
      const Eigen::Index sb = start[bgrp], nb = start[bgrp + 1] - sb;
      if (nb == 0) continue;
      const double D = (Xr.row(centers[a]) - Xr.row(centers[bgrp])).norm();
      const double lo = std::max(0.0, (D - rho[a] - rho[bgrp]) * (1.0 - 1e-9));
      const double hi = (D + rho[a] + rho[bgrp]) * (1.0 + 1e-9) + 1e-300;
      const int blo = th.bin(lo * lo), bhi = th.bin(hi * hi);
      const bool same = (a == bgrp);
      // Every pair is beyond the thresholds below blo.
      if (same) {
        bulk(sa, na, blo, static_cast<std::int32_t>(na) - 1);
      } else {
        bulk(sa, na, blo, static_cast<std::int32_t>(nb));
        bulk(sb, nb, blo, static_cast<std::int32_t>(na));
      }
      if (blo == bhi) continue;
      RowMat Bm;
      Vec bn;
      RowMatF Bf;
      if (!same) {
        Bm = Xp.middleRows(sb, nb).rowwise() - origin.transpose();
        bn = Bm.rowwise().squaredNorm();
        Bf = Bm.cast<float>();
      }
      const TileSide rows{A, an, Af, sa};
      const TileSide cols{same ? A : Bm, same ? an : bn, same ? Af : Bf, sb};
      for (Eigen::Index i0 = 0; i0 < na; i0 += kTile) {
        const Eigen::Index ti = std::min(kTile, na - i0);
        for (Eigen::Index j0 = same ? i0 : 0; j0 < cols.c.rows(); j0 += kTile) {
          const Eigen::Index tj = std::min(kTile, cols.c.rows() - j0);
          tile_beyond(rows, i0, ti, cols, j0, tj, same && j0 == i0, blo, bhi, th, Xp, use_float, beyond, m, scratch);
        }
      }
    }
  }
  for (Eigen::Index p = 0; p < n; ++p) {
    std::int32_t* dst = H(order[p]);
    const std::int32_t* src = Bp(p);
    // Bin counts of the other n - 1 points; self was added above.
    std::int32_t prev = static_cast<std::int32_t>(n) - 1;
    for (int j = 0; j < m; ++j) {
      dst[j] += prev - src[j];
      prev = src[j];
    }
    dst[m] += prev;
  }
  return prefix_counts(hist, n, m);
}

}  // namespace dpmix
