#include "preforge/spectrum.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "preforge/error.hpp"

namespace preforge {

namespace {

struct UnionFind {
  std::vector<int> p;
  explicit UnionFind(int n) : p(n) { std::iota(p.begin(), p.end(), 0); }
  int find(int i) { return p[i] == i ? i : p[i] = find(p[i]); }
  void unite(int a, int b) { p[find(a)] = find(b); }
};

int rank_deficit(const CMatrix& m, double tol) {
  Eigen::JacobiSVD<CMatrix> svd(m);
  const auto& s = svd.singularValues();
  int r = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s(i) <= tol) ++r;
  return r;
}

CVector realify(const CVector& v) {
  // rotate the phase so the vector is as real as possible
  cplx s = v.transpose() * v;
  cplx ph = std::abs(s) > 0 ? std::sqrt(std::conj(s) / std::abs(s)) : cplx(1.0);
  CVector w = (v * ph).real().cast<cplx>();
  double n = w.norm();
  return n > 0 ? CVector(w / n) : v;
}

// Jordan chains of N restricted to its generalized null space of size a.
std::vector<std::vector<CVector>> jordan_chains(const CMatrix& n_op, int a, double tol,
                                                double scale) {
  const int n = static_cast<int>(n_op.rows());
  std::vector<CMatrix> kernels;  // kernels[p] = null(N^p), p = 0..top
  kernels.push_back(CMatrix::Zero(n, 0));
  CMatrix power = CMatrix::Identity(n, n);
  int top = 0;
  for (int p = 1; p <= a; ++p) {
    power = n_op * power;
    double thr = tol * std::pow(std::max(scale, 1.0), p - 1);
    CMatrix k = null_space(power, thr);
    if (k.cols() > a) k = k.leftCols(a);
    kernels.push_back(k);
    top = p;
    if (k.cols() >= a) break;
  }

  std::vector<std::vector<CVector>> chains;
  std::vector<CMatrix> used(top + 1, CMatrix::Zero(n, 0));
  for (int p = top; p >= 1; --p) {
    // candidates in null(N^p) independent of null(N^{p-1}) and of vectors
    // already placed at level p by longer chains
    CMatrix base(n, kernels[p - 1].cols() + used[p].cols());
    base << kernels[p - 1], used[p];
    for (Eigen::Index c = 0; c < kernels[p].cols(); ++c) {
      CVector v = kernels[p].col(c);
      CMatrix q(n, 0);
      if (base.cols() > 0) {
        Eigen::JacobiSVD<CMatrix> svd(base, Eigen::ComputeThinU);
        const auto& s = svd.singularValues();
        int r = 0;
        for (Eigen::Index i = 0; i < s.size(); ++i)
          if (s(i) > 1e-9 * s(0)) ++r;
        q = svd.matrixU().leftCols(r);
      }
      CVector resid = v - q * (q.adjoint() * v);
      if (resid.norm() < 1e-6) continue;
      CVector top_vec = resid / resid.norm();
      std::vector<CVector> chain(p);
      chain[p - 1] = top_vec;
      for (int j = p - 1; j >= 1; --j) chain[j - 1] = n_op * chain[j];
      for (int j = 1; j <= p; ++j) {
        used[j].conservativeResize(n, used[j].cols() + 1);
        used[j].col(used[j].cols() - 1) = chain[j - 1];
      }
      base.conservativeResize(n, base.cols() + 1);
      base.col(base.cols() - 1) = top_vec;
      chains.push_back(std::move(chain));
    }
  }
  return chains;
}

}  // namespace

bool Spectrum::defective() const {
  return std::any_of(clusters.begin(), clusters.end(),
                     [](const EigenCluster& c) { return c.defective(); });
}

double norm2(const RMatrix& m) {
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<RMatrix> svd(m);
  return svd.singularValues()(0);
}

RMatrix orth(const RMatrix& m, double rel_tol) {
  if (m.cols() == 0) return RMatrix(m.rows(), 0);
  Eigen::JacobiSVD<RMatrix> svd(m, Eigen::ComputeThinU);
  const auto& s = svd.singularValues();
  if (s.size() == 0 || s(0) == 0.0) return RMatrix(m.rows(), 0);
  int r = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s(i) > rel_tol * s(0)) ++r;
  return svd.matrixU().leftCols(r);
}

RMatrix null_space(const RMatrix& m, double abs_tol) {
  Eigen::JacobiSVD<RMatrix> svd(m, Eigen::ComputeFullV);
  const auto& s = svd.singularValues();
  int r = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s(i) > abs_tol) ++r;
  return svd.matrixV().rightCols(m.cols() - r);
}

CMatrix null_space(const CMatrix& m, double abs_tol) {
  Eigen::JacobiSVD<CMatrix> svd(m, Eigen::ComputeFullV);
  const auto& s = svd.singularValues();
  int r = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s(i) > abs_tol) ++r;
  return svd.matrixV().rightCols(m.cols() - r);
}

Spectrum eig_full(const RMatrix& m, double rel_tol) {
  if (m.rows() != m.cols()) throw Error(ErrorKind::Shape, "eig_full needs a square matrix");
  if (!m.allFinite()) throw Error(ErrorKind::NumericalConvergence, "matrix has non-finite entries");
  const int n = static_cast<int>(m.rows());
  Spectrum out;
  out.norm = norm2(m);
  const double scale = std::max(out.norm, 1e-300);
  out.tolerance = rel_tol * scale;

  Eigen::EigenSolver<RMatrix> es(m, false);
  if (es.info() != Eigen::Success)
    throw Error(ErrorKind::NumericalConvergence, "eigenvalue iteration failed");
  const CVector ev = es.eigenvalues();
  out.eigenvalues.assign(ev.data(), ev.data() + n);

  const CMatrix mc = m.cast<cplx>();
  const CMatrix id = CMatrix::Identity(n, n);
  UnionFind uf(n);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (std::abs(ev(i) - ev(j)) <= out.tolerance) uf.unite(i, j);

  // A defective eigenvalue of block size p splits by O(eps^(1/p)); merge
  // such near pairs only when the merged cluster is rank deficient.
  const double wide = 1e-4 * scale;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      if (uf.find(i) == uf.find(j) || std::abs(ev(i) - ev(j)) > wide) continue;
      std::vector<int> members;
      for (int q = 0; q < n; ++q)
        if (uf.find(q) == uf.find(i) || uf.find(q) == uf.find(j)) members.push_back(q);
      cplx mean = 0.0;
      for (int q : members) mean += ev(q);
      mean /= static_cast<double>(members.size());
      int g = rank_deficit(mc - mean * id, out.tolerance);
      if (g >= 1 && g < static_cast<int>(members.size())) uf.unite(i, j);
    }

  std::vector<int> roots;
  for (int i = 0; i < n; ++i)
    if (std::find(roots.begin(), roots.end(), uf.find(i)) == roots.end()) roots.push_back(uf.find(i));

  for (int r : roots) {
    EigenCluster c;
    cplx mean = 0.0;
    for (int i = 0; i < n; ++i)
      if (uf.find(i) == r) {
        mean += ev(i);
        ++c.algebraic;
      }
    mean /= static_cast<double>(c.algebraic);
    const bool real = std::abs(mean.imag()) <= out.tolerance;
    if (real) mean = mean.real();
    c.value = mean;

    const CMatrix nop = mc - mean * id;
    if (real) {
      RMatrix k = null_space(RMatrix(m - mean.real() * RMatrix::Identity(n, n)), out.tolerance);
      for (Eigen::Index q = 0; q < k.cols(); ++q) c.eigenvectors.push_back(k.col(q).cast<cplx>());
    } else {
      CMatrix k = null_space(nop, out.tolerance);
      for (Eigen::Index q = 0; q < k.cols(); ++q) c.eigenvectors.push_back(k.col(q));
    }
    c.geometric = static_cast<int>(c.eigenvectors.size());
    if (c.geometric == 0) {
      // clustering picked up a value whose null space sits just above the
      // threshold; fall back to the smallest singular direction
      Eigen::JacobiSVD<CMatrix> svd(nop, Eigen::ComputeFullV);
      CVector v = svd.matrixV().col(n - 1);
      c.eigenvectors.push_back(real ? realify(v) : v);
      c.geometric = 1;
    }
    if (c.defective()) {
      c.chains = jordan_chains(nop, c.algebraic, out.tolerance, scale);
      if (real)
        for (auto& ch : c.chains) {
          // N is real, so a real top vector yields a real chain
          CVector top = realify(ch.back());
          ch.back() = top;
          for (int j = static_cast<int>(ch.size()) - 1; j >= 1; --j) ch[j - 1] = nop * ch[j];
        }
    } else {
      for (const auto& v : c.eigenvectors) c.chains.push_back({v});
    }
    out.clusters.push_back(std::move(c));
  }

  std::sort(out.clusters.begin(), out.clusters.end(), [](const EigenCluster& a, const EigenCluster& b) {
    if (a.value.real() != b.value.real()) return a.value.real() > b.value.real();
    return a.value.imag() > b.value.imag();
  });
  return out;
}

}  // namespace preforge
