#include "kle/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "kle/error.hpp"

namespace kle {

namespace {

constexpr double kSymmetryTolerance = 1e-9;

}  // namespace

SymMatrix::SymMatrix(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols() || m.rows() < 1) {
    throw Error(ErrorCode::DimensionMismatch, "symmetric matrix must be square and non-empty");
  }
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
  if (asym > kSymmetryTolerance * scale) {
    std::ostringstream os;
    os << "matrix is not symmetric (max asymmetry " << asym << ")";
    throw Error(ErrorCode::InvalidInput, os.str());
  }
  m_ = 0.5 * (m + m.transpose());
}

SymMatrix SymMatrix::identity(Eigen::Index n) {
  return SymMatrix(Eigen::MatrixXd::Identity(n, n));
}

SymMatrix SymMatrix::zeros(Eigen::Index n) {
  return SymMatrix(Eigen::MatrixXd::Zero(n, n));
}

SymMatrix SymMatrix::diagonal(std::span<const double> values) {
  Eigen::VectorXd d(static_cast<Eigen::Index>(values.size()));
  for (std::size_t i = 0; i < values.size(); ++i) d(static_cast<Eigen::Index>(i)) = values[i];
  return SymMatrix(d.asDiagonal().toDenseMatrix());
}

SpectralDecomposition sym_eig(const SymMatrix& a) {
  if (!a.matrix().allFinite()) {
    throw Error(ErrorCode::NonFinite, "matrix has NaN or infinite entries");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(a.matrix(), Eigen::ComputeEigenvectors);
  if (solver.info() != Eigen::Success) {
    throw Error(ErrorCode::NonFinite, "symmetric eigensolver did not converge");
  }
  return {solver.eigenvalues(), solver.eigenvectors()};
}

SymMatrix spectral_map(const SymMatrix& a, const std::function<double(double)>& f) {
  return spectral_map(sym_eig(a), f);
}

SymMatrix spectral_map(const SpectralDecomposition& eig, const std::function<double(double)>& f) {
  const Eigen::Index n = eig.eigenvalues.size();
  Eigen::VectorXd mapped(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double v = f(eig.eigenvalues(i));
    if (!std::isfinite(v)) {
      std::ostringstream os;
      os << "function is not finite at eigenvalue " << eig.eigenvalues(i);
      throw Error(ErrorCode::SingularFunction, os.str());
    }
    mapped(i) = v;
  }
  const Eigen::MatrixXd& v = eig.eigenvectors;
  return SymMatrix(v * mapped.asDiagonal() * v.transpose());
}

DensityMatrix::DensityMatrix(SymMatrix m) : m_(std::move(m)) {
  const double tr = m_.trace();
  if (!std::isfinite(tr) || std::abs(tr - 1.0) > kTraceTolerance) {
    std::ostringstream os;
    os << "trace " << tr << " deviates from 1";
    throw Error(ErrorCode::NotDensityMatrix, os.str());
  }
  Eigen::VectorXd ev = sym_eig(m_).eigenvalues;
  if (ev(0) < -kNegativeEigenTolerance) {
    std::ostringstream os;
    os << "smallest eigenvalue " << ev(0) << " is negative";
    throw Error(ErrorCode::NotDensityMatrix, os.str());
  }
  spectrum_ = ev.cwiseMax(0.0).cwiseMin(1.0);
}

double shannon_entropy(std::span<const double> p) {
  double h = 0.0;
  for (double x : p) {
    if (x > 0.0) h -= x * std::log(x);
  }
  return h;
}

double von_neumann_entropy(const DensityMatrix& k) {
  const Eigen::VectorXd& s = k.spectrum();
  return std::max(0.0, shannon_entropy(std::span<const double>(s.data(), static_cast<std::size_t>(s.size()))));
}

DensityMatrix unit_trace_normalize(const SymMatrix& k) {
  const Eigen::Index n = k.size();
  Eigen::VectorXd inv_sqrt(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double d = k(i, i);
    if (!(d > 1e-12)) {
      std::ostringstream os;
      os << "diagonal entry " << i << " is " << d;
      throw Error(ErrorCode::ZeroDiagonal, os.str());
    }
    inv_sqrt(i) = 1.0 / std::sqrt(d);
  }
  Eigen::MatrixXd out = inv_sqrt.asDiagonal() * k.matrix() * inv_sqrt.asDiagonal();
  out /= static_cast<double>(n);
  out.diagonal().setConstant(1.0 / static_cast<double>(n));
  return DensityMatrix(SymMatrix(out));
}

}  // namespace kle
