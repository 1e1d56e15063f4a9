#pragma once

#include <Eigen/Dense>

#include <functional>
#include <span>

namespace kle {

/// Dense real symmetric matrix. Storage is kept exactly symmetric: the
/// constructor accepts matrices that are symmetric up to rounding and
/// averages the two triangles.
class SymMatrix {
 public:
  explicit SymMatrix(const Eigen::MatrixXd& m);

  static SymMatrix identity(Eigen::Index n);
  static SymMatrix zeros(Eigen::Index n);
  static SymMatrix diagonal(std::span<const double> values);

  Eigen::Index size() const noexcept { return m_.rows(); }
  double operator()(Eigen::Index i, Eigen::Index j) const { return m_(i, j); }
  const Eigen::MatrixXd& matrix() const noexcept { return m_; }

  double trace() const { return m_.trace(); }
  double max_abs() const { return m_.cwiseAbs().maxCoeff(); }

 private:
  Eigen::MatrixXd m_;
};

struct SpectralDecomposition {
  Eigen::VectorXd eigenvalues;   // ascending
  Eigen::MatrixXd eigenvectors;  // orthonormal columns, matching eigenvalues
};

SpectralDecomposition sym_eig(const SymMatrix& a);

// V f(Λ) Vᵀ. Throws SingularFunction when f is not finite at an eigenvalue.
SymMatrix spectral_map(const SymMatrix& a, const std::function<double(double)>& f);
SymMatrix spectral_map(const SpectralDecomposition& eig,
                       const std::function<double(double)>& f);

// Unit-trace positive semidefinite matrix. Construction validates trace and
// smallest eigenvalue and keeps the spectrum for entropy evaluation.
class DensityMatrix {
 public:
  static constexpr double kTraceTolerance = 1e-6;
  static constexpr double kNegativeEigenTolerance = 1e-6;

  explicit DensityMatrix(SymMatrix m);

  const SymMatrix& matrix() const noexcept { return m_; }
  Eigen::Index size() const noexcept { return m_.size(); }
  // Eigenvalues clamped into [0, 1], ascending.
  const Eigen::VectorXd& spectrum() const noexcept { return spectrum_; }

 private:
  SymMatrix m_;
  Eigen::VectorXd spectrum_;
};

// Shannon entropy in nats with 0 log 0 = 0. Inputs are not validated.
double shannon_entropy(std::span<const double> p);

// -Tr[K log K] in nats.
double von_neumann_entropy(const DensityMatrix& k);

// K(x,y) <- K(x,y) / sqrt(K(x,x) K(y,y)) / N.
DensityMatrix unit_trace_normalize(const SymMatrix& k);

}  // namespace kle
