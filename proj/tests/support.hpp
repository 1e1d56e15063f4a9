#pragma once

// Test-only helpers: random instance generators and oracles that do not go
// through the library's own eigen/kernel code paths.

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "kle/nli.hpp"

namespace kle::testing {

// Cyclic Jacobi eigenvalue iteration on a copy of a symmetric matrix.
inline std::vector<double> jacobi_eigenvalues(Eigen::MatrixXd a) {
  const Eigen::Index n = a.rows();
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (Eigen::Index p = 0; p < n; ++p)
      for (Eigen::Index q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    if (off < 1e-30) break;
    for (Eigen::Index p = 0; p < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        if (std::abs(a(p, q)) < 1e-300) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
      }
    }
  }
  std::vector<double> ev(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) ev[static_cast<std::size_t>(i)] = a(i, i);
  std::sort(ev.begin(), ev.end());
  return ev;
}

// -sum l ln l over Jacobi eigenvalues (clamped at 0).
inline double oracle_vne(const Eigen::MatrixXd& k) {
  double h = 0.0;
  for (double l : jacobi_eigenvalues(k)) {
    if (l > 0.0) h -= l * std::log(l);
  }
  return h;
}

// Truncated Taylor series sum_{k<=terms} A^k / k!.
inline Eigen::MatrixXd taylor_exp(const Eigen::MatrixXd& a, int terms = 30) {
  Eigen::MatrixXd sum = Eigen::MatrixXd::Identity(a.rows(), a.cols());
  Eigen::MatrixXd term = sum;
  for (int k = 1; k <= terms; ++k) {
    term = term * a / static_cast<double>(k);
    sum += term;
  }
  return sum;
}

// Scaling and squaring on top of the Taylor series, for larger norms.
inline Eigen::MatrixXd oracle_expm(const Eigen::MatrixXd& a) {
  int squarings = 0;
  double norm = a.cwiseAbs().rowwise().sum().maxCoeff();
  while (norm > 0.5) {
    norm /= 2.0;
    ++squarings;
  }
  Eigen::MatrixXd e = taylor_exp(a / std::pow(2.0, squarings), 30);
  for (int i = 0; i < squarings; ++i) e = e * e;
  return e;
}

inline Eigen::MatrixXd laplacian_of(const Eigen::MatrixXd& w) {
  Eigen::MatrixXd l = -w;
  l.diagonal() += w.rowwise().sum();
  return l;
}

inline Eigen::MatrixXd oracle_normalize(const Eigen::MatrixXd& k) {
  const Eigen::Index n = k.rows();
  Eigen::MatrixXd out(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) out(i, j) = k(i, j) / std::sqrt(k(i, i) * k(j, j)) / static_cast<double>(n);
  return out;
}

// Random symmetric weight matrix with zero diagonal; each edge present with
// probability `density`, weights uniform in (0, max_weight].
inline Eigen::MatrixXd random_weights(std::mt19937_64& rng, Eigen::Index n, double density, double max_weight) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j)
      if (u(rng) < density) w(i, j) = w(j, i) = max_weight * (1.0 - u(rng));
  return w;
}

inline Eigen::MatrixXd random_orthogonal(std::mt19937_64& rng, Eigen::Index n) {
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::MatrixXd m(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) m(i, j) = g(rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(m);
  return qr.householderQ() * Eigen::MatrixXd::Identity(n, n);
}

// G Gᵀ / tr, optionally rank-deficient.
inline Eigen::MatrixXd random_density(std::mt19937_64& rng, Eigen::Index n, Eigen::Index rank) {
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::MatrixXd m(n, rank);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < rank; ++j) m(i, j) = g(rng);
  Eigen::MatrixXd k = m * m.transpose();
  return k / k.trace();
}

inline std::vector<double> random_probs(std::mt19937_64& rng, std::size_t m) {
  std::exponential_distribution<double> e(1.0);
  std::vector<double> p(m);
  for (auto& x : p) x = e(rng);
  const double s = std::accumulate(p.begin(), p.end(), 0.0);
  for (auto& x : p) x /= s;
  return p;
}

// Random assignment of n items to contiguous cluster ids.
inline std::vector<std::size_t> random_assignment(std::mt19937_64& rng, std::size_t n) {
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::vector<std::size_t> raw(n);
  for (auto& r : raw) r = pick(rng);
  std::vector<std::size_t> relabel(n, n);
  std::size_t next = 0;
  for (auto& r : raw) {
    if (relabel[r] == n) relabel[r] = next++;
    r = relabel[r];
  }
  return raw;
}

// Counts every judge() call and forwards to a wrapped provider.
class CountingProvider final : public NliProvider {
 public:
  explicit CountingProvider(NliProvider& inner) : inner_(inner) {}
  NliJudgment judge(std::string_view p, std::string_view h) override {
    ++calls;
    if (p == h) ++self_pairs;
    return inner_.judge(p, h);
  }
  std::string identity() const override { return "counting"; }

  std::atomic<std::size_t> calls{0};
  std::atomic<std::size_t> self_pairs{0};

 private:
  NliProvider& inner_;
};

}  // namespace kle::testing
