#pragma once

// Test-only reference computations. None of these call into the code paths
// they are used to check.

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Eigenvalues>
#include <Eigen/Geometry>

namespace scalesense::oracle {

inline Eigen::Matrix3d random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::Quaterniond q(g(rng), g(rng), g(rng), g(rng));
  q.normalize();
  return q.toRotationMatrix();
}

/// Parameter t minimizing the distance from q + t*l to the line o + s*r,
/// by coarse-to-fine 1-D grid search (the inner minimum over s is closed form
/// for a unit r: project onto the ray line).
inline double grid_search_line_parameter(const Eigen::Vector3d& o, const Eigen::Vector3d& r,
                                         const Eigen::Vector3d& q, const Eigen::Vector3d& l,
                                         double lo = -100.0, double hi = 100.0) {
  auto dist2 = [&](double t) {
    const Eigen::Vector3d p = q + t * l;
    const Eigen::Vector3d w = p - o;
    return (w - w.dot(r) * r).squaredNorm();
  };
  double best = lo;
  for (int level = 0; level < 12; ++level) {
    const int n = 2000;
    double best_val = std::numeric_limits<double>::infinity();
    for (int i = 0; i <= n; ++i) {
      const double t = lo + (hi - lo) * i / n;
      const double v = dist2(t);
      if (v < best_val) {
        best_val = v;
        best = t;
      }
    }
    const double step = (hi - lo) / n;
    lo = best - 2 * step;
    hi = best + 2 * step;
  }
  return best;
}

/// Empirical std of |p_t - p_d| with both endpoints perturbed independently by N(0, P).
inline double monte_carlo_height_std(const Eigen::Vector3d& top, const Eigen::Vector3d& bottom,
                                     const Eigen::Matrix3d& P, int samples, std::uint64_t seed) {
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(P);
  const Eigen::Matrix3d root =
      eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  double sum = 0.0, sum2 = 0.0;
  for (int i = 0; i < samples; ++i) {
    const Eigen::Vector3d a = top + root * Eigen::Vector3d(g(rng), g(rng), g(rng));
    const Eigen::Vector3d b = bottom + root * Eigen::Vector3d(g(rng), g(rng), g(rng));
    const double D = (a - b).norm();
    sum += D;
    sum2 += D * D;
  }
  const double mean = sum / samples;
  return std::sqrt(std::max(0.0, sum2 / samples - mean * mean));
}

/// Likelihood written as a density in d: a Gaussian centered at H/D with
/// std sigma_D, rescaled by 1/D (change of variables from d*D - H).
inline std::vector<double> likelihood_in_d(const std::vector<double>& d_values, double D,
                                           double sigma_D, const std::vector<double>& heights,
                                           const std::vector<double>& probs) {
  std::vector<double> out;
  for (double d : d_values) {
    double acc = 0.0;
    for (std::size_t m = 0; m < heights.size(); ++m) {
      const double z = (d - heights[m] / D) / sigma_D;
      acc += probs[m] * std::exp(-0.5 * z * z) / (std::sqrt(2.0 * std::numbers::pi) * sigma_D) / D;
    }
    out.push_back(acc);
  }
  return out;
}

/// Posterior masses by direct multiplication in linear space, renormalizing
/// after each factor.
inline std::vector<double> linear_space_posterior(std::vector<double> masses,
                                                  const std::vector<std::vector<double>>& factors) {
  for (const auto& f : factors) {
    double total = 0.0;
    for (std::size_t i = 0; i < masses.size(); ++i) {
      masses[i] *= f[i];
      total += masses[i];
    }
    for (double& m : masses) m /= total;
  }
  return masses;
}

}  // namespace scalesense::oracle
