#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <mutex>
#include <numbers>
#include <utility>
#include <vector>

namespace hympc {

struct GaussRule
{
  std::vector<double> nodes;    // on [-1, 1]
  std::vector<double> weights;
};

/// n-point Gauss-Legendre rule (Newton iteration on P_n from Chebyshev guesses).
inline GaussRule gauss_legendre(int n)
{
  GaussRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = 0.0;
      for (int k = 1; k <= n; ++k) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p2) / k;
      }
      dp = n * (z * p0 - p1) / (z * z - 1.0);
      const double dz = p0 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) { break; }
    }
    // recompute derivative at the converged node
    double p0 = 1.0, p1 = 0.0;
    for (int k = 1; k <= n; ++k) {
      const double p2 = p1;
      p1 = p0;
      p0 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p2) / k;
    }
    dp = n * (z * p0 - p1) / (z * z - 1.0);
    const double w = 2.0 / ((1.0 - z * z) * dp * dp);
    rule.nodes[i] = -z;
    rule.nodes[n - 1 - i] = z;
    rule.weights[i] = w;
    rule.weights[n - 1 - i] = w;
  }
  return rule;
}

inline const GaussRule & cached_gauss_legendre(int n)
{
  static std::mutex mutex;
  static std::map<int, GaussRule> cache;
  std::lock_guard<std::mutex> lock(mutex);
  auto it = cache.find(n);
  if (it == cache.end()) { it = cache.emplace(n, gauss_legendre(n)).first; }
  return it->second;
}

inline double integrate_fixed(const std::function<double(double)> & f, double a, double b, int n)
{
  const auto & rule = cached_gauss_legendre(n);
  const double half = 0.5 * (b - a), mid = 0.5 * (a + b);
  double sum = 0.0;
  for (int i = 0; i < n; ++i) { sum += rule.weights[i] * f(mid + half * rule.nodes[i]); }
  return half * sum;
}

struct QuadratureResult
{
  double value = 0.0;
  int order = 0;
  bool converged = false;
};

/**
 * @brief Gauss-Legendre quadrature with the order doubled from 8 until two
 * successive estimates agree to `rel_tol` (or the order reaches `max_order`).
 */
inline QuadratureResult integrate_gauss_adaptive(
  const std::function<double(double)> & f, double a, double b, double rel_tol = 1e-10, int max_order = 512)
{
  QuadratureResult res;
  if (b == a) {
    res.converged = true;
    return res;
  }
  int n = 8;
  double prev = integrate_fixed(f, a, b, n);
  while (n < max_order) {
    n *= 2;
    const double cur = integrate_fixed(f, a, b, n);
    const double diff = std::abs(cur - prev);
    prev = cur;
    if (diff <= rel_tol * std::abs(cur) || diff <= 1e-15) {
      res.converged = true;
      break;
    }
  }
  res.value = prev;
  res.order = n;
  return res;
}

}  // namespace hympc
