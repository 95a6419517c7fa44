#include "cdinfer/baseline_lz.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

#include "cdinfer/errors.hpp"

namespace cdinfer {

std::string to_string(LzVariant v) { return v == LzVariant::cr0 ? "cr0" : "cr1"; }

LzVariant parse_lz_variant(const std::string& s) {
  if (s == "cr0") return LzVariant::cr0;
  if (s == "cr1") return LzVariant::cr1;
  throw std::invalid_argument("unknown Liang-Zeger variant '" + s + "' (expected cr0 or cr1)");
}

namespace {

using Mat2 = std::array<std::array<double, 2>, 2>;

Mat2 inverse(const Mat2& m) {
  const double det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
  if (det == 0.0) throw InsufficientClusters("singular design matrix in the treatment regression");
  return {{{m[1][1] / det, -m[0][1] / det}, {-m[1][0] / det, m[0][0] / det}}};
}

Mat2 multiply(const Mat2& a, const Mat2& b) {
  Mat2 r{};
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      for (int k = 0; k < 2; ++k) r[i][j] += a[i][k] * b[k][j];
  return r;
}

} // namespace

LzReport lz_se(const ObservedSample& sample, LzVariant variant) {
  std::size_t arm_clusters[2] = {0, 0};
  for (const auto& sc : sample.clusters) {
    if (sc.units.empty()) throw InsufficientClusters("sampled cluster " + sc.id + " has no units");
    ++arm_clusters[sc.treated ? 1 : 0];
  }
  if (arm_clusters[0] < 2 || arm_clusters[1] < 2)
    throw InsufficientClusters("Liang-Zeger SE needs at least two clusters per arm (treated " +
                               std::to_string(arm_clusters[1]) + ", control " + std::to_string(arm_clusters[0]) +
                               ")");

  // X'X and X'y for rows (1, D).
  Mat2 xtx{};
  double xty[2] = {0.0, 0.0};
  std::size_t n = 0;
  for (const auto& sc : sample.clusters) {
    const double d = sc.treated ? 1.0 : 0.0;
    for (const auto& u : sc.units) {
      xtx[0][0] += 1.0;
      xtx[0][1] += d;
      xtx[1][0] += d;
      xtx[1][1] += d * d;
      xty[0] += u.y;
      xty[1] += d * u.y;
      ++n;
    }
  }
  const Mat2 bread = inverse(xtx);
  const double beta[2] = {bread[0][0] * xty[0] + bread[0][1] * xty[1],
                          bread[1][0] * xty[0] + bread[1][1] * xty[1]};

  // Meat: sum over clusters of (X_g' e_g)(X_g' e_g)'.
  Mat2 meat{};
  for (const auto& sc : sample.clusters) {
    const double d = sc.treated ? 1.0 : 0.0;
    double score[2] = {0.0, 0.0};
    for (const auto& u : sc.units) {
      const double e = u.y - beta[0] - beta[1] * d;
      score[0] += e;
      score[1] += d * e;
    }
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) meat[i][j] += score[i] * score[j];
  }
  const Mat2 sandwich = multiply(multiply(bread, meat), bread);

  LzReport r;
  r.estimate = beta[1];
  r.clusters = sample.clusters.size();
  r.units = n;
  r.variant = variant;
  if (variant == LzVariant::cr1) {
    const double G = static_cast<double>(r.clusters);
    const double nn = static_cast<double>(n);
    r.factor = (G / (G - 1.0)) * ((nn - 1.0) / (nn - 2.0));
  }
  r.se = std::sqrt(std::max(0.0, r.factor * sandwich[1][1]));
  return r;
}

} // namespace cdinfer
