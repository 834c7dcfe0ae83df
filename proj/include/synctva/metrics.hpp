// SPDX-License-Identifier: Apache-2.0
/**
 * @file   metrics.hpp
 * @brief  Classification metrics, paired t-test and 2-D PCA projection.
 */
#pragma once

#include <synctva/matrix.hpp>

#include <array>
#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace synctva {

/// Rows are true classes, columns predicted classes.
struct ConfusionMatrix {
  std::size_t classes = 0;
  std::vector<std::size_t> counts;

  explicit ConfusionMatrix(std::size_t c = 0) : classes(c), counts(c * c, 0) {}
  std::size_t &at(std::size_t t, std::size_t p) { return counts[t * classes + p]; }
  std::size_t at(std::size_t t, std::size_t p) const { return counts[t * classes + p]; }
  std::size_t row_sum(std::size_t t) const;
  std::size_t col_sum(std::size_t p) const;
  std::size_t total() const;

  friend bool operator==(const ConfusionMatrix &, const ConfusionMatrix &) = default;
};

ConfusionMatrix confusion_matrix(std::span<const int> y_true, std::span<const int> y_pred,
                                 std::size_t classes);

struct ClassStats {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;
};

/// F1 is 0 whenever precision + recall is 0.
std::vector<ClassStats> class_stats(const ConfusionMatrix &cm);

/// Support-weighted mean of per-class F1. Throws on an empty matrix.
double weighted_f1(const ConfusionMatrix &cm);
double weighted_f1(std::span<const int> y_true, std::span<const int> y_pred, std::size_t classes);

struct ClassAccuracy {
  std::vector<double> per_class;  // 0 for classes without support
  std::vector<bool> no_support;   // flagged classes, excluded from the mean
  double mean = 0.0;
};

ClassAccuracy per_class_accuracy(const ConfusionMatrix &cm);

struct MetricsReport {
  ConfusionMatrix confusion;
  std::vector<ClassStats> per_class;
  ClassAccuracy class_accuracy;
  double weighted_f1 = 0.0;
  double accuracy = 0.0;
  double macro_class_accuracy = 0.0;
};

MetricsReport evaluate_predictions(std::span<const int> y_true, std::span<const int> y_pred,
                                   std::size_t classes);

/// I_x(a, b) via Lentz continued fractions; accurate to ~1e-14.
double regularized_incomplete_beta(double a, double b, double x);
/// P(T <= t) for Student's t with `dof` degrees of freedom.
double student_t_cdf(double t, double dof);

struct TTestResult {
  double t = 0.0;
  double p = 1.0;
  std::size_t dof = 0;
  bool significant = false;
  /// Zero-variance differences with a nonzero mean: t = ±inf, p = 0.
  bool degenerate = false;
};

/// Two-sided paired t-test on a[i] - b[i]; needs equal lengths n >= 2.
TTestResult paired_t_test(std::span<const double> a, std::span<const double> b,
                          double alpha = 0.05);

struct Projection {
  std::vector<std::array<double, 2>> coords;
  std::array<std::vector<double>, 2> components;
  std::array<double, 2> variances{};
  std::vector<double> center;
  /// Second (or both) components are zero vectors.
  bool rank_deficient = false;
};

/// PCA onto the two leading covariance eigenvectors, found by power
/// iteration with deflation from a fixed start vector. Each component's
/// largest-magnitude loading is made positive.
Projection project_2d(const Matrix &features);

void write_confusion_csv(const std::filesystem::path &path, const ConfusionMatrix &cm,
                         const std::vector<std::string> &class_names);
void write_per_class_csv(const std::filesystem::path &path, const MetricsReport &report,
                         const std::vector<std::string> &class_names);
void write_metrics_json(const std::filesystem::path &path, const MetricsReport &report,
                        double loss);
void write_projection_csv(const std::filesystem::path &path, const Projection &proj,
                          std::span<const int> labels);

} // namespace synctva
