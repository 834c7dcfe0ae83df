// SPDX-License-Identifier: Apache-2.0
#include <synctva/errors.hpp>
#include <synctva/metrics.hpp>
#include <synctva/rng.hpp>

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

namespace synctva {

std::size_t ConfusionMatrix::row_sum(std::size_t t) const {
  std::size_t s = 0;
  for (std::size_t p = 0; p < classes; ++p)
    s += at(t, p);
  return s;
}

std::size_t ConfusionMatrix::col_sum(std::size_t p) const {
  std::size_t s = 0;
  for (std::size_t t = 0; t < classes; ++t)
    s += at(t, p);
  return s;
}

std::size_t ConfusionMatrix::total() const {
  return std::accumulate(counts.begin(), counts.end(), std::size_t{0});
}

ConfusionMatrix confusion_matrix(std::span<const int> y_true, std::span<const int> y_pred,
                                 std::size_t classes) {
  if (y_true.size() != y_pred.size())
    throw DimensionError("confusion_matrix: " + std::to_string(y_true.size()) +
                         " true labels vs " + std::to_string(y_pred.size()) + " predictions");
  ConfusionMatrix cm(classes);
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    for (int l : {y_true[i], y_pred[i]})
      if (l < 0 || static_cast<std::size_t>(l) >= classes)
        throw DimensionError("confusion_matrix: label " + std::to_string(l) + " outside [0, " +
                             std::to_string(classes) + ")");
    ++cm.at(static_cast<std::size_t>(y_true[i]), static_cast<std::size_t>(y_pred[i]));
  }
  return cm;
}

std::vector<ClassStats> class_stats(const ConfusionMatrix &cm) {
  std::vector<ClassStats> out(cm.classes);
  for (std::size_t c = 0; c < cm.classes; ++c) {
    const double tp = static_cast<double>(cm.at(c, c));
    const std::size_t predicted = cm.col_sum(c);
    ClassStats &s = out[c];
    s.support = cm.row_sum(c);
    s.precision = predicted ? tp / static_cast<double>(predicted) : 0.0;
    s.recall = s.support ? tp / static_cast<double>(s.support) : 0.0;
    const double pr = s.precision + s.recall;
    s.f1 = pr > 0.0 ? 2.0 * s.precision * s.recall / pr : 0.0;
  }
  return out;
}

double weighted_f1(const ConfusionMatrix &cm) {
  const std::size_t total = cm.total();
  if (total == 0)
    throw DimensionError("weighted_f1: no samples");
  double wf1 = 0.0;
  for (const ClassStats &s : class_stats(cm))
    wf1 += static_cast<double>(s.support) / static_cast<double>(total) * s.f1;
  return wf1;
}

double weighted_f1(std::span<const int> y_true, std::span<const int> y_pred,
                   std::size_t classes) {
  return weighted_f1(confusion_matrix(y_true, y_pred, classes));
}

ClassAccuracy per_class_accuracy(const ConfusionMatrix &cm) {
  ClassAccuracy out;
  out.per_class.assign(cm.classes, 0.0);
  out.no_support.assign(cm.classes, false);
  double sum = 0.0;
  std::size_t counted = 0;
  for (std::size_t c = 0; c < cm.classes; ++c) {
    const std::size_t support = cm.row_sum(c);
    if (support == 0) {
      out.no_support[c] = true;
      continue;
    }
    out.per_class[c] = static_cast<double>(cm.at(c, c)) / static_cast<double>(support);
    sum += out.per_class[c];
    ++counted;
  }
  out.mean = counted ? sum / static_cast<double>(counted) : 0.0;
  return out;
}

MetricsReport evaluate_predictions(std::span<const int> y_true, std::span<const int> y_pred,
                                   std::size_t classes) {
  MetricsReport r;
  r.confusion = confusion_matrix(y_true, y_pred, classes);
  r.per_class = class_stats(r.confusion);
  r.weighted_f1 = weighted_f1(r.confusion);
  std::size_t correct = 0;
  for (std::size_t c = 0; c < classes; ++c)
    correct += r.confusion.at(c, c);
  r.accuracy = static_cast<double>(correct) / static_cast<double>(r.confusion.total());
  r.class_accuracy = per_class_accuracy(r.confusion);
  r.macro_class_accuracy = r.class_accuracy.mean;
  return r;
}

namespace {

// Continued fraction for I_x(a, b), modified Lentz evaluation.
double beta_continued_fraction(double a, double b, double x) {
  constexpr int kMaxIter = 10000;
  constexpr double kEps = 1e-16;
  constexpr double kTiny = 1e-300;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny)
    d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny)
      d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny)
      c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny)
      d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny)
      c = kTiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < kEps)
      return h;
  }
  return h;
}

} // namespace

double regularized_incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0) || !(b > 0.0))
    throw ConfigError("incomplete beta needs a, b > 0");
  if (x <= 0.0)
    return 0.0;
  if (x >= 1.0)
    return 1.0;
  const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                           a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0))
    return front * beta_continued_fraction(a, b, x) / a;
  return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double student_t_cdf(double t, double dof) {
  if (std::isinf(t))
    return t > 0 ? 1.0 : 0.0;
  const double tail = 0.5 * regularized_incomplete_beta(0.5 * dof, 0.5, dof / (dof + t * t));
  return t >= 0.0 ? 1.0 - tail : tail;
}

TTestResult paired_t_test(std::span<const double> a, std::span<const double> b, double alpha) {
  if (a.size() != b.size())
    throw DimensionError("paired_t_test: samples of length " + std::to_string(a.size()) +
                         " and " + std::to_string(b.size()));
  const std::size_t n = a.size();
  if (n < 2)
    throw DimensionError("paired_t_test: need at least 2 pairs");
  TTestResult r;
  r.dof = n - 1;
  std::vector<double> diff(n);
  for (std::size_t i = 0; i < n; ++i)
    diff[i] = a[i] - b[i];
  const double mean =
    std::accumulate(diff.begin(), diff.end(), 0.0) / static_cast<double>(n);
  double ss = 0.0;
  for (double x : diff)
    ss += (x - mean) * (x - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  if (std::all_of(diff.begin(), diff.end(), [](double x) { return x == 0.0; })) {
    r.t = 0.0;
    r.p = 1.0;
  } else if (sd == 0.0) {
    r.t = std::copysign(std::numeric_limits<double>::infinity(), mean);
    r.p = 0.0;
    r.degenerate = true;
  } else {
    r.t = mean / (sd / std::sqrt(static_cast<double>(n)));
    const double nu = static_cast<double>(r.dof);
    r.p = regularized_incomplete_beta(0.5 * nu, 0.5, nu / (nu + r.t * r.t));
  }
  r.significant = r.p < alpha;
  return r;
}

namespace {

std::vector<double> sym_matvec(const std::vector<double> &m, const std::vector<double> &v) {
  const std::size_t d = v.size();
  std::vector<double> out(d, 0.0);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j)
      out[i] += m[i * d + j] * v[j];
  return out;
}

double norm2(const std::vector<double> &v) {
  double s = 0.0;
  for (double x : v)
    s += x * x;
  return std::sqrt(s);
}

// Leading eigenpair of a PSD matrix, restricted to the complement of `avoid`.
std::pair<std::vector<double>, double> power_iterate(const std::vector<double> &cov,
                                                     std::size_t d,
                                                     const std::vector<double> *avoid) {
  Rng rng(0x9ca5e7ULL);
  std::vector<double> v(d);
  for (double &x : v)
    x = rng.normal();
  auto orthogonalize = [&](std::vector<double> &x) {
    if (!avoid)
      return;
    double dot = 0.0;
    for (std::size_t i = 0; i < d; ++i)
      dot += x[i] * (*avoid)[i];
    for (std::size_t i = 0; i < d; ++i)
      x[i] -= dot * (*avoid)[i];
  };
  orthogonalize(v);
  double n = norm2(v);
  for (double &x : v)
    x /= n;
  for (int iter = 0; iter < 200000; ++iter) {
    std::vector<double> w = sym_matvec(cov, v);
    orthogonalize(w);
    n = norm2(w);
    if (n == 0.0)
      return {std::vector<double>(d, 0.0), 0.0};
    double change = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      w[i] /= n;
      change = std::max(change, std::abs(w[i] - v[i]));
    }
    v = std::move(w);
    if (change < 1e-14)
      break;
  }
  const auto cv = sym_matvec(cov, v);
  double lambda = 0.0;
  for (std::size_t i = 0; i < d; ++i)
    lambda += v[i] * cv[i];
  return {v, lambda};
}

} // namespace

Projection project_2d(const Matrix &features) {
  const std::size_t m = features.rows, d = features.cols;
  if (m < 2 || d < 2)
    throw DimensionError("project_2d: need at least 2 points of dimension >= 2, got " +
                         std::to_string(m) + "x" + std::to_string(d));
  Projection out;
  out.center.assign(d, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < d; ++j)
      out.center[j] += features(i, j);
  for (double &c : out.center)
    c /= static_cast<double>(m);
  std::vector<double> centered(m * d);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < d; ++j)
      centered[i * d + j] = features(i, j) - out.center[j];
  std::vector<double> cov(d * d, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t a = 0; a < d; ++a)
      for (std::size_t b = 0; b < d; ++b)
        cov[a * d + b] += centered[i * d + a] * centered[i * d + b];
  for (double &c : cov)
    c /= static_cast<double>(m - 1);

  double trace = 0.0;
  for (std::size_t j = 0; j < d; ++j)
    trace += cov[j * d + j];
  const double floor = 1e-12 * std::max(trace, 1e-300);

  auto [v1, l1] = power_iterate(cov, d, nullptr);
  if (!(l1 > floor)) {
    v1.assign(d, 0.0);
    l1 = 0.0;
  }
  std::vector<double> v2(d, 0.0);
  double l2 = 0.0;
  if (l1 > 0.0) {
    auto [v, l] = power_iterate(cov, d, &v1);
    if (l > floor) {
      v2 = std::move(v);
      l2 = l;
    }
  }
  out.rank_deficient = l2 == 0.0;

  for (auto *v : {&v1, &v2}) {
    auto it = std::max_element(v->begin(), v->end(),
                               [](double x, double y) { return std::abs(x) < std::abs(y); });
    if (*it < 0.0)
      for (double &x : *v)
        x = -x;
  }
  out.components = {v1, v2};
  out.variances = {l1, l2};
  out.coords.resize(m);
  for (std::size_t i = 0; i < m; ++i) {
    double x = 0.0, y = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      x += centered[i * d + j] * v1[j];
      y += centered[i * d + j] * v2[j];
    }
    out.coords[i] = {x, y};
  }
  return out;
}

namespace {

std::ofstream open_out(const std::filesystem::path &path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out)
    throw IoError("cannot open '" + path.string() + "' for writing");
  return out;
}

void finish(std::ofstream &out, const std::filesystem::path &path) {
  out.flush();
  if (!out)
    throw IoError("write failed for '" + path.string() + "'");
}

} // namespace

void write_confusion_csv(const std::filesystem::path &path, const ConfusionMatrix &cm,
                         const std::vector<std::string> &class_names) {
  auto out = open_out(path);
  out << "true\\pred";
  for (std::size_t c = 0; c < cm.classes; ++c)
    out << ',' << class_names.at(c);
  out << '\n';
  for (std::size_t t = 0; t < cm.classes; ++t) {
    out << class_names.at(t);
    for (std::size_t p = 0; p < cm.classes; ++p)
      out << ',' << cm.at(t, p);
    out << '\n';
  }
  finish(out, path);
}

void write_per_class_csv(const std::filesystem::path &path, const MetricsReport &report,
                         const std::vector<std::string> &class_names) {
  auto out = open_out(path);
  out << "class,precision,recall,f1,support,accuracy,no_support\n";
  for (std::size_t c = 0; c < report.per_class.size(); ++c) {
    const ClassStats &s = report.per_class[c];
    out << class_names.at(c) << ',' << format_number(s.precision) << ','
        << format_number(s.recall) << ',' << format_number(s.f1) << ',' << s.support << ','
        << format_number(report.class_accuracy.per_class[c]) << ','
        << (report.class_accuracy.no_support[c] ? 1 : 0) << '\n';
  }
  finish(out, path);
}

void write_metrics_json(const std::filesystem::path &path, const MetricsReport &report,
                        double loss) {
  nlohmann::ordered_json doc;
  doc["utterances"] = report.confusion.total();
  doc["loss"] = loss;
  doc["accuracy"] = report.accuracy;
  doc["weighted_f1"] = report.weighted_f1;
  doc["macro_class_accuracy"] = report.macro_class_accuracy;
  auto out = open_out(path);
  out << doc.dump(2) << '\n';
  finish(out, path);
}

void write_projection_csv(const std::filesystem::path &path, const Projection &proj,
                          std::span<const int> labels) {
  if (labels.size() != proj.coords.size())
    throw DimensionError("projection has " + std::to_string(proj.coords.size()) +
                         " points but " + std::to_string(labels.size()) + " labels");
  auto out = open_out(path);
  out << "x,y,label\n";
  for (std::size_t i = 0; i < labels.size(); ++i)
    out << format_number(proj.coords[i][0]) << ',' << format_number(proj.coords[i][1]) << ','
        << labels[i] << '\n';
  finish(out, path);
}

} // namespace synctva
