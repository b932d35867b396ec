// Copyright 2026 The spanmask Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "spanmask/stats.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace spanmask {

namespace {

// Lentz's method for the continued fraction of the incomplete beta function.
double betacf(double a, double b, double x) {
  constexpr int kMaxIter = 300;
  constexpr double kEps = 3.0e-14;
  constexpr double kFpMin = 1.0e-300;

  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kFpMin) d = kFpMin;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) return h;
  }
  throw std::runtime_error("incomplete_beta: continued fraction did not converge");
}

struct Moments {
  double mean = 0.0;
  double variance = 0.0;  // sample variance, n - 1 denominator
  double n = 0.0;
};

Moments moments(const std::vector<double>& xs) {
  if (xs.size() < 2) {
    throw std::invalid_argument("t-test requires at least 2 samples per side");
  }
  Moments m;
  m.n = static_cast<double>(xs.size());
  for (double x : xs) m.mean += x;
  m.mean /= m.n;
  for (double x : xs) m.variance += (x - m.mean) * (x - m.mean);
  m.variance /= (m.n - 1.0);
  return m;
}

TTestResult degenerate(const Moments& a, const Moments& b) {
  TTestResult r;
  r.mean_a = a.mean;
  r.mean_b = b.mean;
  if (a.mean == b.mean) {
    r.t = 0.0;
    r.p = 1.0;
  } else {
    r.t = a.mean > b.mean ? std::numeric_limits<double>::infinity()
                          : -std::numeric_limits<double>::infinity();
    r.p = 0.0;
  }
  return r;
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
  if (a <= 0.0 || b <= 0.0) {
    throw std::invalid_argument("incomplete_beta requires a, b > 0");
  }
  if (x < 0.0 || x > 1.0) {
    throw std::invalid_argument("incomplete_beta requires x in [0, 1]");
  }
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                          a * std::log(x) + b * std::log(1.0 - x);
  const double front = std::exp(ln_front);
  if (x < (a + 1.0) / (a + b + 2.0)) {
    return front * betacf(a, b, x) / a;
  }
  return 1.0 - front * betacf(b, a, 1.0 - x) / b;
}

double student_t_two_sided_p(double t, double nu) {
  if (nu <= 0.0) throw std::invalid_argument("degrees of freedom must be > 0");
  if (std::isinf(t)) return 0.0;
  const double x = nu / (nu + t * t);
  return incomplete_beta(0.5 * nu, 0.5, x);
}

TTestResult welch_t_test(const std::vector<double>& a,
                         const std::vector<double>& b) {
  const Moments ma = moments(a);
  const Moments mb = moments(b);
  const double va = ma.variance / ma.n;
  const double vb = mb.variance / mb.n;
  if (va + vb == 0.0) return degenerate(ma, mb);

  TTestResult r;
  r.mean_a = ma.mean;
  r.mean_b = mb.mean;
  r.t = (ma.mean - mb.mean) / std::sqrt(va + vb);
  r.dof = (va + vb) * (va + vb) /
          (va * va / (ma.n - 1.0) + vb * vb / (mb.n - 1.0));
  r.p = student_t_two_sided_p(r.t, r.dof);
  return r;
}

TTestResult pooled_t_test(const std::vector<double>& a,
                          const std::vector<double>& b) {
  const Moments ma = moments(a);
  const Moments mb = moments(b);
  const double dof = ma.n + mb.n - 2.0;
  const double pooled =
      ((ma.n - 1.0) * ma.variance + (mb.n - 1.0) * mb.variance) / dof;
  if (pooled == 0.0) return degenerate(ma, mb);

  TTestResult r;
  r.mean_a = ma.mean;
  r.mean_b = mb.mean;
  r.dof = dof;
  r.t = (ma.mean - mb.mean) /
        std::sqrt(pooled * (1.0 / ma.n + 1.0 / mb.n));
  r.p = student_t_two_sided_p(r.t, r.dof);
  return r;
}

std::string significance_marker(double p, bool gain) {
  if (p < 0.01) return gain ? "**" : "- -";
  if (p < 0.05) return gain ? "*" : "-";
  return "";
}

}  // namespace spanmask
