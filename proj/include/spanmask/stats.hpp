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

#ifndef SPANMASK_STATS_HPP
#define SPANMASK_STATS_HPP

#include <string>
#include <vector>

namespace spanmask {

// Regularized incomplete beta function I_x(a, b), evaluated by Lentz's
// continued fraction.
double incomplete_beta(double a, double b, double x);

// Two-sided tail probability of Student's t with nu degrees of freedom.
double student_t_two_sided_p(double t, double nu);

struct TTestResult {
  double t = 0.0;
  double p = 1.0;
  double dof = 0.0;
  double mean_a = 0.0;
  double mean_b = 0.0;
};

// Welch's unequal-variance t-test with Welch-Satterthwaite degrees of
// freedom. Degenerate zero-variance inputs: p = 1 for equal means, p = 0
// otherwise. Requires at least two samples per side.
TTestResult welch_t_test(const std::vector<double>& a,
                         const std::vector<double>& b);

// Pooled-variance two-sample t-test (same degenerate conventions).
TTestResult pooled_t_test(const std::vector<double>& a,
                          const std::vector<double>& b);

// "**" / "*" for gains at p < 0.01 / 0.05, "- -" / "-" for losses, else "".
std::string significance_marker(double p, bool gain);

}  // namespace spanmask

#endif  // SPANMASK_STATS_HPP
