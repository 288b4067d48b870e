// Copyright 2026 The probescope Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "probescope/student_t.hpp"

#include <cmath>
#include <numbers>

#include "probescope/error.hpp"

namespace probescope {

double student_t_central_mass(double t, int df) {
  if (df < 1) throw ConfigError("student t: df must be >= 1");
  if (std::isinf(t)) return 1.0;
  const double a = std::abs(t);
  const double theta = std::atan(a / std::sqrt(static_cast<double>(df)));
  const double s = std::sin(theta);
  const double c2 = std::cos(theta) * std::cos(theta);
  if (df % 2 == 0) {
    double term = 1.0;
    double sum = 1.0;
    for (int j = 2; j <= df - 2; j += 2) {
      term *= c2 * (j - 1) / j;
      sum += term;
    }
    return s * sum;
  }
  if (df == 1) return 2.0 * theta / std::numbers::pi;
  const double c = std::cos(theta);
  double term = c;
  double sum = c;
  for (int j = 3; j <= df - 2; j += 2) {
    term *= c2 * (j - 1) / j;
    sum += term;
  }
  return 2.0 / std::numbers::pi * (theta + s * sum);
}

double student_t_cdf(double t, int df) {
  const double mass = student_t_central_mass(t, df);
  return t >= 0 ? 0.5 + 0.5 * mass : 0.5 - 0.5 * mass;
}

double student_t_two_tailed_p(double t, int df) { return 1.0 - student_t_central_mass(t, df); }

double student_t_critical(int df, double alpha_two_tailed) {
  if (!(alpha_two_tailed > 0.0 && alpha_two_tailed < 1.0))
    throw ConfigError("student t: alpha must lie in (0, 1)");
  const double target = 1.0 - alpha_two_tailed;
  double lo = 0.0;
  double hi = 1.0;
  while (student_t_central_mass(hi, df) < target) hi *= 2.0;
  for (int i = 0; i < 200 && hi - lo > 1e-14 * hi; ++i) {
    const double mid = 0.5 * (lo + hi);
    (student_t_central_mass(mid, df) < target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace probescope
