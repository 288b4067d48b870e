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

#ifndef PROBESCOPE_STUDENT_T_HPP_
#define PROBESCOPE_STUDENT_T_HPP_

namespace probescope {

/// P(|T| <= t) for Student's t with integer `df` >= 1, via the closed-form
/// trigonometric series in theta = atan(t / sqrt(df)).
double student_t_central_mass(double t, int df);

/// P(T <= t).
double student_t_cdf(double t, int df);

/// Two-tailed p-value P(|T| >= |t|).
double student_t_two_tailed_p(double t, int df);

/// t* with P(|T| > t*) = alpha, by bisection on the central mass.
double student_t_critical(int df, double alpha_two_tailed);

}  // namespace probescope

#endif  // PROBESCOPE_STUDENT_T_HPP_
