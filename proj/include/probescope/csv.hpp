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

#ifndef PROBESCOPE_CSV_HPP_
#define PROBESCOPE_CSV_HPP_

#include <string>
#include <string_view>
#include <vector>

namespace probescope::csv {

/// RFC 4180 quoting, only when the field needs it.
std::string quote(std::string_view field);

/// Splits one CSV record. Lines starting with '#' are comments and are
/// expected to be skipped by the caller.
std::vector<std::string> split_record(std::string_view line);

/// Shortest round-trip decimal form of a double ("%.17g" trimmed).
std::string format_double(double value);

/// Fixed precision decimal, for human-facing tables and SVG coordinates.
std::string format_fixed(double value, int digits);

double parse_double(std::string_view text);
long long parse_int(std::string_view text);

}  // namespace probescope::csv

#endif  // PROBESCOPE_CSV_HPP_
