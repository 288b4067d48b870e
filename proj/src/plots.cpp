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

// SVG renderings of a bundle. Plain string building; coordinates are fixed
// to two decimals so output is byte-stable across platforms.

#include <algorithm>
#include <cmath>
#include <sstream>

#include "probescope/csv.hpp"
#include "probescope/pipeline.hpp"

namespace probescope {

namespace {

constexpr double kWidth = 720.0;
constexpr double kLeft = 64.0;
constexpr double kRight = 24.0;

std::string fx(double v) { return csv::format_fixed(v, 2); }

struct Axis {
  double px0, px1;  // pixel range
  double v0, v1;    // value range
  double operator()(double v) const {
    if (v1 == v0) return 0.5 * (px0 + px1);
    return px0 + (v - v0) / (v1 - v0) * (px1 - px0);
  }
};

// Rounds the range outwards to a multiple of `step`.
std::pair<double, double> padded(double lo, double hi, double step) {
  if (!std::isfinite(lo) || !std::isfinite(hi)) return {0.0, 1.0};
  lo = std::floor(lo / step) * step;
  hi = std::ceil(hi / step) * step;
  if (hi <= lo) hi = lo + step;
  return {lo, hi};
}

double nice_step(double span) {
  const double raw = span / 5.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  for (double m : {1.0, 2.0, 5.0, 10.0})
    if (raw <= m * mag) return m * mag;
  return 10.0 * mag;
}

void header(std::ostringstream& out, double height, const Provenance& prov) {
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<!-- " << provenance_comment(prov) << " -->\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fx(kWidth) << "\" height=\""
      << fx(height) << "\" viewBox=\"0 0 " << fx(kWidth) << ' ' << fx(height) << "\" "
      << "font-family=\"sans-serif\" font-size=\"11\">\n"
      << "<rect x=\"0\" y=\"0\" width=\"" << fx(kWidth) << "\" height=\"" << fx(height)
      << "\" fill=\"white\"/>\n";
}

void axes(std::ostringstream& out, const Axis& x, const Axis& y, int num_layers,
          const std::string& ylabel) {
  out << "<g class=\"axes\" stroke=\"black\" stroke-width=\"1\">\n"
      << "<line x1=\"" << fx(x.px0) << "\" y1=\"" << fx(y.px0) << "\" x2=\"" << fx(x.px1)
      << "\" y2=\"" << fx(y.px0) << "\"/>\n"
      << "<line x1=\"" << fx(x.px0) << "\" y1=\"" << fx(y.px0) << "\" x2=\"" << fx(x.px0)
      << "\" y2=\"" << fx(y.px1) << "\"/>\n</g>\n";
  const int xstep = std::max(1, num_layers / 8);
  for (int l = 1; l <= num_layers; l += xstep) {
    out << "<text x=\"" << fx(x(l)) << "\" y=\"" << fx(y.px0 + 14) << "\" text-anchor=\"middle\">"
        << l << "</text>\n";
  }
  const double step = nice_step(y.v1 - y.v0);
  for (double v = std::ceil(y.v0 / step - 1e-9) * step; v <= y.v1 + 1e-9; v += step) {
    out << "<text x=\"" << fx(x.px0 - 6) << "\" y=\"" << fx(y(v) + 4) << "\" text-anchor=\"end\">"
        << csv::format_fixed(v, step < 0.1 ? 2 : 1) << "</text>\n";
  }
  out << "<text x=\"" << fx(0.5 * (x.px0 + x.px1)) << "\" y=\"" << fx(y.px0 + 30)
      << "\" text-anchor=\"middle\">layer</text>\n"
      << "<text x=\"16\" y=\"" << fx(0.5 * (y.px0 + y.px1)) << "\" text-anchor=\"middle\" "
      << "transform=\"rotate(-90 16 " << fx(0.5 * (y.px0 + y.px1)) << ")\">" << ylabel
      << "</text>\n";
}

std::string polyline(const std::vector<std::pair<double, double>>& pts, const Axis& x,
                     const Axis& y) {
  std::string s;
  for (const auto& [a, b] : pts) {
    if (!s.empty()) s += ' ';
    s += fx(x(a)) + ',' + fx(y(b));
  }
  return s;
}

}  // namespace

std::string auc_svg(const std::vector<SummaryRow>& summary,
                    const std::vector<BundleCluster>& clusters, const Provenance& provenance) {
  constexpr double height = 360.0;
  std::ostringstream out;
  header(out, height, provenance);
  const int n = summary.empty() ? 1 : summary.back().layer;

  double lo = 0.45, hi = 0.6;
  for (const auto& r : summary) {
    lo = std::min(lo, r.mean_auc - r.sem);
    hi = std::max(hi, r.mean_auc + r.sem);
  }
  const auto [v0, v1] = padded(lo, std::min(hi, 1.0), 0.05);
  const Axis x{kLeft, kWidth - kRight, 0.5, n + 0.5};
  const Axis y{height - 48.0, 28.0, v0, v1};

  int significant = 0;
  out << "<g class=\"clusters\">\n";
  for (const auto& c : clusters) {
    if (!c.significant) continue;
    ++significant;
    out << "<rect class=\"cluster\" data-layer-start=\"" << c.first_layer << "\" data-layer-end=\""
        << c.last_layer << "\" x=\"" << fx(x(c.first_layer - 0.5)) << "\" y=\"" << fx(y.px1)
        << "\" width=\"" << fx(x(c.last_layer + 0.5) - x(c.first_layer - 0.5)) << "\" height=\""
        << fx(y.px0 - y.px1) << "\" fill=\"#bbbbbb\" fill-opacity=\"0.45\"/>\n";
  }
  out << "</g>\n";

  std::vector<std::pair<double, double>> upper, lower, mean;
  for (const auto& r : summary) {
    mean.emplace_back(r.layer, r.mean_auc);
    upper.emplace_back(r.layer, r.mean_auc + r.sem);
    lower.emplace_back(r.layer, r.mean_auc - r.sem);
  }
  std::reverse(lower.begin(), lower.end());
  upper.insert(upper.end(), lower.begin(), lower.end());
  out << "<polygon class=\"sem-band\" points=\"" << polyline(upper, x, y)
      << "\" fill=\"#1f77b4\" fill-opacity=\"0.25\" stroke=\"none\"/>\n";
  out << "<line class=\"chance\" x1=\"" << fx(x.px0) << "\" y1=\"" << fx(y(0.5)) << "\" x2=\""
      << fx(x.px1) << "\" y2=\"" << fx(y(0.5))
      << "\" stroke=\"#d62728\" stroke-width=\"1\" stroke-dasharray=\"6,4\"/>\n";
  out << "<polyline class=\"mean-auc\" points=\"" << polyline(mean, x, y)
      << "\" fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"2\"/>\n";
  axes(out, x, y, n, "ROC-AUC");

  out << "<g class=\"legend\">\n"
      << "<text x=\"" << fx(kLeft + 8) << "\" y=\"18\">mean AUC (band: 1 SEM), dashed: chance</text>\n";
  if (significant == 0)
    out << "<text x=\"" << fx(kWidth - kRight) << "\" y=\"18\" text-anchor=\"end\">"
        << "no significant cluster</text>\n";
  else
    out << "<text x=\"" << fx(kWidth - kRight) << "\" y=\"18\" text-anchor=\"end\">"
        << "grey: significant cluster</text>\n";
  out << "</g>\n</svg>\n";
  return out.str();
}

std::string pr_svg(const std::vector<PRRow>& rows, const Provenance& provenance) {
  constexpr double height = 520.0;
  std::ostringstream out;
  header(out, height, provenance);
  const int n = rows.empty() ? 1 : rows.back().layer;

  double lo = INFINITY, hi = -INFINITY, dlo = 0.0, dhi = 0.0;
  for (const auto& r : rows) {
    lo = std::min({lo, r.control, r.violation});
    hi = std::max({hi, r.control, r.violation});
    dlo = std::min(dlo, r.diff);
    dhi = std::max(dhi, r.diff);
  }
  if (rows.empty()) lo = 0.0, hi = 1.0;
  const auto [p0, p1] = padded(lo, hi, nice_step(std::max(hi - lo, 1e-6)));
  const auto [d0, d1] = padded(dlo, dhi, nice_step(std::max(dhi - dlo, 1e-6)));
  const Axis x{kLeft, kWidth - kRight, 0.5, n + 0.5};
  const Axis top{300.0, 28.0, p0, p1};
  const Axis bottom{height - 48.0, 350.0, d0, d1};

  std::vector<std::pair<double, double>> control, violation, diff;
  for (const auto& r : rows) {
    control.emplace_back(r.layer, r.control);
    violation.emplace_back(r.layer, r.violation);
    diff.emplace_back(r.layer, r.diff);
  }
  out << "<polyline class=\"pr-control\" points=\"" << polyline(control, x, top)
      << "\" fill=\"none\" stroke=\"#2ca02c\" stroke-width=\"2\"/>\n";
  out << "<polyline class=\"pr-violation\" points=\"" << polyline(violation, x, top)
      << "\" fill=\"none\" stroke=\"#d62728\" stroke-width=\"2\"/>\n";
  axes(out, x, top, n, "participation ratio");

  out << "<line class=\"zero\" x1=\"" << fx(x.px0) << "\" y1=\"" << fx(bottom(0.0)) << "\" x2=\""
      << fx(x.px1) << "\" y2=\"" << fx(bottom(0.0))
      << "\" stroke=\"#888888\" stroke-width=\"1\" stroke-dasharray=\"4,4\"/>\n";
  out << "<polyline class=\"pr-diff\" points=\"" << polyline(diff, x, bottom)
      << "\" fill=\"none\" stroke=\"black\" stroke-width=\"1.5\"/>\n";
  axes(out, x, bottom, n, "violation - control");

  out << "<g class=\"legend\">\n"
      << "<text x=\"" << fx(kLeft + 8) << "\" y=\"18\" fill=\"#2ca02c\">control</text>\n"
      << "<text x=\"" << fx(kLeft + 68) << "\" y=\"18\" fill=\"#d62728\">violation</text>\n"
      << "</g>\n</svg>\n";
  return out.str();
}

}  // namespace probescope
