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

// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <unistd.h>

#include <Eigen/QR>

#include "probescope/decoding.hpp"
#include "probescope/dimensionality.hpp"
#include "probescope/moments.hpp"
#include "probescope/pipeline.hpp"
#include "probescope/random.hpp"
#include "probescope/roc.hpp"
#include "probescope/student_t.hpp"
#include "probescope/synth.hpp"
#include "test_util.hpp"

using namespace probescope;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(const std::string& name, const std::function<Outcome()>& check) {
  Outcome o;
  try {
    o = check();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  if (!o.pass) ++failures;
  std::printf("%s  %s: %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
  std::fflush(stdout);
}

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

double phi(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) files[fs::relative(e.path(), dir).generic_string()] = testing::slurp(e.path());
  return files;
}

PipelineConfig planted_config(const fs::path& out) {
  PipelineConfig c;
  c.synthetic = PlantSpec{};  // L=32, d=64, 760 pairs, delta=3, band 18..30, seed 0
  c.output_dir = out;
  return c;
}

Eigen::MatrixXd gaussian(Rng& rng, int rows, int cols) {
  Eigen::MatrixXd x(rows, cols);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
  return x;
}

}  // namespace

int main() {
  testing::TempDir scratch("acceptance");

  report("planted-cluster recovery", [&] {
    const auto t0 = std::chrono::steady_clock::now();
    const PipelineResult r = run_pipeline(planted_config(scratch / "planted-a"));
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::vector<const ReportedCluster*> sig;
    for (const auto& c : r.clusters.clusters)
      if (c.significant) sig.push_back(&c);
    std::string detail = std::to_string(sig.size()) + " significant cluster(s)";
    bool ok = sig.size() == 1;
    if (ok) {
      const Cluster& c = sig[0]->cluster;
      const int covered = std::max(0, std::min(c.last_layer, 30) - std::max(c.first_layer, 18) + 1);
      const double coverage = covered / 13.0;
      ok = sig[0]->corrected_p < 0.01 && coverage >= 0.9 && c.first_layer >= 17 && c.last_layer <= 31;
      detail += ", layers " + std::to_string(c.first_layer) + "-" + std::to_string(c.last_layer) +
                fmt(", corrected p %.4g", sig[0]->corrected_p) + fmt(", covers %.0f%% of 18-30", 100 * coverage);
    }
    ok = ok && secs < 60.0;
    return Outcome{ok, detail + fmt(", %.1f s (limit 60 s)", secs)};
  });

  report("null calibration (FWER)", [&] {
    // 200 null replicates through the full pipeline at alpha = 0.05.
    int hits = 0;
    const int runs = 200;
    for (int i = 0; i < runs; ++i) {
      PipelineConfig c;
      PlantSpec spec;
      spec.num_pairs = 100;
      spec.hidden_dim = 8;
      spec.token_count = 2;
      spec.effect_size = 0.0;
      spec.seed = 1000 + static_cast<std::uint64_t>(i);
      c.synthetic = spec;
      c.seed = 1000 + static_cast<std::uint64_t>(i);
      c.alpha = 0.05;
      c.output_dir = scratch / "null";
      hits += run_pipeline(c).clusters.significant_count() > 0;
    }
    const double rate = static_cast<double>(hits) / runs;
    return Outcome{rate <= 0.08, std::to_string(hits) + "/200 runs with a significant cluster" +
                                     fmt(" (rate %.3f, limit 0.08)", rate)};
  });

  report("AUC oracle equivalence", [&] {
    Rng rng(2024);
    int mismatches = 0;
    for (int trial = 0; trial < 1000; ++trial) {
      const int n = 2 + static_cast<int>(rng.below(29));
      Eigen::VectorXd s(n);
      Eigen::VectorXi y(n);
      const bool ties = trial % 2 == 0;
      for (int i = 0; i < n; ++i) {
        s(i) = ties ? static_cast<double>(rng.below(5)) : rng.normal();
        y(i) = rng.coin();
      }
      y(rng.below(n)) = 1;
      int zero = static_cast<int>(rng.below(n));
      while (y.sum() == n) y(zero) = 0, zero = static_cast<int>(rng.below(n));
      if (y.sum() == n) continue;
      double wins = 0, pairs = 0;
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          if (y(i) == 1 && y(j) == 0) {
            pairs += 1;
            wins += s(i) > s(j) ? 1.0 : (s(i) == s(j) ? 0.5 : 0.0);
          }
      mismatches += roc_auc(s, y) != wins / pairs;
    }
    return Outcome{mismatches == 0, std::to_string(mismatches) + " mismatches in 1000 instances (N <= 30, exact equality)"};
  });

  report("decoder ceiling", [&] {
    PlantSpec spec;
    spec.num_pairs = 2000;
    const ActivationRun run = generate_synthetic(spec);
    const double bayes = phi(3.0 / std::sqrt(2.0));
    // Monte-Carlo cross-check of the closed form.
    Rng mc(77);
    std::int64_t wins = 0;
    const int draws = 1000000;
    for (int i = 0; i < draws; ++i) wins += 3.0 + mc.normal() > mc.normal();
    const double mc_auc = static_cast<double>(wins) / draws;

    const CVSpec cv{5, 0, true, true};
    FeatureOptions fo{Pooling::Flatten, NormalizeMode::PooledScalar, TokenPolicy::TruncateToMin, OnDegenerate::Throw};
    double worst_in = 0, worst_out = 0;
    int worst_in_layer = 0, worst_out_layer = 0;
    for (int l = 1; l <= spec.num_layers; ++l) {
      const double auc = decode_layer(build_feature_table(run, l, fo), FeatureSubset::mean_only(), cv).mean_auc;
      const bool in = l >= 18 && l <= 30;
      const double dev = std::abs(auc - (in ? bayes : 0.5));
      if (in && dev > worst_in) worst_in = dev, worst_in_layer = l;
      if (!in && dev > worst_out) worst_out = dev, worst_out_layer = l;
    }
    const bool ok = worst_in <= 0.01 && worst_out <= 0.02 && std::abs(mc_auc - bayes) < 0.002;
    return Outcome{ok, fmt("Phi(3/sqrt2) = %.4f", bayes) + fmt(" (Monte-Carlo %.4f)", mc_auc) +
                           fmt("; worst in-band |dev| %.4f", worst_in) + " at layer " + std::to_string(worst_in_layer) +
                           fmt(" (limit 0.01); worst out-of-band |dev| %.4f", worst_out) + " at layer " +
                           std::to_string(worst_out_layer) + " (limit 0.02)"};
  });

  report("logistic-probe gradient check", [&] {
    Rng rng(31);
    double worst = 0;
    for (int trial = 0; trial < 100; ++trial) {
      const int n = 5 + static_cast<int>(rng.below(60)), p = 1 + static_cast<int>(rng.below(6));
      const Eigen::MatrixXd x = gaussian(rng, n, p);
      Eigen::VectorXi y(n);
      for (int i = 0; i < n; ++i) y(i) = i % 2;
      Eigen::VectorXd w(p);
      for (int j = 0; j < p; ++j) w(j) = rng.normal();
      const double b = rng.normal(), lambda = 3.0 * rng.uniform();
      const Eigen::VectorXd g = logistic_gradient(x, y, lambda, w, b);
      Eigen::VectorXd fd(p + 1);
      const double h = 1e-5;
      for (int j = 0; j <= p; ++j) {
        Eigen::VectorXd wp = w, wm = w;
        double bp = b, bm = b;
        if (j < p) wp(j) += h, wm(j) -= h;
        else bp += h, bm -= h;
        fd(j) = (logistic_objective(x, y, lambda, wp, bp) - logistic_objective(x, y, lambda, wm, bm)) / (2 * h);
      }
      worst = std::max(worst, (g - fd).norm() / std::max(g.norm(), fd.norm()));
    }
    return Outcome{worst <= 1e-5, fmt("max relative error %.3g over 100 instances (limit 1e-5)", worst)};
  });

  report("t-threshold consistency", [&] {
    const double t = student_t_critical(4, 0.05);
    const bool ok = std::abs(t - 2.776) < 5e-4 && std::abs(t - 2.78) < 0.005;
    return Outcome{ok, fmt("df=4 two-tailed 0.05 critical value %.6f", t) + " (expected 2.776, threshold 2.78)"};
  });

  report("PR exactness", [&] {
    const double e1 = std::abs(participation_ratio(Eigen::Vector3d(2, 1, 1)) - 16.0 / 6.0);
    Rng rng(55);
    double route = 0, rot = 0, scale = 0;
    for (int trial = 0; trial < 50; ++trial) {
      const int n = 3 + static_cast<int>(rng.below(48)), p = 2 + static_cast<int>(rng.below(49));
      const Eigen::MatrixXd x = gaussian(rng, n, p);
      const double pr = matrix_pr(x, SpectrumRoute::Covariance);
      route = std::max(route, std::abs(matrix_pr(x, SpectrumRoute::Gram) - pr));
      Eigen::HouseholderQR<Eigen::MatrixXd> qr(gaussian(rng, p, p));
      const Eigen::MatrixXd q = qr.householderQ();
      rot = std::max(rot, std::abs(matrix_pr(x * q) - matrix_pr(x)));
      scale = std::max(scale, std::abs(matrix_pr(0.37 * x) - matrix_pr(x)));
    }
    const bool ok = e1 <= 1e-12 && route <= 1e-8 && rot <= 1e-9 && scale <= 1e-9;
    return Outcome{ok, fmt("|PR([2,1,1]) - 16/6| = %.1e", e1) + fmt("; Gram vs covariance %.1e", route) +
                           fmt("; rotation %.1e", rot) + fmt("; scaling %.1e", scale)};
  });

  report("moments", [&] {
    const auto m = moments(Eigen::Vector3d(1, 2, 3));
    const bool exact = m.variance == 1.0 && m.skewness == 0.0 && m.kurtosis == -1.5;
    Rng rng(66);
    double worst = 0;
    for (int trial = 0; trial < 200; ++trial) {
      Eigen::VectorXd v(10 + rng.below(90));
      for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = std::exp(rng.normal());
      const double a = 0.05 + 20 * rng.uniform(), b = 50 * rng.normal();
      const auto p = moments(v);
      const auto q = moments(Eigen::VectorXd((a * v.array() + b).matrix()));
      worst = std::max({worst, std::abs(p.skewness - q.skewness), std::abs(p.kurtosis - q.kurtosis)});
    }
    return Outcome{exact && worst <= 1e-10,
                   std::string(exact ? "[1,2,3] gives var 1, skew 0, kurt -1.5 exactly" : "[1,2,3] inexact") +
                       fmt("; affine skew/kurt drift %.1e (limit 1e-10)", worst)};
  });

  report("determinism", [&] {
    run_pipeline(planted_config(scratch / "planted-b"));
    const auto a = snapshot(scratch / "planted-a");
    const auto b = snapshot(scratch / "planted-b");
    std::size_t differing = 0;
    for (const auto& [name, bytes] : a) differing += !b.count(name) || b.at(name) != bytes;
    const bool ok = a.size() == b.size() && differing == 0 && !a.empty();
    return Outcome{ok, std::to_string(a.size()) + " files, " + std::to_string(differing) + " differ"};
  });

  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
