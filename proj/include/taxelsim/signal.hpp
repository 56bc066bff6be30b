// Copyright 2026 The taxelsim Authors
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

#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "taxelsim/contact.hpp"
#include "taxelsim/io.hpp"

namespace taxelsim {

// Two-stage reading normalization: below the noise threshold tau readings
// scale by a fixed data-sheet maximum, above it by the current frame maximum.
struct NormalizationConfig {
  double tau = 51.0;           // 5% of a 10-bit ADC range
  double s_max_fixed = 1023.0; // 10-bit ADC full scale
  double epsilon = 1e-9;       // floor for the frame maximum

  void validate() const {
    if (!(tau > 0.0 && tau < s_max_fixed))
      throw std::runtime_error("normalization: need 0 < tau < s_max_fixed");
  }
};

inline double normalize_reading(double s, const NormalizationConfig& cfg,
                                double frame_max) {
  cfg.validate();
  double out = s < cfg.tau ? s / cfg.s_max_fixed
                           : s / std::max(frame_max, cfg.epsilon);
  return clamp01(out);
}

enum class CurveSource { kMeasured, kSimulated };

// Applied normal load vs. sensor reading, with an optional per-sample press
// rate (m/s) for dynamic excitation; all-zero rates describe a static curve.
struct ForceResponseCurve {
  std::vector<double> loads;
  std::vector<double> readings;
  std::vector<double> rates;           // empty or loads.size()
  std::vector<std::uint8_t> flagged;   // samples past the normalization ceiling
  CurveSource source = CurveSource::kMeasured;

  std::size_t size() const { return loads.size(); }
  double rate(std::size_t i) const { return rates.empty() ? 0.0 : rates[i]; }

  void validate() const {
    if (readings.size() != loads.size() ||
        (!rates.empty() && rates.size() != loads.size()))
      throw std::runtime_error("response curve: column lengths differ");
    for (std::size_t i = 1; i < loads.size(); ++i)
      if (!(loads[i] > loads[i - 1]))
        throw std::runtime_error("response curve: loads must be strictly increasing");
  }
};

struct CalibrationResult {
  double k_n = 0.0;
  double k_d = 0.0;
  double mse = 0.0;
  int iterations = 0;
  bool converged = false;
  bool k_d_constrained = true;  // false when the curve cannot identify k_d
};

struct ResponseSimOptions {
  double depth_max = 5e-3;  // reading ceiling, meters of press depth
};

// Replays a load sequence on a single quasi-statically pressed taxel. For an
// applied load f at press rate r the pad compresses until the spring-damper
// force balances: depth = (f - k_d r) / k_n. The recorded reading follows the
// normalized depth channel (the compression the sensing layer sees), so the
// curve shape depends on the candidate parameters. Samples whose depth
// exceeds the normalization ceiling are flagged.
inline ForceResponseCurve simulate_response_curve(
    const ContactParams& params, const std::vector<double>& loads,
    const std::vector<double>& rates = {},
    const ResponseSimOptions& opts = {}) {
  if (params.k_n <= 0.0 || params.k_d < 0.0)
    throw std::runtime_error("simulate_response_curve: invalid contact params");
  if (!rates.empty() && rates.size() != loads.size())
    throw std::runtime_error("simulate_response_curve: rates length mismatch");
  ForceResponseCurve curve;
  curve.source = CurveSource::kSimulated;
  curve.loads = loads;
  curve.rates = rates;
  curve.readings.reserve(loads.size());
  curve.flagged.assign(loads.size(), 0);
  for (std::size_t i = 0; i < loads.size(); ++i) {
    double r = rates.empty() ? 0.0 : rates[i];
    double depth = std::max(0.0, (loads[i] - params.k_d * r) / params.k_n);
    if (depth > opts.depth_max) curve.flagged[i] = 1;
    curve.readings.push_back(clamp01(depth / opts.depth_max));
  }
  return curve;
}

struct FitOptions {
  int budget = 2000;              // coordinate-search sweeps
  ResponseSimOptions response;    // must match how the curve was normalized
  int grid_points = 5;            // coarse restart grid, per axis
  double grid_decades = 2.0;      // grid spans init * 10^(+-decades)
  int restarts = 3;               // best grid cells taken as starts
};

namespace detail {

inline double curve_mse(const ForceResponseCurve& measured,
                        const ContactParams& candidate,
                        const ResponseSimOptions& opts) {
  ForceResponseCurve sim =
      simulate_response_curve(candidate, measured.loads, measured.rates, opts);
  double acc = 0.0;
  for (std::size_t i = 0; i < measured.size(); ++i) {
    double r = sim.readings[i] - measured.readings[i];
    acc += r * r;
  }
  return acc / static_cast<double>(measured.size());
}

}  // namespace detail

// Fits (k_n, k_d) to a measured force-response curve by derivative-free
// coordinate search in log space: alternating 1-D line minimizations, each
// bracketing on a coarse grid over a bounded box and refining with a
// shrinking bracket, restarted from the best cells of a coarse 2-D grid.
// Convergence: relative MSE improvement below 1e-6 over 10 consecutive
// sweeps, or budget exhaustion.
inline CalibrationResult fit_contact_params(const ForceResponseCurve& measured,
                                            const ContactParams& init,
                                            const FitOptions& opts = {}) {
  measured.validate();
  if (measured.size() < 4)
    throw std::runtime_error("fit: need at least 4 curve samples");
  if (init.k_n <= 0.0 || init.k_d <= 0.0)
    throw std::runtime_error("fit: initial parameters must be positive");
  double lo = *std::min_element(measured.readings.begin(), measured.readings.end());
  double hi = *std::max_element(measured.readings.begin(), measured.readings.end());
  if (hi - lo < 1e-12)
    throw std::runtime_error("uninformative curve: readings are constant");

  auto objective = [&](double ln_kn, double ln_kd) {
    return detail::curve_mse(
        measured, ContactParams{std::exp(ln_kn), std::exp(ln_kd)}, opts.response);
  };

  // Coarse restart grid around the initial guess.
  struct Start {
    double ln_kn, ln_kd, mse;
  };
  std::vector<Start> starts;
  double base_kn = std::log(init.k_n);
  double base_kd = std::log(init.k_d);
  double span = opts.grid_decades * std::log(10.0);
  for (int a = 0; a < opts.grid_points; ++a)
    for (int b = 0; b < opts.grid_points; ++b) {
      double fa = opts.grid_points == 1
                      ? 0.0
                      : -1.0 + 2.0 * a / (opts.grid_points - 1);
      double fb = opts.grid_points == 1
                      ? 0.0
                      : -1.0 + 2.0 * b / (opts.grid_points - 1);
      double ln_kn = base_kn + fa * span;
      double ln_kd = base_kd + fb * span;
      starts.push_back({ln_kn, ln_kd, objective(ln_kn, ln_kd)});
    }
  starts.push_back({base_kn, base_kd, objective(base_kn, base_kd)});
  std::sort(starts.begin(), starts.end(),
            [](const Start& x, const Start& y) { return x.mse < y.mse; });
  if (static_cast<int>(starts.size()) > opts.restarts)
    starts.resize(opts.restarts);

  CalibrationResult best;
  best.mse = std::numeric_limits<double>::max();
  int total_iterations = 0;
  bool any_converged = false;

  // 1-D minimization along one coordinate: global coarse bracket over the
  // box, then rounds of 9-point refinement shrinking the bracket 4x. The
  // incumbent only moves on strict improvement, so flat slices (an
  // unidentifiable k_d) leave the coordinate where it started.
  auto line_minimize = [](double current, double lo, double hi,
                          const std::function<double(double)>& f,
                          double current_val) {
    double best_x = current, best_val = current_val;
    constexpr int kCoarse = 33;
    double width = (hi - lo) / (kCoarse - 1);
    for (int i = 0; i < kCoarse; ++i) {
      double x = lo + i * width;
      double val = f(x);
      if (val < best_val) {
        best_val = val;
        best_x = x;
      }
    }
    double a = std::max(lo, best_x - width);
    double b = std::min(hi, best_x + width);
    while (b - a > 1e-12) {
      double cell = (b - a) / 8.0;
      for (int i = 0; i <= 8; ++i) {
        double x = a + i * cell;
        double val = f(x);
        if (val < best_val) {
          best_val = val;
          best_x = x;
        }
      }
      a = std::max(lo, best_x - cell);
      b = std::min(hi, best_x + cell);
    }
    return std::pair<double, double>(best_x, best_val);
  };

  // bounded search box: the restart grid span plus two extra decades
  double box = (opts.grid_decades + 2.0) * std::log(10.0);
  for (const Start& start : starts) {
    double x = start.ln_kn, y = start.ln_kd;
    double cur = start.mse;
    int flat_window = 0;
    bool converged = false;
    while (total_iterations < opts.budget) {
      ++total_iterations;
      double before = cur;
      auto [nx, val_x] = line_minimize(
          x, base_kn - box, base_kn + box,
          [&](double t) { return objective(t, y); }, cur);
      x = nx;
      cur = val_x;
      auto [ny, val_y] = line_minimize(
          y, base_kd - box, base_kd + box,
          [&](double t) { return objective(x, t); }, cur);
      y = ny;
      cur = val_y;
      double rel = before > 0.0 ? (before - cur) / before : 0.0;
      flat_window = rel < 1e-6 ? flat_window + 1 : 0;
      if (flat_window >= 10) {
        converged = true;
        break;
      }
    }
    any_converged = any_converged || converged;
    if (cur < best.mse) {
      best.k_n = std::exp(x);
      best.k_d = std::exp(y);
      best.mse = cur;
    }
    if (best.mse <= 1e-18) break;  // exact fit; restarts cannot improve it
  }

  best.iterations = total_iterations;
  best.converged = any_converged;

  // A quasi-static curve cannot constrain the damping term: report k_d as
  // unconstrained when doubling or halving it barely moves the error.
  double scaled_up = detail::curve_mse(
      measured, ContactParams{best.k_n, 2.0 * best.k_d}, opts.response);
  double scaled_down = detail::curve_mse(
      measured, ContactParams{best.k_n, 0.5 * best.k_d}, opts.response);
  double sensitivity = std::max(std::abs(scaled_up - best.mse),
                                std::abs(scaled_down - best.mse));
  best.k_d_constrained = sensitivity >= 1e-9;
  return best;
}

// ---------------------------------------------------------------------------
// Histogram comparison.

struct HistogramReport {
  std::vector<double> edges;
  std::vector<double> real_counts;
  std::vector<double> sim_counts;
  double divergence = 0.0;
  std::string kind = "jensen-shannon";
};

namespace detail {

inline std::vector<double> histogram_unit_interval(
    const std::vector<double>& samples, int bins) {
  std::vector<double> counts(bins, 0.0);
  for (double s : samples) {
    double v = clamp01(s);
    int b = std::min(bins - 1, static_cast<int>(v * bins));
    counts[b] += 1.0;
  }
  return counts;
}

inline std::vector<double> to_density(const std::vector<double>& counts) {
  double total = 0.0;
  for (double c : counts) total += c;
  std::vector<double> p(counts.size());
  double smoothed_total = total + 1e-12 * counts.size();
  for (std::size_t i = 0; i < counts.size(); ++i)
    p[i] = (counts[i] + 1e-12) / smoothed_total;
  return p;
}

}  // namespace detail

// Jensen-Shannon divergence (base 2, in bits) between the two sample sets
// histogrammed over shared uniform edges on [0,1]. Symmetric and bounded by
// [0,1]; zero-count bins smoothed by 1e-12.
inline HistogramReport histogram_compare(const std::vector<double>& real_samples,
                                         const std::vector<double>& sim_samples,
                                         int bins = 32) {
  if (real_samples.empty() || sim_samples.empty())
    throw std::runtime_error("histogram_compare: empty sample set");
  if (bins < 2) throw std::runtime_error("histogram_compare: bins must be >= 2");

  HistogramReport report;
  report.edges.resize(bins + 1);
  for (int i = 0; i <= bins; ++i)
    report.edges[i] = static_cast<double>(i) / bins;
  report.real_counts = detail::histogram_unit_interval(real_samples, bins);
  report.sim_counts = detail::histogram_unit_interval(sim_samples, bins);

  std::vector<double> p = detail::to_density(report.real_counts);
  std::vector<double> q = detail::to_density(report.sim_counts);
  double js = 0.0;
  for (int i = 0; i < bins; ++i) {
    double m = 0.5 * (p[i] + q[i]);
    js += 0.5 * p[i] * std::log2(p[i] / m) + 0.5 * q[i] * std::log2(q[i] / m);
  }
  report.divergence = std::max(0.0, js);
  return report;
}

// ---------------------------------------------------------------------------
// File formats: curves as CSV "load_n,reading[,press_rate]" with a one-line
// header; histogram reports and reading samples as plain text.

inline void save_curve_csv(const std::filesystem::path& path,
                           const ForceResponseCurve& curve) {
  bool dynamic = false;
  for (std::size_t i = 0; i < curve.size(); ++i)
    if (curve.rate(i) != 0.0) dynamic = true;
  AtomicFile file(path, /*binary=*/false);
  std::ostream& os = file.stream();
  os.precision(17);
  os << (dynamic ? "load_n,reading,press_rate\n" : "load_n,reading\n");
  for (std::size_t i = 0; i < curve.size(); ++i) {
    os << curve.loads[i] << "," << curve.readings[i];
    if (dynamic) os << "," << curve.rate(i);
    os << "\n";
  }
  file.commit();
}

inline ForceResponseCurve load_curve_csv(const std::filesystem::path& path) {
  std::ifstream is = open_input(path, /*binary=*/false);
  std::string line;
  if (!std::getline(is, line))
    throw std::runtime_error(path.string() + ": empty curve file");
  bool dynamic = line.find("press_rate") != std::string::npos;
  if (line.rfind("load_n", 0) != 0)
    throw std::runtime_error(path.string() + ": missing curve CSV header");
  ForceResponseCurve curve;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ls(line);
    double load, reading, rate = 0.0;
    if (!(ls >> load >> reading))
      throw std::runtime_error(path.string() + ": malformed curve row: " + line);
    if (dynamic && !(ls >> rate))
      throw std::runtime_error(path.string() + ": missing press_rate: " + line);
    curve.loads.push_back(load);
    curve.readings.push_back(reading);
    if (dynamic) curve.rates.push_back(rate);
  }
  curve.flagged.assign(curve.size(), 0);
  curve.validate();
  return curve;
}

inline void save_histogram_report(const std::filesystem::path& path,
                                  const HistogramReport& report) {
  AtomicFile file(path, /*binary=*/false);
  std::ostream& os = file.stream();
  os.precision(17);
  os << "taxelsim-histogram 1\n";
  os << "kind " << report.kind << "\n";
  os << "bins " << report.real_counts.size() << "\n";
  os << "divergence_bits " << report.divergence << "\n";
  os << "edges";
  for (double e : report.edges) os << " " << e;
  os << "\nreal";
  for (double c : report.real_counts) os << " " << c;
  os << "\nsim";
  for (double c : report.sim_counts) os << " " << c;
  os << "\n";
  file.commit();
}

// Reading samples: one value per line, '#' comments allowed.
inline std::vector<double> load_samples(const std::filesystem::path& path) {
  std::ifstream is = open_input(path, /*binary=*/false);
  std::vector<double> samples;
  std::string line;
  while (std::getline(is, line)) {
    std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    double v;
    while (ls >> v) samples.push_back(v);
  }
  if (samples.empty())
    throw std::runtime_error(path.string() + ": no samples found");
  return samples;
}

inline void save_samples(const std::filesystem::path& path,
                         const std::vector<double>& samples) {
  AtomicFile file(path, /*binary=*/false);
  std::ostream& os = file.stream();
  os.precision(17);
  for (double s : samples) os << s << "\n";
  file.commit();
}

}  // namespace taxelsim
