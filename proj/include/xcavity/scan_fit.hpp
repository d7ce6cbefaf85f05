#pragma once

#include <atomic>
#include <cstdlib>
#include <functional>
#include <string>
#include <thread>
#include <vector>

#include "xcavity/fit.hpp"
#include "xcavity/greens_model.hpp"
#include "xcavity/parratt.hpp"

namespace xcavity {

enum class SolverKind { kParratt, kMatrix, kGreens };

inline const char* solver_name(SolverKind s) {
  switch (s) {
    case SolverKind::kParratt:
      return "parratt";
    case SolverKind::kMatrix:
      return "matrix";
    case SolverKind::kGreens:
      return "greens";
  }
  return "?";
}

namespace detail {

inline unsigned worker_count(std::size_t jobs) {
  unsigned n = std::thread::hardware_concurrency();
  if (n == 0) n = 1;
  if (const char* env = std::getenv("XCAVITY_THREADS")) {
    long v = std::strtol(env, nullptr, 10);
    if (v >= 1) n = static_cast<unsigned>(v);
  }
  if (jobs < n) n = static_cast<unsigned>(jobs ? jobs : 1);
  return n;
}

/// Runs fn(i) for i in [0, n) on a small worker pool. Each index owns its
/// output slot, so results are deterministic regardless of scheduling.
inline void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  unsigned workers = worker_count(n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (;;) {
        std::size_t i = next.fetch_add(1);
        if (i >= n) return;
        fn(i);
      }
    });
  for (auto& t : pool) t.join();
}

}  // namespace detail

/// 2D grid of |R|^2 (or intensity / fluorescence) over energy and angle
/// offset relative to the first cavity mode.
struct SpectralMap {
  std::vector<double> energy_axis;  ///< eV, strictly increasing
  std::vector<double> angle_axis;   ///< offsets in deg, strictly increasing
  std::vector<double> values;       ///< row-major [i_energy * n_angle + i_angle]
  std::vector<unsigned char> error_mask;  ///< 1 where the solver failed
  std::string model_tag;
  std::string kind = "reflectance";
  double theta1_deg = 0.0;

  double at(std::size_t ie, std::size_t ia) const {
    return values[ie * angle_axis.size() + ia];
  }
  bool masked(std::size_t ie, std::size_t ia) const {
    return !error_mask.empty() && error_mask[ie * angle_axis.size() + ia] != 0;
  }

  void validate() const {
    for (std::size_t i = 1; i < energy_axis.size(); ++i)
      if (!(energy_axis[i] > energy_axis[i - 1]))
        throw InputError("map energy axis must strictly increase");
    for (std::size_t i = 1; i < angle_axis.size(); ++i)
      if (!(angle_axis[i] > angle_axis[i - 1]))
        throw InputError("map angle axis must strictly increase");
    if (values.size() != energy_axis.size() * angle_axis.size())
      throw InputError("map value count does not match its axes");
    if (kind == "reflectance") {
      for (std::size_t i = 0; i < values.size(); ++i) {
        if (!error_mask.empty() && error_mask[i]) continue;
        if (!(values[i] >= 0.0 && values[i] <= 1.0 + 1e-9))
          throw InputError("reflectance map value outside [0, 1]");
      }
    }
  }
};

/// First reflection dip of the bare rocking curve: coarse scan plus
/// golden-section refinement, resolved to ~1e-6 deg.
inline double locate_first_mode(const CavityStack& stack, double energy_ev,
                                double theta_lo_deg, double theta_hi_deg) {
  if (!(theta_hi_deg > theta_lo_deg))
    throw InputError("locate_first_mode: bad angle range");
  int n = std::max(101, static_cast<int>((theta_hi_deg - theta_lo_deg) / 0.002) + 1);
  std::vector<double> th(n), rr(n);
  for (int i = 0; i < n; ++i) {
    th[i] = theta_lo_deg + (theta_hi_deg - theta_lo_deg) * i / (n - 1);
    rr[i] = std::norm(parratt_reflectance(stack, ScanPoint(energy_ev, th[i])));
  }
  int dip = -1;
  for (int i = 1; i + 1 < n; ++i)
    if (rr[i] < rr[i - 1] - 1e-14 && rr[i] < rr[i + 1] - 1e-14) {
      dip = i;
      break;
    }
  if (dip < 0)
    throw SearchError("no reflection dip in [" + std::to_string(theta_lo_deg) +
                      ", " + std::to_string(theta_hi_deg) + "] deg");
  auto f = [&](double t) {
    return std::norm(parratt_reflectance(stack, ScanPoint(energy_ev, t)));
  };
  return golden_section(f, th[dip - 1], th[dip + 1], 2e-7);
}

struct ScanOptions {
  double theta1_deg = 0.0;
  int n_sublayers = 8;
  GreensCalibration calib;
};

/// Calibration anchor from the located first mode.
inline GreensCalibration make_greens_calibration(const CavityStack& stack,
                                                 double energy_ev,
                                                 double theta_lo_deg = 0.05,
                                                 double theta_hi_deg = 0.5) {
  double th1 = locate_first_mode(stack, energy_ev, theta_lo_deg, theta_hi_deg);
  return GreensCalibration{(energy_ev / kHBarC) * std::sin(deg_to_rad(th1))};
}

/// Evaluates one solver on the full (energy x angle-offset) grid.
/// Per-point failures are recorded in the error mask, not thrown.
inline SpectralMap scan_map(const CavityStack& stack, SolverKind solver,
                            const std::vector<double>& energies_ev,
                            const std::vector<double>& offsets_deg,
                            const ResonanceLine& line,
                            const ScanOptions& opt) {
  SpectralMap map;
  map.energy_axis = energies_ev;
  map.angle_axis = offsets_deg;
  map.model_tag = solver_name(solver);
  map.theta1_deg = opt.theta1_deg;
  const std::size_t ne = energies_ev.size(), na = offsets_deg.size();
  map.values.assign(ne * na, 0.0);
  map.error_mask.assign(ne * na, 0);

  SublayerGrid grid;
  if (solver == SolverKind::kGreens)
    grid = SublayerGrid::slice(stack, opt.n_sublayers);

  detail::parallel_for(ne * na, [&](std::size_t idx) {
    std::size_t ie = idx / na, ia = idx % na;
    try {
      ScanPoint pt(energies_ev[ie], opt.theta1_deg + offsets_deg[ia]);
      double v = 0.0;
      switch (solver) {
        case SolverKind::kParratt:
          v = std::norm(parratt_reflectance(stack, pt, &line));
          break;
        case SolverKind::kMatrix:
          v = std::norm(matrix_reflectance(stack, pt, line));
          break;
        case SolverKind::kGreens:
          v = std::norm(greens_reflectance(stack, pt, grid, line, opt.calib));
          break;
      }
      map.values[idx] = v;
    } catch (const Error&) {
      map.values[idx] = std::numeric_limits<double>::quiet_NaN();
      map.error_mask[idx] = 1;
    }
  });
  map.validate();
  return map;
}

enum class FitParameter { kF0, kDipoleSq };

struct FitWindow {
  double e_min, e_max;      ///< eV
  double off_min, off_max;  ///< deg
};

struct FitResult {
  std::string parameter;
  double value = 0.0;
  double residual_norm = 0.0;  ///< RMS of |R|^2 differences in the window
  int iterations = 0;
  bool converged = false;
};

class FitAmbiguityError : public Error {
 public:
  FitAmbiguityError(const std::string& what,
                    std::vector<std::pair<double, double>> candidates)
      : Error(what), candidates_(std::move(candidates)) {}
  /// (parameter, residual) of each multistart candidate.
  const std::vector<std::pair<double, double>>& candidates() const {
    return candidates_;
  }

 private:
  std::vector<std::pair<double, double>> candidates_;
};

/// Least-squares fit of the single scalar (f0 or |d|^2) of one solver
/// against a benchmark map, by golden-section on the RMS residual with
/// three bracket seeds guarding against flat tails.
inline FitResult fit_parameter(const SpectralMap& benchmark,
                               const CavityStack& stack, SolverKind solver,
                               ResonanceLine line, FitParameter which,
                               const ScanOptions& opt, const FitWindow& window,
                               double lo, double hi) {
  if (!(hi > lo && lo >= 0.0)) throw InputError("fit_parameter: bad bounds");
  std::vector<std::size_t> sel_e, sel_a;
  for (std::size_t i = 0; i < benchmark.energy_axis.size(); ++i)
    if (benchmark.energy_axis[i] >= window.e_min &&
        benchmark.energy_axis[i] <= window.e_max)
      sel_e.push_back(i);
  for (std::size_t j = 0; j < benchmark.angle_axis.size(); ++j)
    if (benchmark.angle_axis[j] >= window.off_min &&
        benchmark.angle_axis[j] <= window.off_max)
      sel_a.push_back(j);
  if (sel_e.empty() || sel_a.empty())
    throw InputError("fit window selects no benchmark points");

  SublayerGrid grid;
  if (solver == SolverKind::kGreens)
    grid = SublayerGrid::slice(stack, opt.n_sublayers);

  std::atomic<int> evals{0};
  auto rms = [&](double param) {
    ResonanceLine l = line;
    if (which == FitParameter::kF0) {
      l.f0 = param;
      l.dipole_sq = opt.calib.dipole_sq_from_f0(param);
    } else {
      l.dipole_sq = param;
      l.f0 = opt.calib.f0_from_dipole_sq(param);
    }
    double acc = 0.0;
    std::size_t cnt = 0;
    for (std::size_t i : sel_e)
      for (std::size_t j : sel_a) {
        if (benchmark.masked(i, j)) continue;
        ScanPoint pt(benchmark.energy_axis[i],
                     opt.theta1_deg + benchmark.angle_axis[j]);
        double v;
        switch (solver) {
          case SolverKind::kParratt:
            v = std::norm(parratt_reflectance(stack, pt, &l));
            break;
          case SolverKind::kMatrix:
            v = std::norm(matrix_reflectance(stack, pt, l));
            break;
          default:
            v = std::norm(greens_reflectance(stack, pt, grid, l, opt.calib));
        }
        double diff = v - benchmark.at(i, j);
        acc += diff * diff;
        ++cnt;
      }
    ++evals;
    return std::sqrt(acc / static_cast<double>(cnt));
  };

  const double mid = 0.5 * (lo + hi);
  const double brackets[3][2] = {{lo, hi}, {lo, mid}, {mid, hi}};
  std::vector<std::pair<double, double>> candidates;
  for (const auto& b : brackets) {
    double tol = 1e-8 * std::max(std::abs(b[0]), std::abs(b[1]));
    double x = golden_section(rms, b[0], b[1], tol);
    candidates.emplace_back(x, rms(x));
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < candidates.size(); ++i)
    if (candidates[i].second < candidates[best].second) best = i;
  // Distinct minima with indistinguishable residuals mean the scalar is not
  // determined by the window.
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (i == best) continue;
    double dx = std::abs(candidates[i].first - candidates[best].first);
    double dr = candidates[i].second - candidates[best].second;
    if (dx > 1e-3 * std::max(1.0, std::abs(candidates[best].first)) &&
        dr < 1e-12 + 1e-9 * candidates[best].second)
      throw FitAmbiguityError("fit residual is not unimodal in the window",
                              candidates);
  }
  FitResult out;
  out.parameter = (which == FitParameter::kF0) ? "f0" : "dipole_sq";
  out.value = candidates[best].first;
  out.residual_norm = candidates[best].second;
  out.iterations = evals.load();
  out.converged = true;
  return out;
}

}  // namespace xcavity
