#pragma once

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "xcavity/scan_fit.hpp"
#include "xcavity/xas_fit.hpp"

namespace xcavity {

inline constexpr const char* kVersion = "1.0.0";

namespace io {

inline std::string format_g17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::vector<std::string> split_ws(const std::string& s) {
  std::istringstream is(s);
  std::vector<std::string> out;
  std::string tok;
  while (is >> tok) out.push_back(tok);
  return out;
}

inline std::string strip(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

inline double parse_double(const std::string& s, const std::string& where) {
  try {
    std::size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("cannot parse number '" + s + "' in " + where);
  }
}

/// Two- or three-column whitespace table with '#' comments.
inline std::vector<std::vector<double>> load_columns(const std::string& path,
                                                     std::size_t n_cols) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path + "'");
  std::vector<std::vector<double>> cols(n_cols);
  std::string lineb;
  std::size_t lineno = 0;
  while (std::getline(in, lineb)) {
    ++lineno;
    std::string s = strip(lineb);
    if (s.empty() || s[0] == '#') continue;
    auto toks = split_ws(s);
    if (toks.size() < n_cols)
      throw InputError(path + ":" + std::to_string(lineno) + ": expected " +
                       std::to_string(n_cols) + " columns");
    for (std::size_t c = 0; c < n_cols; ++c)
      cols[c].push_back(
          parse_double(toks[c], path + ":" + std::to_string(lineno)));
  }
  if (cols[0].empty()) throw InputError(path + ": no data rows");
  return cols;
}

}  // namespace io

/// Scattering-factor file: three columns (energy_eV, f1, f2), '#' comments.
inline std::shared_ptr<ScatteringFactorTable> load_scattering_table(
    const std::string& path, double atom_density_nm3) {
  auto cols = io::load_columns(path, 3);
  return std::make_shared<ScatteringFactorTable>(ScatteringFactorTable::from_f1_f2(
      std::move(cols[0]), cols[1], cols[2], atom_density_nm3));
}

/// XAS file: two columns (energy_eV, intensity), '#' comments.
inline std::pair<std::vector<double>, std::vector<double>> load_xas(
    const std::string& path) {
  auto cols = io::load_columns(path, 2);
  return {std::move(cols[0]), std::move(cols[1])};
}

/// Stack definition file: one record per layer, top to bottom. Format:
///   layer label=<text> thickness_nm=<nm|inf> delta=<v> beta=<v>
///   layer label=<text> thickness_nm=<nm|inf> tables=<file[:weight][,..]>
///         density_nm3=<v> [resonant=true]
/// Table paths are resolved relative to the stack file.
inline CavityStack load_stack(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open stack file '" + path + "'");
  std::filesystem::path base = std::filesystem::path(path).parent_path();

  // Element tables are shared between layers that reference the same file.
  std::map<std::string, std::shared_ptr<const ScatteringFactorTable>> cache;
  std::vector<Layer> layers;
  std::string lineb;
  std::size_t lineno = 0;
  while (std::getline(in, lineb)) {
    ++lineno;
    std::string s = io::strip(lineb);
    if (s.empty() || s[0] == '#') continue;
    auto toks = io::split_ws(s);
    const std::string where = path + ":" + std::to_string(lineno);
    if (toks[0] != "layer")
      throw ConfigError(where + ": expected a 'layer' record");
    std::map<std::string, std::string> kv;
    for (std::size_t i = 1; i < toks.size(); ++i) {
      auto eq = toks[i].find('=');
      if (eq == std::string::npos)
        throw ConfigError(where + ": field '" + toks[i] + "' is not key=value");
      kv[toks[i].substr(0, eq)] = toks[i].substr(eq + 1);
    }
    Layer layer;
    if (!kv.count("label")) throw ConfigError(where + ": missing label");
    layer.label = kv["label"];
    if (!kv.count("thickness_nm"))
      throw ConfigError(where + ": missing thickness_nm");
    layer.thickness_nm = (kv["thickness_nm"] == "inf")
                             ? Layer::kSemiInfinite
                             : io::parse_double(kv["thickness_nm"], where);
    if (kv.count("delta") || kv.count("beta")) {
      ConstantIndex ci;
      if (kv.count("delta")) ci.delta = io::parse_double(kv["delta"], where);
      if (kv.count("beta")) ci.beta = io::parse_double(kv["beta"], where);
      layer.constant = ci;
    }
    if (kv.count("tables")) {
      if (!kv.count("density_nm3"))
        throw ConfigError(where + ": tabulated layer needs density_nm3");
      TabulatedIndex ti;
      ti.atom_density_nm3 = io::parse_double(kv["density_nm3"], where);
      std::stringstream parts(kv["tables"]);
      std::string part;
      while (std::getline(parts, part, ',')) {
        double weight = 1.0;
        std::string file = part;
        auto colon = part.rfind(':');
        if (colon != std::string::npos) {
          file = part.substr(0, colon);
          weight = io::parse_double(part.substr(colon + 1), where);
        }
        std::string full = (base / file).string();
        auto it = cache.find(full);
        if (it == cache.end()) {
          // density on the element table itself is not used through layers
          it = cache.emplace(full, load_scattering_table(full, ti.atom_density_nm3))
                   .first;
        }
        ti.components.emplace_back(it->second, weight);
      }
      layer.tables = std::move(ti);
    }
    if (kv.count("resonant"))
      layer.is_resonant = (kv["resonant"] == "true" || kv["resonant"] == "1");
    layers.push_back(std::move(layer));
  }
  return CavityStack(std::move(layers));
}

/// Writes a spectral map as a diffable text matrix: '#' header lines with
/// the axes and tags, then one row of angle columns per energy, 17
/// significant digits. Masked points serialize as nan.
inline void write_map(const SpectralMap& map, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write '" + path + "'");
  out << "# xcavity spectral map\n";
  out << "# model = " << map.model_tag << "\n";
  out << "# kind = " << map.kind << "\n";
  out << "# theta1_deg = " << io::format_g17(map.theta1_deg) << "\n";
  out << "# energy_axis_ev =";
  for (double e : map.energy_axis) out << ' ' << io::format_g17(e);
  out << "\n# angle_offset_deg =";
  for (double a : map.angle_axis) out << ' ' << io::format_g17(a);
  out << "\n";
  const std::size_t na = map.angle_axis.size();
  for (std::size_t ie = 0; ie < map.energy_axis.size(); ++ie) {
    for (std::size_t ia = 0; ia < na; ++ia) {
      if (ia) out << ' ';
      out << io::format_g17(map.values[ie * na + ia]);
    }
    out << '\n';
  }
}

inline SpectralMap read_map(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path + "'");
  SpectralMap map;
  std::string lineb;
  std::vector<std::string> rows;
  while (std::getline(in, lineb)) {
    std::string s = io::strip(lineb);
    if (s.empty()) continue;
    if (s[0] == '#') {
      auto set_axis = [&](const char* key, std::vector<double>& axis) {
        std::string prefix = std::string("# ") + key + " =";
        if (s.rfind(prefix, 0) != 0) return false;
        for (const auto& t : io::split_ws(s.substr(prefix.size())))
          axis.push_back(io::parse_double(t, path));
        return true;
      };
      if (set_axis("energy_axis_ev", map.energy_axis)) continue;
      if (set_axis("angle_offset_deg", map.angle_axis)) continue;
      if (s.rfind("# model = ", 0) == 0) map.model_tag = s.substr(10);
      if (s.rfind("# kind = ", 0) == 0) map.kind = s.substr(9);
      if (s.rfind("# theta1_deg = ", 0) == 0)
        map.theta1_deg = io::parse_double(s.substr(15), path);
      continue;
    }
    rows.push_back(s);
  }
  if (rows.size() != map.energy_axis.size())
    throw InputError(path + ": row count does not match the energy axis");
  map.values.reserve(rows.size() * map.angle_axis.size());
  map.error_mask.assign(rows.size() * map.angle_axis.size(), 0);
  for (const auto& row : rows) {
    auto toks = io::split_ws(row);
    if (toks.size() != map.angle_axis.size())
      throw InputError(path + ": column count does not match the angle axis");
    for (const auto& t : toks) {
      double v = std::strtod(t.c_str(), nullptr);
      if (std::isnan(v)) map.error_mask[map.values.size()] = 1;
      map.values.push_back(v);
    }
  }
  return map;
}

/// Multi-column curve file with a named header.
inline void write_curve(const std::string& path,
                        const std::vector<std::string>& names,
                        const std::vector<std::vector<double>>& columns) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write '" + path + "'");
  out << "# columns:";
  for (const auto& n : names) out << ' ' << n;
  out << '\n';
  if (columns.empty()) return;
  for (std::size_t i = 0; i < columns[0].size(); ++i) {
    for (std::size_t c = 0; c < columns.size(); ++c) {
      if (c) out << ' ';
      out << io::format_g17(columns[c][i]);
    }
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// Run configuration
// ---------------------------------------------------------------------------

enum class ScanMode { kMap, kRocking, kSpectrum };

struct RunConfig {
  std::string stack_file;

  // resonance block
  double omega0 = 0.0;
  double gamma = 0.0;
  double f0 = -1.0;         ///< < 0 means "fit from XAS"
  double dipole_sq = -1.0;  ///< < 0 means "derive from f0 via calibration"
  std::string xas_file;

  std::string solver = "all";  ///< parratt | matrix | greens | all
  int n_sublayers = 8;

  ScanMode mode = ScanMode::kMap;
  double e_min = 0.0, e_max = 0.0;
  int e_count = 0;
  double off_min = 0.0, off_max = 0.0;
  int off_count = 0;
  double rocking_theta_min = 0.05, rocking_theta_max = 0.5;
  int rocking_count = 2000;
  double rocking_energy = 0.0;  ///< defaults to omega0
  double spectrum_offset = 0.0;

  std::string out_dir = ".";
  std::string fit_param;  ///< "", "f0" or "dipole"
  bool field_profile = false;
  double field_step_nm = 0.1;
  bool fluorescence = false;
  double fluorescence_scale = 1.0;
  double theta_search_lo = 0.05, theta_search_hi = 0.5;

  void validate() const {
    if (stack_file.empty()) throw ConfigError("config: stack file missing");
    if (!(omega0 > 0.0)) throw ConfigError("config: resonance omega0 missing");
    if (!(gamma > 0.0)) throw ConfigError("config: resonance gamma missing");
    if (f0 < 0.0 && xas_file.empty())
      throw ConfigError("config: f0 must be given or fit from an XAS file");
    if (mode == ScanMode::kMap || mode == ScanMode::kSpectrum) {
      if (e_count < 2 || !(e_min < e_max))
        throw ConfigError("config: energy grid needs count >= 2 and min < max");
    }
    if (mode == ScanMode::kMap) {
      if (off_count < 2 || !(off_min < off_max))
        throw ConfigError("config: angle grid needs count >= 2 and min < max");
    }
    if (mode == ScanMode::kRocking) {
      if (rocking_count < 2 || !(rocking_theta_min < rocking_theta_max))
        throw ConfigError("config: rocking grid needs count >= 2 and min < max");
    }
    if (solver != "parratt" && solver != "matrix" && solver != "greens" &&
        solver != "all")
      throw ConfigError("config: unknown solver '" + solver + "'");
    if (n_sublayers < 1 || n_sublayers > SublayerGrid::kMaxSublayers)
      throw ConfigError("config: sublayers must be in [1, 64]");
  }
};

/// Flat key-value configuration with [section] headers, '#' comments.
inline RunConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  std::filesystem::path base = std::filesystem::path(path).parent_path();
  RunConfig cfg;
  std::string section, lineb;
  std::size_t lineno = 0;
  bool scan_mode_seen = false;
  while (std::getline(in, lineb)) {
    ++lineno;
    std::string s = io::strip(lineb);
    if (s.empty() || s[0] == '#' || s[0] == ';') continue;
    const std::string where = path + ":" + std::to_string(lineno);
    if (s.front() == '[' && s.back() == ']') {
      section = io::strip(s.substr(1, s.size() - 2));
      continue;
    }
    auto eq = s.find('=');
    if (eq == std::string::npos)
      throw ConfigError(where + ": expected key = value");
    std::string key = io::strip(s.substr(0, eq));
    std::string val = io::strip(s.substr(eq + 1));
    auto num = [&] { return io::parse_double(val, where); };
    auto boolean = [&] { return val == "true" || val == "1" || val == "yes"; };

    if (section == "stack" && key == "file")
      cfg.stack_file = (base / val).string();
    else if (section == "resonance" && key == "omega0_ev")
      cfg.omega0 = num();
    else if (section == "resonance" && key == "gamma_ev")
      cfg.gamma = num();
    else if (section == "resonance" && key == "f0")
      cfg.f0 = (val == "fit") ? -1.0 : num();
    else if (section == "resonance" && key == "dipole_sq")
      cfg.dipole_sq = (val == "fit") ? -1.0 : num();
    else if (section == "resonance" && key == "xas_file")
      cfg.xas_file = (base / val).string();
    else if (section == "solver" && key == "use")
      cfg.solver = val;
    else if (section == "solver" && key == "sublayers")
      cfg.n_sublayers = static_cast<int>(num());
    else if (section == "scan" && key == "mode") {
      scan_mode_seen = true;
      if (val == "map")
        cfg.mode = ScanMode::kMap;
      else if (val == "rocking")
        cfg.mode = ScanMode::kRocking;
      else if (val == "spectrum")
        cfg.mode = ScanMode::kSpectrum;
      else
        throw ConfigError(where + ": unknown scan mode '" + val + "'");
    } else if (section == "scan" && key == "energy_min_ev")
      cfg.e_min = num();
    else if (section == "scan" && key == "energy_max_ev")
      cfg.e_max = num();
    else if (section == "scan" && key == "energy_count")
      cfg.e_count = static_cast<int>(num());
    else if (section == "scan" && key == "offset_min_deg")
      cfg.off_min = num();
    else if (section == "scan" && key == "offset_max_deg")
      cfg.off_max = num();
    else if (section == "scan" && key == "offset_count")
      cfg.off_count = static_cast<int>(num());
    else if (section == "scan" && key == "rocking_theta_min_deg")
      cfg.rocking_theta_min = num();
    else if (section == "scan" && key == "rocking_theta_max_deg")
      cfg.rocking_theta_max = num();
    else if (section == "scan" && key == "rocking_count")
      cfg.rocking_count = static_cast<int>(num());
    else if (section == "scan" && key == "rocking_energy_ev")
      cfg.rocking_energy = num();
    else if (section == "scan" && key == "spectrum_offset_deg")
      cfg.spectrum_offset = num();
    else if (section == "scan" && key == "theta_search_lo_deg")
      cfg.theta_search_lo = num();
    else if (section == "scan" && key == "theta_search_hi_deg")
      cfg.theta_search_hi = num();
    else if (section == "output" && key == "dir")
      cfg.out_dir = (base / val).string();
    else if (section == "output" && key == "field_profile")
      cfg.field_profile = boolean();
    else if (section == "output" && key == "field_step_nm")
      cfg.field_step_nm = num();
    else if (section == "output" && key == "fluorescence")
      cfg.fluorescence = boolean();
    else if (section == "output" && key == "fluorescence_scale")
      cfg.fluorescence_scale = num();
    else
      throw ConfigError(where + ": unknown key '" + section + "." + key + "'");
  }
  (void)scan_mode_seen;
  return cfg;
}

// ---------------------------------------------------------------------------
// Run orchestration
// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<double> linspace(double lo, double hi, int n) {
  std::vector<double> v(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    v[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / (n - 1);
  return v;
}

}  // namespace detail

struct RunReport {
  double theta1_deg = 0.0;
  ResonanceLine line;
  std::vector<std::string> files;
  nlohmann::json manifest;
};

/// Executes the configured scans and fits and writes the outputs plus a
/// machine-readable manifest. Returns the report; throws on errors.
inline RunReport run(const RunConfig& cfg) {
  using clock = std::chrono::steady_clock;
  auto t_start = clock::now();
  cfg.validate();
  std::filesystem::create_directories(cfg.out_dir);
  auto outfile = [&](const std::string& name) {
    return (std::filesystem::path(cfg.out_dir) / name).string();
  };

  RunReport report;
  nlohmann::json& man = report.manifest;
  man["tool"] = "xcavity";
  man["version"] = kVersion;
  man["inputs"]["stack_file"] = cfg.stack_file;

  CavityStack stack = load_stack(cfg.stack_file);

  ResonanceLine line;
  line.omega0 = cfg.omega0;
  line.gamma = cfg.gamma;
  if (cfg.f0 >= 0.0) {
    line.f0 = cfg.f0;
  } else {
    // Fit the white line from the XAS file and convert the peak absorption
    // amplitude to the quoted-unit f0.
    auto [exas, yxas] = load_xas(cfg.xas_file);
    auto decomp = fit_xas_lineshape(exas, yxas);
    std::size_t ri = stack.resonant_layer();
    if (ri == CavityStack::npos)
      throw ConfigError("XAS fit requested but the stack has no resonant layer");
    // Calibrate the absorption scale against the background table above the
    // continuum step.
    double far_lo = decomp.continuum.center + 6.0 * decomp.continuum.width;
    double far_hi = exas.back();
    double scale = 1.0;
    if (stack[ri].tables) {
      auto bg = [&](double e) { return stack[ri].tables->f_at(e); };
      // least-squares against -Im f of the layer table
      double num = 0.0, den = 0.0;
      for (std::size_t i = 0; i < exas.size(); ++i) {
        if (exas[i] < far_lo || exas[i] > far_hi) continue;
        double basis = (exas[i] / kHBarC) / (4.0 * kPi) * yxas[i];
        num += basis * (-bg(exas[i]).imag());
        den += basis * basis;
      }
      if (den > 0.0) scale = num / den;
    }
    // Peak absorption of the fitted line converted to Im[delta_f], then to
    // the quoted amplitude unit.
    double f0_re_units = decomp.lorentzian.f0 * scale *
                         (decomp.lorentzian.omega0 / kHBarC) / (4.0 * kPi);
    line.omega0 = decomp.lorentzian.omega0;
    line.gamma = decomp.lorentzian.gamma;
    line.f0 = f0_re_units / kResonantStrengthScale;
    man["xas_fit"] = {{"omega0_ev", line.omega0},
                      {"gamma_ev", line.gamma},
                      {"f0", line.f0},
                      {"scale", scale},
                      {"residual_norm", decomp.residual_norm}};
  }

  double mode_energy = (cfg.rocking_energy > 0.0) ? cfg.rocking_energy : line.omega0;
  auto t0 = clock::now();
  double theta1 = locate_first_mode(stack, mode_energy, cfg.theta_search_lo,
                                    cfg.theta_search_hi);
  report.theta1_deg = theta1;
  man["theta1_deg"] = theta1;
  man["timings_ms"]["locate_mode"] =
      std::chrono::duration<double, std::milli>(clock::now() - t0).count();

  GreensCalibration calib{(mode_energy / kHBarC) * std::sin(deg_to_rad(theta1))};
  if (cfg.dipole_sq >= 0.0)
    line.dipole_sq = cfg.dipole_sq;
  else
    line.dipole_sq = calib.dipole_sq_from_f0(line.f0);
  report.line = line;
  man["resonance"] = {{"omega0_ev", line.omega0},
                      {"gamma_ev", line.gamma},
                      {"f0", line.f0},
                      {"dipole_sq", line.dipole_sq}};

  ScanOptions opt;
  opt.theta1_deg = theta1;
  opt.n_sublayers = cfg.n_sublayers;
  opt.calib = calib;

  std::vector<SolverKind> solvers;
  if (cfg.solver == "all")
    solvers = {SolverKind::kParratt, SolverKind::kMatrix, SolverKind::kGreens};
  else if (cfg.solver == "parratt")
    solvers = {SolverKind::kParratt};
  else if (cfg.solver == "matrix")
    solvers = {SolverKind::kMatrix};
  else
    solvers = {SolverKind::kGreens};

  auto emit = [&](const std::string& name) {
    report.files.push_back(outfile(name));
    man["outputs"].push_back(name);
    return report.files.back();
  };

  if (!cfg.fit_param.empty()) {
    auto energies = detail::linspace(cfg.e_min, cfg.e_max,
                                     cfg.e_count >= 2 ? cfg.e_count : 301);
    std::vector<double> offs =
        (cfg.off_count >= 2)
            ? detail::linspace(cfg.off_min, cfg.off_max, cfg.off_count)
            : std::vector<double>{-5e-3, 0.0, 5e-3};
    auto t1 = clock::now();
    SpectralMap bench =
        scan_map(stack, SolverKind::kParratt, energies, offs, line, opt);
    FitWindow window{line.omega0 - 15.0, line.omega0 + 15.0, -0.01, 0.01};
    FitResult fr;
    if (cfg.fit_param == "f0")
      fr = fit_parameter(bench, stack, SolverKind::kMatrix, line,
                         FitParameter::kF0, opt, window, 1e-3, 2.0);
    else if (cfg.fit_param == "dipole")
      fr = fit_parameter(bench, stack, SolverKind::kGreens, line,
                         FitParameter::kDipoleSq, opt, window, 1e-9, 3e-6);
    else
      throw ConfigError("unknown fit parameter '" + cfg.fit_param + "'");
    man["timings_ms"]["fit"] =
        std::chrono::duration<double, std::milli>(clock::now() - t1).count();
    man["fit"] = {{"parameter", fr.parameter},
                  {"value", fr.value},
                  {"residual_norm", fr.residual_norm},
                  {"iterations", fr.iterations},
                  {"converged", fr.converged}};
    write_curve(emit("fit_" + fr.parameter + ".dat"),
                {"value", "residual_norm", "iterations"},
                {{fr.value}, {fr.residual_norm}, {double(fr.iterations)}});
  } else if (cfg.mode == ScanMode::kRocking) {
    auto th = detail::linspace(cfg.rocking_theta_min, cfg.rocking_theta_max,
                               cfg.rocking_count);
    std::vector<double> bare(th.size()), with_line(th.size());
    detail::parallel_for(th.size(), [&](std::size_t i) {
      ScanPoint pt(mode_energy, th[i]);
      bare[i] = std::norm(parratt_reflectance(stack, pt));
      with_line[i] = std::norm(parratt_reflectance(stack, pt, &line));
    });
    write_curve(emit("rocking.dat"),
                {"theta_deg", "reflectance_bare", "reflectance"},
                {th, bare, with_line});
  } else if (cfg.mode == ScanMode::kSpectrum) {
    auto energies = detail::linspace(cfg.e_min, cfg.e_max, cfg.e_count);
    std::vector<std::vector<double>> cols{energies};
    std::vector<std::string> names{"energy_ev"};
    for (SolverKind s : solvers) {
      SpectralMap m = scan_map(stack, s, energies, {cfg.spectrum_offset}, line, opt);
      std::vector<double> col(energies.size());
      for (std::size_t i = 0; i < energies.size(); ++i) col[i] = m.at(i, 0);
      cols.push_back(std::move(col));
      names.push_back(std::string("R2_") + solver_name(s));
    }
    write_curve(emit("spectrum.dat"), names, cols);
  } else {
    auto energies = detail::linspace(cfg.e_min, cfg.e_max, cfg.e_count);
    auto offs = detail::linspace(cfg.off_min, cfg.off_max, cfg.off_count);
    for (SolverKind s : solvers) {
      auto t1 = clock::now();
      SpectralMap m = scan_map(stack, s, energies, offs, line, opt);
      man["timings_ms"][std::string("map_") + solver_name(s)] =
          std::chrono::duration<double, std::milli>(clock::now() - t1).count();
      write_map(m, emit(std::string("map_") + solver_name(s) + ".dat"));
    }
    // Bare-cavity coupling factors along the angle grid.
    double z_a = stack.resonant_center();
    double d = stack.resonant_thickness();
    std::vector<double> re_eta(offs.size()), im_eta(offs.size()),
        gamma_c(offs.size()), delta_c(offs.size());
    detail::parallel_for(offs.size(), [&](std::size_t i) {
      CavityResponse resp =
          bare_cavity(stack, ScanPoint(mode_energy, theta1 + offs[i]), z_a);
      auto sh = cavity_shifts(resp, line, d);
      re_eta[i] = resp.eta.real();
      im_eta[i] = resp.eta.imag();
      gamma_c[i] = sh.gamma_c;
      delta_c[i] = sh.delta_c;
    });
    write_curve(emit("eta_curve.dat"),
                {"offset_deg", "re_eta", "im_eta", "gamma_c_ev", "delta_c_ev"},
                {offs, re_eta, im_eta, gamma_c, delta_c});
  }

  if (cfg.field_profile) {
    double z_max = stack.total_finite_thickness() + 20.0;
    std::vector<double> zs;
    for (double z = 0.0; z <= z_max; z += cfg.field_step_nm) zs.push_back(z);
    auto prof = field_profile(stack, ScanPoint(mode_energy, theta1), zs, &line);
    std::vector<double> re(zs.size()), im(zs.size());
    for (std::size_t i = 0; i < zs.size(); ++i) {
      re[i] = prof.amplitude[i].real();
      im[i] = prof.amplitude[i].imag();
    }
    write_curve(emit("field_profile.dat"),
                {"z_nm", "re_a", "im_a", "intensity"},
                {prof.depths, re, im, prof.intensity});
  }

  if (cfg.fluorescence) {
    auto energies = (cfg.e_count >= 2)
                        ? detail::linspace(cfg.e_min, cfg.e_max, cfg.e_count)
                        : detail::linspace(line.omega0 - 25.0, line.omega0 + 25.0, 201);
    std::vector<double> offs =
        (cfg.off_count >= 2 && cfg.mode == ScanMode::kMap)
            ? detail::linspace(cfg.off_min, cfg.off_max, cfg.off_count)
            : std::vector<double>{0.0};
    auto mu = [&](double e) {
      double eps = 2.0 * (e - line.omega0) / line.gamma;
      return 1.0 / (eps * eps + 1.0);
    };
    double z_a = stack.resonant_center();
    SpectralMap fm, im;
    fm.energy_axis = im.energy_axis = energies;
    fm.angle_axis = im.angle_axis = offs;
    fm.model_tag = im.model_tag = "parratt";
    fm.kind = "fluorescence";
    im.kind = "field";
    fm.theta1_deg = im.theta1_deg = theta1;
    fm.values.assign(energies.size() * offs.size(), 0.0);
    im.values.assign(energies.size() * offs.size(), 0.0);
    detail::parallel_for(fm.values.size(), [&](std::size_t idx) {
      std::size_t ie = idx / offs.size(), ia = idx % offs.size();
      ScanPoint pt(energies[ie], theta1 + offs[ia]);
      fm.values[idx] =
          fluorescence(stack, pt, mu, z_a, line, cfg.fluorescence_scale);
      im.values[idx] = field_profile(stack, pt, {z_a}, &line).intensity[0];
    });
    write_map(fm, emit("fluorescence.dat"));
    write_map(im, emit("field_intensity.dat"));
  }

  man["timings_ms"]["total"] =
      std::chrono::duration<double, std::milli>(clock::now() - t_start).count();
  man["timestamp"] = std::chrono::duration_cast<std::chrono::seconds>(
                         std::chrono::system_clock::now().time_since_epoch())
                         .count();
  std::ofstream mf(outfile("manifest.json"));
  mf << man.dump(2) << '\n';
  report.files.push_back(outfile("manifest.json"));
  return report;
}

}  // namespace xcavity
