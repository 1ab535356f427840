#include "ensctl/cli.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>

#include <CLI11.hpp>
#include <Eigen/Core>
#include <boost/version.hpp>

#include "ensctl/common.hpp"
#include "ensctl/families.hpp"
#include "ensctl/io.hpp"
#include "ensctl/model.hpp"
#include "ensctl/operator.hpp"
#include "ensctl/oscillator.hpp"
#include "ensctl/qp.hpp"
#include "ensctl/spheroidal.hpp"

namespace ensctl::cli {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

// Collects artifacts so the manifest can list each with its hash.
class Artifacts {
public:
  explicit Artifacts(fs::path dir) : dir_(std::move(dir)) {}

  void write(const std::string& name, const std::string& text) {
    io::write_text(dir_ / name, text);
    files_.push_back({{"name", name}, {"bytes", text.size()}, {"fnv1a64", io::content_hash(text)}});
  }
  void write(const std::string& name, const io::CsvTable& table) { write(name, table.str()); }
  void write(const std::string& name, const json& j) { write(name, j.dump(2) + "\n"); }

  const json& files() const { return files_; }
  const fs::path& dir() const { return dir_; }

private:
  fs::path dir_;
  json files_ = json::array();
};

// ---- JSON system specs ------------------------------------------------------

struct JsonProblem {
  model::SystemSpec spec;
  model::Grid grid;
  ParamProfile x0;
  ParamProfile xF;
  double eps = 1e-3;
  double step_tol = 1e-10;
  double rank_tol = linop::kDefaultRankTol;
};

double number_or(const json& j, const char* key, double fallback) {
  return j.contains(key) ? j.at(key).get<double>() : fallback;
}

CVector vector_from_json(const json& j, int n, const char* what) {
  if (!j.is_array() || static_cast<int>(j.size()) != n)
    throw ParameterError(std::string(what) + " must be an array of " + std::to_string(n) + " entries");
  CVector v(n);
  for (int k = 0; k < n; ++k) v[k] = io::complex_from_json(j[static_cast<std::size_t>(k)]);
  return v;
}

JsonProblem load_problem(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw ParameterError("cannot read spec file " + path.string());
  json j;
  try {
    f >> j;
  } catch (const json::exception& e) {
    throw ParameterError("spec file is not valid JSON: " + std::string(e.what()));
  }
  try {
    if (j.value("schema", 0) != 1) throw ParameterError("spec schema must be 1");
    const std::string family = j.at("family").get<std::string>();
    const json params = j.value("params", json::object());
    const double T = number_or(j, "T", 1.0);
    JsonProblem p;
    if (family == "harmonic") {
      p.spec = families::harmonic_real(number_or(params, "omega1", -1.0), number_or(params, "omega2", 1.0), T);
    } else if (family == "harmonic-complex") {
      p.spec = families::harmonic_complex(number_or(params, "omega1", -1.0), number_or(params, "omega2", 1.0), T);
    } else if (family == "rotation-scaled") {
      p.spec = families::rotation_scaled_input(number_or(params, "s_lo", 1.0), number_or(params, "s_hi", 2.0), T);
    } else if (family == "diagonal") {
      p.spec = families::diagonal(params.value("n", 2), number_or(params, "s_lo", 1.0), number_or(params, "s_hi", 2.0), T);
    } else {
      throw ParameterError("unknown family '" + family + "' (harmonic, harmonic-complex, rotation-scaled, diagonal)");
    }
    const json grid = j.value("grid", json::object());
    p.grid = model::Grid::uniform(T, grid.value("nt", std::size_t{64}), p.spec.s_lo, p.spec.s_hi,
                                  grid.value("ns", std::size_t{64}));
    p.x0 = ParamProfile::constant(p.grid.param_nodes, vector_from_json(j.at("x0"), p.spec.n, "x0"));
    p.xF = ParamProfile::constant(p.grid.param_nodes, vector_from_json(j.at("xF"), p.spec.n, "xF"));
    p.eps = number_or(j, "eps", p.eps);
    p.step_tol = number_or(j, "step_tol", p.step_tol);
    p.rank_tol = number_or(j, "rank_tol", p.rank_tol);
    if (!(p.eps >= 0.0)) throw ParameterError("eps must be non-negative");
    return p;
  } catch (const json::exception& e) {
    throw ParameterError("malformed spec: " + std::string(e.what()));
  }
}

io::CsvTable control_table(const ControlSignal& u) {
  std::vector<std::string> header{"t"};
  for (std::size_t c = 0; c < u.channels(); ++c) {
    header.push_back("re_" + std::to_string(c));
    header.push_back("im_" + std::to_string(c));
  }
  io::CsvTable t(header);
  for (std::size_t i = 0; i < u.size(); ++i) {
    std::vector<double> row{u.times[i]};
    for (std::size_t c = 0; c < u.channels(); ++c) {
      const Complex z = u.samples(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c));
      row.push_back(z.real());
      row.push_back(z.imag());
    }
    t.add_row(std::move(row));
  }
  return t;
}

ControlSignal read_control(const fs::path& path, std::size_t channels) {
  std::ifstream f(path);
  if (!f) throw ParameterError("cannot read control file " + path.string());
  std::string line;
  std::getline(f, line);
  std::vector<double> times;
  std::vector<Complex> values;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::vector<double> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      char* end = nullptr;
      const double v = std::strtod(cell.c_str(), &end);
      if (end == cell.c_str()) throw ParameterError("non-numeric cell '" + cell + "' in " + path.string());
      cells.push_back(v);
    }
    if (cells.size() != 1 + 2 * channels)
      throw ShapeError("control CSV rows need t plus re/im pairs for " + std::to_string(channels) + " channels");
    times.push_back(cells[0]);
    for (std::size_t c = 0; c < channels; ++c) values.emplace_back(cells[1 + 2 * c], cells[2 + 2 * c]);
  }
  CRowMatrix samples = Eigen::Map<CRowMatrix>(values.data(), static_cast<Eigen::Index>(times.size()),
                                              static_cast<Eigen::Index>(channels));
  return ControlSignal(std::move(times), std::move(samples));
}

io::CsvTable profile_table(const ParamProfile& p, const ParamProfile* target) {
  std::vector<std::string> header{"s"};
  for (std::size_t c = 0; c < p.components(); ++c) {
    header.push_back("re_" + std::to_string(c));
    header.push_back("im_" + std::to_string(c));
  }
  if (target) header.push_back("error");
  io::CsvTable t(header);
  for (std::size_t j = 0; j < p.size(); ++j) {
    std::vector<double> row{p.params[j]};
    for (std::size_t c = 0; c < p.components(); ++c) {
      const Complex z = p.values(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(c));
      row.push_back(z.real());
      row.push_back(z.imag());
    }
    if (target) row.push_back((p.at(j) - target->at(j)).norm());
    t.add_row(std::move(row));
  }
  return t;
}

json doubles(const std::vector<double>& v) { return json(v); }

json doubles(const RVector& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

// ---- commands ----------------------------------------------------------------

void cmd_synth(const RunConfig& cfg, Artifacts& out, std::ostream& log) {
  const auto p = load_problem(cfg.spec_path);
  const auto tr = model::transition_matrices(p.spec, p.grid, p.step_tol);
  const auto op = linop::assemble(p.spec, p.grid, tr);
  const auto sing = linop::singular_system(op, p.rank_tol);
  const auto xi = linop::target_offset(tr, p.x0, p.xF);
  const auto syn = linop::synthesize_min_norm(sing, xi, p.eps);
  const auto traj = model::simulate_ensemble(p.spec, p.grid, p.x0, syn.control, p.step_tol);
  const auto final_profile = traj.final_profile(p.grid.param_nodes);

  out.write("control.csv", control_table(syn.control));
  out.write("final_states.csv", profile_table(final_profile, &p.xF));
  json coeffs = json::array();
  for (Eigen::Index k = 0; k < syn.coefficients.size(); ++k) coeffs.push_back(io::complex_to_json(syn.coefficients[k]));
  out.write("synthesis.json", json{{"family", p.spec.name},
                                   {"sigmas", doubles(sing.sigmas)},
                                   {"rank", sing.rank()},
                                   {"modes_used", syn.modes_used},
                                   {"reached", syn.reached},
                                   {"eps", p.eps},
                                   {"achieved_residual", syn.achieved_residual},
                                   {"residual_by_modes", doubles(syn.residual_by_modes)},
                                   {"norm_by_modes", doubles(syn.norm_by_modes)},
                                   {"control_coefficients", coeffs}});
  log << "synth: " << syn.modes_used << " of " << sing.rank() << " modes, residual " << syn.achieved_residual
      << (syn.reached ? "" : " (eps not reached at this resolution)") << "\n";
}

void cmd_simulate(const RunConfig& cfg, Artifacts& out, std::ostream& log) {
  const auto p = load_problem(cfg.spec_path);
  const auto u = read_control(cfg.control_path, static_cast<std::size_t>(p.spec.m));
  const auto traj = model::simulate_ensemble(p.spec, p.grid, p.x0, u, p.step_tol);
  const auto fp = traj.final_profile(p.grid.param_nodes);
  out.write("final_states.csv", profile_table(fp, &p.xF));
  double worst = 0.0;
  for (std::size_t j = 0; j < fp.size(); ++j) worst = std::max(worst, (fp.at(j) - p.xF.at(j)).norm());
  log << "simulate: max final error " << worst << "\n";
}

void cmd_diagnose(const RunConfig& cfg, Artifacts& out, std::ostream& log) {
  const auto p = load_problem(cfg.spec_path);
  const auto tr = model::transition_matrices(p.spec, p.grid, p.step_tol);
  const auto op = linop::assemble(p.spec, p.grid, tr);
  const auto sing = linop::singular_system(op, p.rank_tol);
  const auto xi = linop::target_offset(tr, p.x0, p.xF);
  const auto rep = linop::picard_diagnostic(sing, xi);
  json coeffs = json::array();
  for (const auto& c : rep.coefficients) coeffs.push_back(io::complex_to_json(c));
  out.write("picard_report.json",
            json{{"family", p.spec.name},
                 {"sigmas", doubles(sing.sigmas)},
                 {"coefficients", coeffs},
                 {"partial_sums", doubles(rep.partial_sums)},
                 {"residuals", doubles(rep.residuals)},
                 {"range_residual", rep.range_residual},
                 {"decay_exponent", std::isfinite(rep.decay_exponent) ? json(rep.decay_exponent) : json(nullptr)},
                 {"fit_points", rep.fit_points},
                 {"range_condition", rep.range_condition},
                 {"summability_condition", rep.summability_condition},
                 {"thresholds",
                  {{"residual", rep.thresholds.residual}, {"decay_exponent", rep.thresholds.decay_exponent}}}});
  log << "diagnose: range residual " << rep.range_residual << ", decay exponent " << rep.decay_exponent << "\n";
}

void cmd_dpss(const RunConfig& cfg, Artifacts& out, std::ostream& log) {
  spheroidal::DpssMethod method;
  if (cfg.method == "tridiagonal")
    method = spheroidal::DpssMethod::commuting_tridiagonal;
  else if (cfg.method == "dense")
    method = spheroidal::DpssMethod::dense;
  else
    throw ParameterError("method must be tridiagonal or dense");
  const auto basis = spheroidal::dpss(cfg.N, cfg.W, cfg.k, method, cfg.kappa_floor);
  std::vector<std::string> header{"t"};
  for (std::size_t k = 0; k < basis.count(); ++k) header.push_back("v" + std::to_string(k));
  io::CsvTable seq(header);
  for (std::size_t t = 0; t < basis.N; ++t) {
    std::vector<double> row{static_cast<double>(t)};
    for (std::size_t k = 0; k < basis.count(); ++k)
      row.push_back(basis.sequences(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(k)));
    seq.add_row(std::move(row));
  }
  io::CsvTable eig({"k", "kappa", "lambda"});
  for (std::size_t k = 0; k < basis.count(); ++k) {
    const double kappa = basis.kappas[static_cast<Eigen::Index>(k)];
    eig.add_row({static_cast<double>(k), kappa, 2.0 * std::numbers::pi * kappa});
  }
  out.write("dpss_sequences.csv", seq);
  out.write("dpss_eigenvalues.csv", eig);
  log << "dpss: " << basis.count() << " sequences, kappa_0 = " << basis.kappas[0] << "\n";
}

qp::Weighting parse_weighting(const std::string& w) {
  if (w == "trapezoid") return qp::Weighting::trapezoid;
  if (w == "literal") return qp::Weighting::literal;
  throw ParameterError("weighting must be trapezoid or literal");
}

struct QpRun {
  qp::QpProblem prob;
  qp::QpSolution best;
  double objective_spread = 0.0;
  double component_spread = 0.0;
  RVector distance;
  std::vector<double> omegas;
};

QpRun solve_horizon(double T, std::size_t n, std::size_t starts, qp::Weighting weighting, std::uint64_t seed) {
  QpRun r;
  r.prob = qp::build_qp(T, n == 0 ? qp::reproduction_samples(T) : n, 1.0, 1.0, weighting);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  qp::SolverOptions opts;
  opts.keep_history = false;
  std::vector<qp::QpSolution> sols;
  sols.push_back(qp::solve_box_qp(r.prob, opts));
  for (std::size_t s = 1; s < std::max<std::size_t>(starts, 1); ++s) {
    RVector x0(static_cast<Eigen::Index>(r.prob.size()));
    for (Eigen::Index i = 0; i < x0.size(); ++i) x0[i] = dist(rng);
    sols.push_back(qp::solve_box_qp(r.prob, opts, x0));
  }
  std::size_t best = 0;
  for (std::size_t s = 1; s < sols.size(); ++s)
    if (sols[s].objective < sols[best].objective) best = s;
  r.best = sols[best];
  for (const auto& s : sols) {
    r.objective_spread = std::max(r.objective_spread, std::abs(s.objective - r.best.objective));
    r.component_spread = std::max(r.component_spread, (s.x - r.best.x).cwiseAbs().maxCoeff());
  }
  r.omegas = linspace(-1.0, 1.0, 51);
  r.distance = qp::evaluate_final_distance(r.prob, r.best.x, r.omegas);
  return r;
}

json qp_json(const QpRun& r) {
  const auto& x = r.best.x;
  const double saturated =
      static_cast<double>((x.cwiseAbs().array() >= r.prob.bound - 1e-3).count()) / static_cast<double>(x.size());
  return json{{"T", r.prob.T},
              {"n", r.prob.size()},
              {"weighting", r.prob.weighting == qp::Weighting::trapezoid ? "trapezoid" : "literal"},
              {"objective", r.best.objective},
              {"literal_objective", r.best.literal_objective},
              {"continuous_cost", r.best.continuous_cost},
              {"iterations", r.best.iterations},
              {"converged", r.best.converged},
              {"kkt_residual", r.best.kkt_residual},
              {"objective_spread", r.objective_spread},
              {"component_spread", r.component_spread},
              {"saturated_fraction", saturated},
              {"max_final_distance", r.distance.maxCoeff()}};
}

void cmd_qp(const RunConfig& cfg, Artifacts& out, std::ostream& log) {
  const auto r = solve_horizon(cfg.T, cfg.n, cfg.starts, parse_weighting(cfg.weighting), cfg.seed);
  io::CsvTable sol({"t", "u"});
  for (std::size_t i = 0; i < r.prob.size(); ++i) sol.add_row({r.prob.times[i], r.best.x[static_cast<Eigen::Index>(i)]});
  io::CsvTable dist({"omega", "distance"});
  for (std::size_t j = 0; j < r.omegas.size(); ++j) dist.add_row({r.omegas[j], r.distance[static_cast<Eigen::Index>(j)]});
  out.write("qp_solution.csv", sol);
  out.write("qp_distance.csv", dist);
  json rep = qp_json(r);
  const auto cert = qp::certify_positive_definite(r.prob);
  rep["positive_definite"] = {{"certified", cert.certified},
                              {"digits", cert.digits},
                              {"min_pivot_log10", cert.min_pivot_log10},
                              {"lambda_min_double", cert.lambda_min_double}};
  out.write("qp_report.json", rep);
  log << "qp: T=" << cfg.T << " n=" << r.prob.size() << " objective " << r.best.objective << ", max distance "
      << r.distance.maxCoeff() << "\n";
}

oscillator::HarmonicSpec demo_spec(const RunConfig& cfg) {
  oscillator::HarmonicSpec s;
  s.N = cfg.freq_nodes;
  s.time_nodes = cfg.time_nodes;
  s.eps = cfg.eps;
  return s;
}

void harmonic_case(const RunConfig& cfg, Complex p0_value, Artifacts& out, std::ostream& log) {
  const auto spec = demo_spec(cfg);
  const oscillator::ComplexProfile p0 = oscillator::ComplexProfile::Constant(static_cast<Eigen::Index>(spec.N), p0_value);
  const oscillator::ComplexProfile pF = oscillator::ComplexProfile::Zero(static_cast<Eigen::Index>(spec.N));
  const auto syn = oscillator::synthesize_alpha(spec, p0, pF);
  const auto sim = oscillator::verify_by_simulation(spec, syn.alpha, p0, pF);

  io::CsvTable control({"t", "u", "v", "abs_alpha"});
  for (std::size_t i = 0; i < syn.alpha.size(); ++i) {
    const Complex a = syn.alpha.samples(static_cast<Eigen::Index>(i), 0);
    control.add_row({syn.alpha.times[i], a.real(), a.imag(), std::abs(a)});
  }
  const auto w = spec.frequencies();
  io::CsvTable finals({"omega", "x", "y"});
  for (std::size_t j = 0; j < spec.N; ++j) {
    const Complex p = sim.final_states[static_cast<Eigen::Index>(j)];
    finals.add_row({w[j], p.real(), p.imag()});
  }
  const std::vector<double> shown{-10.0, 0.0, 5.0};
  io::CsvTable traj({"t", "x_w-10", "y_w-10", "x_w0", "y_w0", "x_w5", "y_w5"});
  std::vector<CVector> paths;
  for (double om : shown) paths.push_back(oscillator::trajectory(spec, syn.alpha, p0_value, om));
  for (std::size_t i = 0; i < syn.alpha.size(); ++i) {
    std::vector<double> row{syn.alpha.times[i]};
    for (const auto& path : paths) {
      row.push_back(path[static_cast<Eigen::Index>(i)].real());
      row.push_back(path[static_cast<Eigen::Index>(i)].imag());
    }
    traj.add_row(std::move(row));
  }
  out.write("control.csv", control);
  out.write("final_states.csv", finals);
  out.write("trajectories.csv", traj);
  const double a0 = std::abs(syn.alpha.samples(0, 0));
  out.write("report.json", json{{"p0", io::complex_to_json(p0_value)},
                                {"modes_used", syn.modes_used},
                                {"eps", spec.eps},
                                {"reached", syn.reached},
                                {"projection_residual", syn.achieved_residual},
                                {"abs_alpha_0", a0},
                                {"energy", syn.energy_by_modes.empty() ? 0.0 : syn.energy_by_modes.back()},
                                {"max_final_distance_simulated", sim.max_deviation},
                                {"max_final_distance_predicted", syn.residual_per_omega.maxCoeff()},
                                {"lambdas", doubles(syn.lambdas)}});
  log << "demo: N=" << syn.modes_used << " modes, |alpha(0)| = " << a0 << ", max final distance "
      << sim.max_deviation << "\n";
}

void demo_amplitudes(const RunConfig& cfg, Artifacts& out, std::ostream& log) {
  const auto spec = demo_spec(cfg);
  const auto n = static_cast<Eigen::Index>(spec.N);
  const oscillator::ComplexProfile pF = oscillator::ComplexProfile::Zero(n);
  const auto a = oscillator::synthesize_alpha(spec, oscillator::ComplexProfile::Constant(n, Complex{1.0, 0.0}), pF);
  const auto b = oscillator::synthesize_alpha(spec, oscillator::ComplexProfile::Constant(n, Complex{1.0, 2.0}), pF);
  io::CsvTable amp({"t", "abs_alpha_case1", "abs_alpha_case2"});
  for (std::size_t i = 0; i < a.alpha.size(); ++i)
    amp.add_row({a.alpha.times[i], std::abs(a.alpha.samples(static_cast<Eigen::Index>(i), 0)),
                 std::abs(b.alpha.samples(static_cast<Eigen::Index>(i), 0))});
  out.write("amplitude.csv", amp);
  log << "demo amplitudes: |alpha(0)| = " << std::abs(a.alpha.samples(0, 0)) << " and " << std::abs(b.alpha.samples(0, 0))
      << "\n";
}

void demo_horizons(const RunConfig& cfg, Artifacts& out, std::ostream& log) {
  const double pi = std::numbers::pi;
  const std::vector<std::pair<std::string, double>> horizons{{"1", 1.0}, {"pi", pi}, {"5pi", 5 * pi}, {"10pi", 10 * pi}};
  json reports = json::array();
  std::vector<RVector> distances;
  std::vector<double> omegas;
  for (const auto& [label, T] : horizons) {
    const auto r = solve_horizon(T, cfg.n, cfg.starts, parse_weighting(cfg.weighting), cfg.seed);
    io::CsvTable sol({"t", "u"});
    for (std::size_t i = 0; i < r.prob.size(); ++i)
      sol.add_row({r.prob.times[i], r.best.x[static_cast<Eigen::Index>(i)]});
    out.write("solution_T" + label + ".csv", sol);
    reports.push_back(qp_json(r));
    distances.push_back(r.distance);
    omegas = r.omegas;
    log << "demo horizons: T=" << label << " max distance " << r.distance.maxCoeff() << "\n";
  }
  io::CsvTable dist({"omega", "d_T1", "d_Tpi", "d_T5pi", "d_T10pi"});
  for (std::size_t j = 0; j < omegas.size(); ++j) {
    std::vector<double> row{omegas[j]};
    for (const auto& d : distances) row.push_back(d[static_cast<Eigen::Index>(j)]);
    dist.add_row(std::move(row));
  }
  out.write("distance.csv", dist);
  out.write("report.json", reports);
}

}  // namespace

json RunConfig::echo() const {
  return json{{"command", command},
              {"demo", demo},
              {"spec", spec_path.string()},
              {"control", control_path.string()},
              {"out_dir", out_dir.string()},
              {"seed", seed},
              {"N", N},
              {"W", W},
              {"k", k},
              {"method", method},
              {"kappa_floor", kappa_floor},
              {"T", T},
              {"n", n},
              {"starts", starts},
              {"weighting", weighting},
              {"freq_nodes", freq_nodes},
              {"time_nodes", time_nodes},
              {"eps", eps}};
}

fs::path default_out_dir() {
  if (const char* env = std::getenv(kOutDirEnv); env && *env) return env;
  return "ensctl-out";
}

RunConfig parse_args(int argc, const char* const* argv, std::ostream& out) {
  RunConfig cfg;
  std::string out_dir;
  CLI::App app{"Ensemble control synthesis toolkit"};
  app.set_version_flag("--version", kVersion);
  app.add_option("-o,--out", out_dir, "output directory (default $" + std::string(kOutDirEnv) + " or ./ensctl-out)");
  app.add_option("--seed", cfg.seed, "seed for randomized starts");
  app.require_subcommand(1);

  auto* synth = app.add_subcommand("synth", "minimum-norm synthesis from a JSON system spec");
  synth->add_option("--spec", cfg.spec_path, "JSON spec")->required();
  auto* simulate = app.add_subcommand("simulate", "simulate a control CSV on a JSON system spec");
  simulate->add_option("--spec", cfg.spec_path, "JSON spec")->required();
  simulate->add_option("--control", cfg.control_path, "control CSV (t, re_0, im_0, ...)")->required();
  auto* diagnose = app.add_subcommand("diagnose", "Picard diagnostic for a JSON system spec");
  diagnose->add_option("--spec", cfg.spec_path, "JSON spec")->required();

  auto* dpss = app.add_subcommand("dpss", "discrete prolate spheroidal sequences");
  dpss->add_option("--N", cfg.N, "sequence length")->check(CLI::Range(2, 1 << 16));
  dpss->add_option("--W", cfg.W, "half-bandwidth, 0 < W < 1/2");
  dpss->add_option("--k", cfg.k, "number of sequences (0: all above the floor)");
  dpss->add_option("--method", cfg.method, "tridiagonal or dense");
  dpss->add_option("--floor", cfg.kappa_floor, "smallest eigenvalue kept");

  auto* qpc = app.add_subcommand("qp", "amplitude-constrained harmonic steering");
  qpc->add_option("--T", cfg.T, "horizon")->check(CLI::PositiveNumber);
  qpc->add_option("--n", cfg.n, "time samples (default: spacing <= 0.1, at least 51)");
  qpc->add_option("--starts", cfg.starts, "random starts");
  qpc->add_option("--weighting", cfg.weighting, "trapezoid or literal");

  auto* demo = app.add_subcommand("demo", "worked harmonic examples: case1, case2, amplitudes, horizons");
  demo->add_option("name", cfg.demo, "demo name")->required()->check(CLI::IsMember({"case1", "case2", "amplitudes", "horizons"}));
  demo->add_option("--freq-nodes", cfg.freq_nodes, "frequency nodes (harmonic demos)");
  demo->add_option("--time-nodes", cfg.time_nodes, "time samples of alpha (harmonic demos)");
  demo->add_option("--eps", cfg.eps, "projection residual target (harmonic demos)");
  demo->add_option("--n", cfg.n, "time samples for horizons (default: spacing rule)");
  demo->add_option("--starts", cfg.starts, "random starts for horizons");
  demo->add_option("--weighting", cfg.weighting, "horizons objective weighting");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return {};
  } catch (const CLI::CallForVersion&) {
    out << kVersion << "\n";
    return {};
  } catch (const CLI::ParseError& e) {
    throw ParameterError(e.what());
  }
  for (auto* sub : app.get_subcommands()) cfg.command = sub->get_name();
  cfg.out_dir = out_dir.empty() ? default_out_dir() : fs::path(out_dir);
  return cfg;
}

void run(const RunConfig& cfg, std::ostream& log) {
  const auto start = std::chrono::steady_clock::now();
  Artifacts out(cfg.out_dir);
  if (cfg.command == "synth")
    cmd_synth(cfg, out, log);
  else if (cfg.command == "simulate")
    cmd_simulate(cfg, out, log);
  else if (cfg.command == "diagnose")
    cmd_diagnose(cfg, out, log);
  else if (cfg.command == "dpss")
    cmd_dpss(cfg, out, log);
  else if (cfg.command == "qp")
    cmd_qp(cfg, out, log);
  else if (cfg.command == "demo") {
    if (cfg.demo == "case1")
      harmonic_case(cfg, {1.0, 0.0}, out, log);
    else if (cfg.demo == "case2")
      harmonic_case(cfg, {1.0, 2.0}, out, log);
    else if (cfg.demo == "amplitudes")
      demo_amplitudes(cfg, out, log);
    else if (cfg.demo == "horizons")
      demo_horizons(cfg, out, log);
    else
      throw ParameterError("unknown demo '" + cfg.demo + "'");
  } else {
    throw ParameterError("unknown command '" + cfg.command + "'");
  }
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  json manifest{{"schema", 1},
                {"tool", "ensctl"},
                {"version", kVersion},
                {"config", cfg.echo()},
                {"libraries",
                 {{"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                std::to_string(EIGEN_MINOR_VERSION)},
                  {"boost", BOOST_LIB_VERSION}}},
                {"compiler", __VERSION__},
                {"wall_time_s", wall},
                {"files", out.files()}};
  io::write_text(out.dir() / "manifest.json", manifest.dump(2) + "\n");
}

int main_entry(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  try {
    const RunConfig cfg = parse_args(argc, argv, out);
    if (cfg.command.empty()) return kOk;
    run(cfg, out);
    return kOk;
  } catch (const ParameterError& e) {
    err << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const ToleranceNotMet& e) {
    err << "tolerance not met: " << e.what() << "\n";
    return kToleranceNotMet;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kNumericalFailure;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "config error: " << e.what() << "\n";
    return kConfigError;
  }
}

}  // namespace ensctl::cli
