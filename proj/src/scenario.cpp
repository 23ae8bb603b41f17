#include "fuzzy/scenario.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <sstream>

#include "fuzzy/analysis.hpp"
#include "fuzzy/io.hpp"
#include "fuzzy/kernels.hpp"
#include "fuzzy/spectral.hpp"

namespace fuzzy::scenario {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

[[noreturn]] void fail(const std::string& message) { throw config_error(message); }

const json& require_field(const json& obj, const std::string& context, const char* key) {
  if (!obj.contains(key)) fail(context + ": missing required field \"" + key + "\"");
  return obj.at(key);
}

void check_keys(const json& obj, const std::string& context, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) fail(context + ": expected an object");
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool known = false;
    for (const char* key : allowed)
      if (it.key() == key) {
        known = true;
        break;
      }
    if (!known) fail(context + ": unknown key \"" + it.key() + "\"");
  }
}

double as_number(const json& value, const std::string& context, const char* key) {
  if (!value.is_number()) fail(context + ": field \"" + std::string(key) + "\" must be a number");
  return value.get<double>();
}

double number_field(const json& obj, const std::string& context, const char* key) {
  return as_number(require_field(obj, context, key), context, key);
}

double number_field_or(const json& obj, const std::string& context, const char* key, double fallback) {
  if (!obj.contains(key)) return fallback;
  return as_number(obj.at(key), context, key);
}

std::int64_t integer_field(const json& obj, const std::string& context, const char* key) {
  const json& value = require_field(obj, context, key);
  if (!value.is_number_integer()) fail(context + ": field \"" + std::string(key) + "\" must be an integer");
  return value.get<std::int64_t>();
}

std::string string_field(const json& obj, const std::string& context, const char* key) {
  const json& value = require_field(obj, context, key);
  if (!value.is_string()) fail(context + ": field \"" + std::string(key) + "\" must be a string");
  return value.get<std::string>();
}

const std::map<std::string, double Tolerances::*>& tolerance_fields() {
  static const std::map<std::string, double Tolerances::*> table = {
      {"norm_conservation", &Tolerances::norm_conservation},
      {"oracle_l2", &Tolerances::oracle_l2},
      {"variance_rel", &Tolerances::variance_rel},
      {"center_abs", &Tolerances::center_abs},
      {"fringe_period_rel", &Tolerances::fringe_period_rel},
      {"w_n_integral_abs", &Tolerances::w_n_integral_abs},
      {"w_n_projection_rel", &Tolerances::w_n_projection_rel},
      {"w_n_bound_slack", &Tolerances::w_n_bound_slack},
      {"visibility_mixed_max", &Tolerances::visibility_mixed_max},
      {"visibility_pure_min", &Tolerances::visibility_pure_min},
      {"overlap_high", &Tolerances::overlap_high},
      {"tail_exponent_abs", &Tolerances::tail_exponent_abs},
      {"delta_closed_form_abs", &Tolerances::delta_closed_form_abs},
      {"delta_floor_factor", &Tolerances::delta_floor_factor},
      {"diffusion_residual_abs", &Tolerances::diffusion_residual_abs},
      {"diffusion_moment_abs", &Tolerances::diffusion_moment_abs},
      {"chapman_kolmogorov_abs", &Tolerances::chapman_kolmogorov_abs},
      {"harmonic_center_abs", &Tolerances::harmonic_center_abs},
      {"mixed_linearity_abs", &Tolerances::mixed_linearity_abs},
  };
  return table;
}

SourceSpec<double> parse_sources(const json& obj, const std::string& context, const Grid<double>& grid) {
  check_keys(obj, context, {"points", "sigma_reg"});
  const json& points = require_field(obj, context, "points");
  if (!points.is_array() || points.empty()) fail(context + ": \"points\" must be a nonempty array");
  SourceSpec<double> spec;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const std::string pt_context = context + ".points[" + std::to_string(i) + "]";
    const json& pt = points[i];
    check_keys(pt, pt_context, {"x", "weight", "phase"});
    spec.points.push_back({number_field(pt, pt_context, "x"), number_field(pt, pt_context, "weight"),
                           number_field_or(pt, pt_context, "phase", 0.0)});
  }
  spec.sigma_reg = number_field(obj, context, "sigma_reg");
  try {
    validate(spec, grid);
  } catch (const std::invalid_argument& e) {
    fail(context + ": " + e.what());
  }
  return spec;
}

EnsembleSpec<double> parse_ensemble(const json& obj, const std::string& context, const Grid<double>& grid) {
  check_keys(obj, context, {"members"});
  const json& members = require_field(obj, context, "members");
  if (!members.is_array() || members.empty()) fail(context + ": \"members\" must be a nonempty array");
  EnsembleSpec<double> ensemble;
  for (std::size_t i = 0; i < members.size(); ++i) {
    const std::string m_context = context + ".members[" + std::to_string(i) + "]";
    const json& member = members[i];
    check_keys(member, m_context, {"probability", "sources"});
    ensemble.members.push_back({number_field(member, m_context, "probability"),
                                parse_sources(require_field(member, m_context, "sources"),
                                              m_context + ".sources", grid)});
  }
  try {
    validate(ensemble, grid);
  } catch (const std::invalid_argument& e) {
    fail(context + ": " + e.what());
  }
  return ensemble;
}

EvolutionParams parse_evolution(const json& obj, const std::string& context, const Grid<double>& grid) {
  check_keys(obj, context, {"s", "m0", "t_final", "dt", "potential"});
  EvolutionParams evo;
  evo.s = static_cast<int>(integer_field(obj, context, "s"));
  if (evo.s < 2 || evo.s % 2 != 0) fail(context + ": \"s\" must be a positive even integer");
  evo.m0 = number_field(obj, context, "m0");
  if (!(evo.m0 > 0)) fail(context + ": \"m0\" must be positive");
  evo.t_final = number_field_or(obj, context, "t_final", 0.0);
  if (!(evo.t_final >= 0)) fail(context + ": \"t_final\" must be nonnegative");
  evo.dt = number_field_or(obj, context, "dt", 0.0);
  if (obj.contains("potential")) {
    const std::string p_context = context + ".potential";
    const json& pot = obj.at("potential");
    check_keys(pot, p_context, {"type", "omega"});
    PotentialParams params;
    params.type = string_field(pot, p_context, "type");
    if (params.type != "harmonic") fail(p_context + ": unsupported potential type \"" + params.type + "\"");
    params.omega = number_field(pot, p_context, "omega");
    if (!(params.omega > 0)) fail(p_context + ": \"omega\" must be positive");
    evo.potential = params;
    if (!(evo.dt > 0)) fail(context + ": \"dt\" must be positive when a potential is present");
  }
  (void)grid;
  return evo;
}

RealArray<double> harmonic_potential(const Grid<double>& grid, double m0, double omega) {
  const RealArray<double> x = grid.positions();
  return 0.5 * m0 * omega * omega * x * x;
}

EvolutionSpec<double> to_evolution_spec(const EvolutionParams& params, const Grid<double>& grid) {
  EvolutionSpec<double> spec;
  spec.s = params.s;
  spec.m0 = params.m0;
  spec.t_final = params.t_final;
  spec.dt = params.dt;
  if (params.potential) spec.potential = harmonic_potential(grid, params.m0, params.potential->omega);
  return spec;
}

// Output sink rooted at the scenario's output directory; records the manifest.
struct Emitter {
  fs::path dir;
  std::vector<std::string>* manifest;

  std::string path(const std::string& name) const {
    manifest->push_back(name);
    return (dir / name).string();
  }
};

void add_check(RunReport& report, const std::string& name, double value, double bound,
               const std::string& comparator, const std::string& note = "") {
  const bool pass = comparator == "<=" ? (value <= bound) : (value >= bound);
  report.checks.push_back({name, value, bound, comparator, pass, note});
}

void add_conditional_check(RunReport& report, const std::string& name, double value, double bound,
                           const std::string& comparator, bool binding, const std::string& note) {
  const bool pass = !binding || (comparator == "<=" ? (value <= bound) : (value >= bound));
  report.checks.push_back({name, value, bound, comparator, pass, note});
}

void write_json_file(const std::string& path, const json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot open " + path);
  out << j.dump(2) << "\n";
  if (!out) throw io_error("write failed for " + path);
}

// ---------------------------------------------------------------------------
// scenario bodies

void run_free_gaussian(const ScenarioConfig& config, const Grid<double>& grid, Emitter& emit,
                       RunReport& report) {
  const PacketParams& packet = *config.packet;
  const EvolutionParams& evo = *config.evolution;
  const Tolerances& tol = config.tolerances;

  const FuzzyStateD initial =
      gaussian_free_closed_form(grid, packet.sigma0, packet.x0, packet.p0, evo.m0, 0.0);
  const FuzzyStateD evolved = evolve_spectral(initial, evo.s, evo.m0, evo.t_final);
  const FuzzyStateD closed =
      gaussian_free_closed_form(grid, packet.sigma0, packet.x0, packet.p0, evo.m0, evo.t_final);

  add_check(report, "norm_conservation", std::abs(norm2(evolved) - 1.0), tol.norm_conservation, "<=");

  const DensityD w = density(evolved);
  const Moments<double> mom = moments(w);
  const double tau = evo.t_final / (evo.m0 * packet.sigma0 * packet.sigma0);
  const double variance_expected = packet.sigma0 * packet.sigma0 / 2.0 * (1.0 + tau * tau);
  add_check(report, "variance_matches_closed_form",
            std::abs(mom.variance - variance_expected) / variance_expected, tol.variance_rel, "<=");
  const double center_expected = packet.x0 + packet.p0 * evo.t_final / evo.m0;
  add_check(report, "center_matches_drift", std::abs(mom.mean - center_expected), tol.center_abs, "<=");
  add_check(report, "closed_form_l2", relative_l2_distance(evolved, closed), tol.oracle_l2, "<=");

  std::vector<double> xs, w0, wt, re, im;
  for (Eigen::Index j = 0; j < grid.size(); ++j) {
    xs.push_back(grid.position(j));
    w0.push_back(std::norm(initial.samples(j)));
    wt.push_back(w.samples(j));
    re.push_back(evolved.samples(j).real());
    im.push_back(evolved.samples(j).imag());
  }
  write_csv(emit.path("evolution.csv"), {"x", "w_initial", "w_final", "re_g", "im_g"}, {xs, w0, wt, re, im});

  json mj;
  mj["mean"] = mom.mean;
  mj["variance"] = mom.variance;
  mj["undefined_flag"] = mom.undefined_flag;
  write_json_file(emit.path("moments.json"), mj);
}

struct SlitRun {
  FuzzyStateD pure;
  std::vector<FuzzyStateD> members;
  DecompositionResult<double> parts;
};

SlitRun evolve_and_decompose(const Grid<double>& grid, const SourceSpec<double>& sources,
                             const EvolutionParams& evo) {
  const SourceComponents<double> built = build_source_components(grid, sources);
  FuzzyStateD pure = evolve_spectral(built.pure, evo.s, evo.m0, evo.t_final);
  std::vector<FuzzyStateD> members;
  for (const auto& member : built.members)
    members.push_back(evolve_spectral(member, evo.s, evo.m0, evo.t_final));
  DecompositionResult<double> parts = decompose(pure, members);
  return {std::move(pure), std::move(members), std::move(parts)};
}

void write_pattern_csv(const Emitter& emit, const DecompositionResult<double>& parts) {
  const Grid<double>& grid = parts.w_s.grid;
  std::vector<double> xs, ws, wm, wn;
  for (Eigen::Index j = 0; j < grid.size(); ++j) {
    xs.push_back(grid.position(j));
    ws.push_back(parts.w_s.samples(j));
    wm.push_back(parts.w_m.samples(j));
    wn.push_back(parts.w_n.samples(j));
  }
  write_csv(emit.path("pattern.csv"), {"x", "w_s", "w_m", "w_n"}, {xs, ws, wm, wn});
}

json decomposition_json(const DecompositionResult<double>& parts) {
  json j;
  j["w_n_integral"] = parts.w_n_integral;
  j["w_n_min"] = parts.w_n_min;
  j["projection_coeff"] = parts.projection_coeff;
  j["bound_excess"] = parts.bound_excess;
  j["l_g"] = parts.l_g;
  return j;
}

void run_two_slit_pure(const ScenarioConfig& config, const Grid<double>& grid, Emitter& emit,
                       RunReport& report, std::uint64_t seed) {
  const SourceSpec<double>& sources = *config.sources;
  const EvolutionParams& evo = *config.evolution;
  const Tolerances& tol = config.tolerances;
  const SlitRun run = evolve_and_decompose(grid, sources, evo);

  add_check(report, "norm_conservation", std::abs(norm2(run.pure) - 1.0), tol.norm_conservation, "<=");

  const double x1 = sources.points[0].x, x2 = sources.points[1].x;
  const double separation = std::abs(x2 - x1);
  const double center = (x1 + x2) / 2.0;
  const double period = fringe_spacing(evo.m0, separation, evo.t_final);
  const double span = std::min(3.0 * period, 0.45 * grid.length());
  const FringePattern<double> fringes =
      measure_fringe_pattern(run.parts.w_s, center - span, center + span);
  const double period_error =
      fringes.peak_positions.size() >= 2 ? std::abs(fringes.mean_period - period) / period : 1.0;
  add_check(report, "fringe_period_match", period_error, tol.fringe_period_rel, "<=");

  add_check(report, "w_n_zero_integral", std::abs(run.parts.w_n_integral), tol.w_n_integral_abs, "<=");
  add_check(report, "w_n_has_negative_min", run.parts.w_n_min, 0.0, "<=",
            "strict oscillation about zero requires min < 0");
  add_check(report, "w_n_pointwise_bound", run.parts.bound_excess, tol.w_n_bound_slack, "<=");
  add_check(report, "w_n_projection_small", run.parts.projection_coeff, tol.w_n_projection_rel, "<=");

  const DensityD w1 = density(normalize(run.members[0]));
  const DensityD w2 = density(normalize(run.members[1]));
  const double r_w = overlap_measure(w1, w2);
  const FringePattern<double> central =
      measure_fringe_pattern(run.parts.w_s, center - period / 2.0, center + period / 2.0);
  std::ostringstream note;
  note << "R_w = " << r_w << (r_w >= tol.overlap_high ? "" : " (below overlap_high; link not binding)");
  add_conditional_check(report, "visibility_overlap_link", central.visibility, tol.visibility_pure_min,
                        ">=", r_w >= tol.overlap_high, note.str());

  write_pattern_csv(emit, run.parts);
  json dj = decomposition_json(run.parts);
  dj["fringe_period_measured"] = fringes.mean_period;
  dj["fringe_period_predicted"] = period;
  dj["visibility"] = central.visibility;
  dj["overlap_r_w"] = r_w;
  write_json_file(emit.path("decomposition.json"), dj);

  if (config.sample_count > 0) {
    const std::vector<double> samples = sample_positions(run.parts.w_s, config.sample_count, seed);
    write_csv(emit.path("samples.csv"), {"x"}, {samples});
  }
}

void run_two_slit_mixed(const ScenarioConfig& config, const Grid<double>& grid, Emitter& emit,
                        RunReport& report) {
  const EnsembleSpec<double>& ensemble = *config.ensemble;
  const EvolutionParams& evo = *config.evolution;
  const Tolerances& tol = config.tolerances;
  const EvolutionSpec<double> spec = to_evolution_spec(evo, grid);

  std::vector<DensityD> member_w;
  for (const auto& member : ensemble.members)
    member_w.push_back(density(evolve_spectral(build_source_state(grid, member.sources), evo.s, evo.m0,
                                               evo.t_final)));

  const DensityD mixed = mixed_density(grid, ensemble, spec);
  add_check(report, "norm_conservation", std::abs(norm(mixed) - 1.0), tol.norm_conservation, "<=");

  RealArray<double> manual = RealArray<double>::Zero(grid.size());
  for (std::size_t i = 0; i < member_w.size(); ++i)
    manual += ensemble.members[i].probability * member_w[i].samples;
  add_check(report, "mixed_additivity_exact", (mixed.samples - manual).abs().maxCoeff(),
            tol.mixed_linearity_abs, "<=");

  const double x1 = ensemble.members[0].sources.points[0].x;
  const double x2 = ensemble.members[1].sources.points[0].x;
  const double period = fringe_spacing(evo.m0, std::abs(x2 - x1), evo.t_final);
  const double center = (x1 + x2) / 2.0;
  const FringePattern<double> central =
      measure_fringe_pattern(mixed, center - period / 2.0, center + period / 2.0);
  add_check(report, "visibility_mixed_small", central.visibility, tol.visibility_mixed_max, "<=");

  std::vector<double> xs, wm, w1, w2;
  for (Eigen::Index j = 0; j < grid.size(); ++j) {
    xs.push_back(grid.position(j));
    wm.push_back(mixed.samples(j));
    w1.push_back(ensemble.members[0].probability * member_w[0].samples(j));
    w2.push_back(ensemble.members[1].probability * member_w[1].samples(j));
  }
  write_csv(emit.path("pattern.csv"), {"x", "w_mixed", "w_1", "w_2"}, {xs, wm, w1, w2});
}

void run_n_slit(const ScenarioConfig& config, const Grid<double>& grid, Emitter& emit, RunReport& report,
                std::uint64_t seed) {
  const SourceSpec<double>& sources = *config.sources;
  const EvolutionParams& evo = *config.evolution;
  const Tolerances& tol = config.tolerances;
  const SlitRun run = evolve_and_decompose(grid, sources, evo);

  add_check(report, "norm_conservation", std::abs(norm2(run.pure) - 1.0), tol.norm_conservation, "<=");
  add_check(report, "w_n_zero_integral", std::abs(run.parts.w_n_integral), tol.w_n_integral_abs, "<=");
  add_check(report, "w_n_pointwise_bound", run.parts.bound_excess, tol.w_n_bound_slack, "<=");
  add_check(report, "w_n_projection_small", run.parts.projection_coeff, tol.w_n_projection_rel, "<=");

  write_pattern_csv(emit, run.parts);
  write_json_file(emit.path("decomposition.json"), decomposition_json(run.parts));

  if (config.sample_count > 0) {
    const std::vector<double> samples = sample_positions(run.parts.w_s, config.sample_count, seed);
    write_csv(emit.path("samples.csv"), {"x"}, {samples});
  }
}

void run_diffusion_compare(const ScenarioConfig& config, const Grid<double>& grid, Emitter& emit,
                           RunReport& report) {
  const DiffusionParams& diff = *config.diffusion;
  const Tolerances& tol = config.tolerances;

  add_check(report, "continuation_residual", diffusion_correspondence_residual(diff.k, diff.t, grid),
            tol.diffusion_residual_abs, "<=");

  const DensityD w = diffusion_density(grid, diff.k, diff.t);
  add_check(report, "kernel_norm", std::abs(norm(w) - 1.0), tol.diffusion_moment_abs, "<=");
  const double second_moment = integrate(grid, w.samples * grid.positions().square());
  add_check(report, "kernel_variance", std::abs(second_moment - 2.0 * diff.k * diff.k * diff.t),
            tol.diffusion_moment_abs, "<=");

  // Chapman-Kolmogorov: w(.,t/2) convolved with itself reproduces w(.,t).
  const DensityD half = diffusion_density(grid, diff.k, diff.t / 2.0);
  double ck_residual = 0;
  const Eigen::Index n = grid.size();
  const RealArray<double> reversed = half.samples.reverse();
  RealArray<double> kernel_row(2 * n - 1);
  for (Eigen::Index d = -(n - 1); d <= n - 1; ++d)
    kernel_row(d + n - 1) = diffusion_kernel(diff.k, static_cast<double>(d) * grid.dx(), diff.t / 2.0);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double conv = (kernel_row.segment(i, n) * reversed).sum() * grid.dx();
    ck_residual = std::max(ck_residual, std::abs(conv - w.samples(i)));
  }
  add_check(report, "chapman_kolmogorov", ck_residual, tol.chapman_kolmogorov_abs, "<=");

  std::vector<double> xs, wd, re_cont, abs_diff;
  const std::complex<double> continued_mass(0, 1.0 / (2.0 * diff.k * diff.k));
  for (Eigen::Index j = 0; j < n; ++j) {
    const double x = grid.position(j);
    const std::complex<double> continued = fresnel_kernel_form(continued_mass, x, diff.t);
    xs.push_back(x);
    wd.push_back(w.samples(j));
    re_cont.push_back(continued.real());
    abs_diff.push_back(std::abs(continued - std::complex<double>(w.samples(j), 0)));
  }
  write_csv(emit.path("kernel.csv"), {"x", "w_diffusion", "re_continued", "abs_diff"},
            {xs, wd, re_cont, abs_diff});
}

void run_tail_exponent(const ScenarioConfig& config, const Grid<double>& grid, Emitter& emit,
                       RunReport& report) {
  const SourceSpec<double>& sources = *config.sources;
  const EvolutionParams& evo = *config.evolution;
  const WindowParams& window = *config.window;
  const Tolerances& tol = config.tolerances;

  const FuzzyStateD evolved =
      evolve_spectral(build_source_state(grid, sources), evo.s, evo.m0, evo.t_final);
  add_check(report, "norm_conservation", std::abs(norm2(evolved) - 1.0), tol.norm_conservation, "<=");

  const TailFit<double> fit = fit_tail_exponent(evolved, window.x_lo, window.x_hi);
  const double predicted = tail_exponent_prediction<double>(evo.s);
  add_check(report, "tail_exponent_match", std::abs(fit.exponent - predicted), tol.tail_exponent_abs, "<=");
  add_check(report, "window_spans_decade", window.x_hi / window.x_lo, 10.0, ">=");

  std::vector<double> lx, lg, env;
  std::vector<double> mags;
  std::vector<Eigen::Index> idx;
  for (Eigen::Index j = 0; j < grid.size(); ++j) {
    const double x = grid.position(j);
    if (x < window.x_lo || x > window.x_hi) continue;
    idx.push_back(j);
    mags.push_back(std::abs(evolved.samples(j)));
  }
  for (std::size_t j = 0; j < idx.size(); ++j) {
    lx.push_back(std::log(grid.position(idx[j])));
    lg.push_back(std::log(mags[j]));
    const bool peak = j > 0 && j + 1 < mags.size() && mags[j] > mags[j - 1] && mags[j] > mags[j + 1];
    env.push_back(peak ? 1.0 : 0.0);
  }
  write_csv(emit.path("tail.csv"), {"log_abs_x", "log_abs_g", "is_envelope_point"}, {lx, lg, env});

  json fj;
  fj["exponent"] = fit.exponent;
  fj["residual"] = fit.residual;
  fj["predicted_exponent"] = predicted;
  fj["x_lo"] = fit.x_lo;
  fj["x_hi"] = fit.x_hi;
  fj["n_points"] = static_cast<std::int64_t>(fit.n_points);
  fj["used_envelope"] = fit.used_envelope;
  write_json_file(emit.path("tailfit.json"), fj);
}

void run_delta_limit(const ScenarioConfig& config, const Grid<double>& grid, Emitter& emit,
                     RunReport& report) {
  const DeltaParams& delta = *config.delta;
  const EvolutionParams& evo = *config.evolution;
  const Tolerances& tol = config.tolerances;

  const TestFunction<double> chi_gaussian{TestFunction<double>::Family::gaussian, delta.chi_center,
                                          delta.gaussian_width};
  const TestFunction<double> chi_bump{TestFunction<double>::Family::bump, delta.chi_center,
                                      delta.bump_width};
  const FuzzyStateD profile = build_unit_mass_source(grid, delta.x0, delta.sigma_reg);

  std::vector<double> ts, dev_g, dev_b;
  double closed_form_error = 0;
  for (int k = 0; k <= delta.halvings; ++k) {
    const double t = delta.t_start * std::pow(2.0, -k);
    const FuzzyStateD evolved = evolve_spectral(profile, evo.s, evo.m0, t);
    const std::complex<double> ig = delta_functional(evolved, chi_gaussian);
    const std::complex<double> ib = delta_functional(evolved, chi_bump);
    ts.push_back(t);
    dev_g.push_back(std::abs(ig - std::complex<double>(chi_gaussian(delta.x0), 0)));
    dev_b.push_back(std::abs(ib - std::complex<double>(chi_bump(delta.x0), 0)));

    if (evo.s == 2) {
      // Gaussian-smeared Fresnel integral in closed form:
      // I = (1 + Sigma/a^2)^(-1/2) exp(-(c-x0)^2 / (2 (Sigma + a^2))),
      // Sigma = sigma_reg^2 + i t / m0.
      const std::complex<double> sigma_c(delta.sigma_reg * delta.sigma_reg, t / evo.m0);
      const double a2 = delta.gaussian_width * delta.gaussian_width;
      const double d = delta.chi_center - delta.x0;
      const std::complex<double> closed =
          std::exp(-d * d / (2.0 * (sigma_c + a2))) / std::sqrt(1.0 + sigma_c / a2);
      closed_form_error = std::max(closed_form_error, std::abs(ig - closed));
    }
  }

  double worst_step_g = -1e300, worst_step_b = -1e300;
  for (std::size_t k = 0; k + 1 < ts.size(); ++k) {
    worst_step_g = std::max(worst_step_g, dev_g[k + 1] - dev_g[k]);
    worst_step_b = std::max(worst_step_b, dev_b[k + 1] - dev_b[k]);
  }
  add_check(report, "delta_monotone_gaussian", worst_step_g, 0.0, "<=",
            "largest consecutive increase of |I - chi(x0)| along the halving sequence");
  add_check(report, "delta_monotone_bump", worst_step_b, 0.0, "<=");
  add_conditional_check(report, "delta_closed_form_match", closed_form_error, tol.delta_closed_form_abs,
                        "<=", evo.s == 2, evo.s == 2 ? "" : "closed form applies to s = 2 only");

  const double sigma2 = delta.sigma_reg * delta.sigma_reg;
  const double d = delta.chi_center - delta.x0;
  const double a2 = delta.gaussian_width * delta.gaussian_width;
  const double floor_gaussian = std::abs(std::exp(-d * d / (2.0 * (sigma2 + a2))) /
                                             std::sqrt(1.0 + sigma2 / a2) -
                                         chi_gaussian(delta.x0));
  const double floor_bump =
      sigma2 * std::abs(chi_bump.curvature_at_center()) / 2.0 * chi_bump(delta.x0);
  const double floor_ratio =
      std::max(dev_g.back() / floor_gaussian, dev_b.back() / floor_bump);
  add_check(report, "delta_floor_reached", floor_ratio, tol.delta_floor_factor, "<=",
            "final deviation relative to the sigma_reg-set floor, worst family");

  write_csv(emit.path("delta.csv"), {"t", "deviation_gaussian", "deviation_bump"}, {ts, dev_g, dev_b});
}

void run_potential_well(const ScenarioConfig& config, const Grid<double>& grid, Emitter& emit,
                        RunReport& report) {
  const PacketParams& packet = *config.packet;
  const EvolutionParams& evo = *config.evolution;
  const Tolerances& tol = config.tolerances;
  const double omega = evo.potential->omega;

  EvolutionSpec<double> chunk = to_evolution_spec(evo, grid);
  const int checkpoints = 8;
  const auto steps_per_chunk =
      std::max<std::int64_t>(1, std::llround(evo.t_final / (checkpoints * evo.dt)));
  chunk.t_final = static_cast<double>(steps_per_chunk) * evo.dt;

  FuzzyStateD state = gaussian_free_closed_form(grid, packet.sigma0, packet.x0, packet.p0, evo.m0, 0.0);
  std::vector<double> ts{0.0}, centers{moments(density(state)).mean};
  std::vector<double> reference{packet.x0};
  double worst = 0;
  for (int c = 1; c <= checkpoints; ++c) {
    state = evolve_split_step(state, chunk);
    const double t = state.time;
    const double measured = moments(density(state)).mean;
    const double expected = packet.x0 * std::cos(omega * t) + packet.p0 / (evo.m0 * omega) * std::sin(omega * t);
    ts.push_back(t);
    centers.push_back(measured);
    reference.push_back(expected);
    worst = std::max(worst, std::abs(measured - expected));
  }
  add_check(report, "norm_conservation", std::abs(norm2(state) - 1.0), tol.norm_conservation, "<=");
  add_check(report, "center_oscillation_match", worst, tol.harmonic_center_abs, "<=");

  write_csv(emit.path("center.csv"), {"t", "mean_x", "reference_x"}, {ts, centers, reference});
}

void run_oracle_crosscheck(const ScenarioConfig& config, const Grid<double>& grid, Emitter& emit,
                           RunReport& report) {
  const CrossCheckParams& cross = *config.crosscheck;
  const EvolutionParams& evo = *config.evolution;
  const Tolerances& tol = config.tolerances;

  std::vector<double> col_sigma, col_t, col_l2;
  double worst_l2 = 0, worst_norm = 0;
  for (double sigma0 : cross.sigmas)
    for (double t : cross.times) {
      const FuzzyStateD g0 = gaussian_free_closed_form(grid, sigma0, 0.0, 0.0, evo.m0, 0.0);
      const FuzzyStateD by_convolution = evolve_convolution(g0, evo.m0, t);
      const FuzzyStateD by_spectral = evolve_spectral(g0, 2, evo.m0, t);
      const double l2 = relative_l2_distance(by_convolution, by_spectral);
      col_sigma.push_back(sigma0);
      col_t.push_back(t);
      col_l2.push_back(l2);
      worst_l2 = std::max(worst_l2, l2);
      worst_norm = std::max(worst_norm, std::abs(norm2(by_convolution) - 1.0));
    }
  add_check(report, "crosscheck_l2_max", worst_l2, tol.oracle_l2, "<=");
  add_check(report, "convolution_norm_conservation", worst_norm, tol.oracle_l2, "<=");

  const double t_total = *std::max_element(cross.times.begin(), cross.times.end());
  const FuzzyStateD g0 = gaussian_free_closed_form(grid, cross.sigmas.front(), 0.0, 0.0, evo.m0, 0.0);
  const FuzzyStateD two_steps =
      evolve_convolution(evolve_convolution(g0, evo.m0, t_total / 2.0), evo.m0, t_total / 2.0);
  const FuzzyStateD one_step = evolve_convolution(g0, evo.m0, t_total);
  add_check(report, "semigroup_l2", relative_l2_distance(two_steps, one_step), tol.oracle_l2, "<=");

  write_csv(emit.path("crosscheck.csv"), {"sigma0", "t", "rel_l2"}, {col_sigma, col_t, col_l2});
}

}  // namespace

const std::vector<std::string>& scenario_names() {
  static const std::vector<std::string> names = {
      "free-gaussian", "two-slit-pure", "two-slit-mixed", "n-slit",        "diffusion-compare",
      "tail-exponent", "delta-limit",   "potential-well", "oracle-crosscheck"};
  return names;
}

const std::map<std::string, std::vector<std::string>>& scenario_checklists() {
  static const std::map<std::string, std::vector<std::string>> table = {
      {"free-gaussian",
       {"norm_conservation", "variance_matches_closed_form", "center_matches_drift", "closed_form_l2"}},
      {"two-slit-pure",
       {"norm_conservation", "fringe_period_match", "w_n_zero_integral", "w_n_has_negative_min",
        "w_n_pointwise_bound", "w_n_projection_small", "visibility_overlap_link"}},
      {"two-slit-mixed", {"norm_conservation", "mixed_additivity_exact", "visibility_mixed_small"}},
      {"n-slit",
       {"norm_conservation", "w_n_zero_integral", "w_n_pointwise_bound", "w_n_projection_small"}},
      {"diffusion-compare",
       {"continuation_residual", "kernel_norm", "kernel_variance", "chapman_kolmogorov"}},
      {"tail-exponent", {"norm_conservation", "tail_exponent_match", "window_spans_decade"}},
      {"delta-limit",
       {"delta_monotone_gaussian", "delta_monotone_bump", "delta_closed_form_match",
        "delta_floor_reached"}},
      {"potential-well", {"norm_conservation", "center_oscillation_match"}},
      {"oracle-crosscheck", {"crosscheck_l2_max", "convolution_norm_conservation", "semigroup_l2"}},
  };
  return table;
}

ScenarioConfig parse_config_text(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    fail(std::string("config parse error: ") + e.what());
  }
  if (!root.is_object()) fail("config: top level must be a JSON object");

  ScenarioConfig config;
  config.scenario = string_field(root, "config", "scenario");
  bool known = false;
  for (const auto& name : scenario_names()) known = known || name == config.scenario;
  if (!known) fail("config: unknown scenario \"" + config.scenario + "\"");

  std::vector<const char*> allowed = {"scenario", "grid", "seed", "output_dir", "tolerances"};
  auto allow = [&allowed](std::initializer_list<const char*> keys) {
    for (const char* k : keys) allowed.push_back(k);
  };
  if (config.scenario == "free-gaussian") allow({"packet", "evolution"});
  if (config.scenario == "two-slit-pure") allow({"sources", "evolution", "samples"});
  if (config.scenario == "two-slit-mixed") allow({"ensemble", "evolution"});
  if (config.scenario == "n-slit") allow({"sources", "evolution", "samples"});
  if (config.scenario == "diffusion-compare") allow({"diffusion"});
  if (config.scenario == "tail-exponent") allow({"sources", "evolution", "window"});
  if (config.scenario == "delta-limit") allow({"delta", "evolution"});
  if (config.scenario == "potential-well") allow({"packet", "evolution"});
  if (config.scenario == "oracle-crosscheck") allow({"crosscheck", "evolution"});
  for (auto it = root.begin(); it != root.end(); ++it) {
    bool ok = false;
    for (const char* key : allowed) ok = ok || it.key() == key;
    if (!ok) fail("config: unknown key \"" + it.key() + "\"");
  }

  const json& grid_obj = require_field(root, "config", "grid");
  check_keys(grid_obj, "grid", {"x_min", "x_max", "n"});
  config.grid.x_min = number_field(grid_obj, "grid", "x_min");
  config.grid.x_max = number_field(grid_obj, "grid", "x_max");
  config.grid.n = static_cast<Eigen::Index>(integer_field(grid_obj, "grid", "n"));
  std::optional<Grid<double>> grid;
  try {
    grid.emplace(config.grid.x_min, config.grid.x_max, config.grid.n);
  } catch (const std::invalid_argument& e) {
    fail(std::string("grid: ") + e.what());
  }

  if (root.contains("seed")) {
    const json& seed = root.at("seed");
    if (!seed.is_number_unsigned() && !(seed.is_number_integer() && seed.get<std::int64_t>() >= 0))
      fail("config: field \"seed\" must be a nonnegative integer");
    config.seed = seed.get<std::uint64_t>();
  }
  if (root.contains("output_dir")) config.output_dir = string_field(root, "config", "output_dir");
  if (root.contains("tolerances")) {
    const json& tols = root.at("tolerances");
    if (!tols.is_object()) fail("tolerances: expected an object");
    for (auto it = tols.begin(); it != tols.end(); ++it) {
      const auto entry = tolerance_fields().find(it.key());
      if (entry == tolerance_fields().end()) fail("tolerances: unknown key \"" + it.key() + "\"");
      config.tolerances.*(entry->second) = as_number(it.value(), "tolerances", it.key().c_str());
    }
  }

  if (root.contains("sources"))
    config.sources = parse_sources(root.at("sources"), "sources", *grid);
  if (root.contains("ensemble"))
    config.ensemble = parse_ensemble(root.at("ensemble"), "ensemble", *grid);
  if (root.contains("evolution"))
    config.evolution = parse_evolution(root.at("evolution"), "evolution", *grid);
  if (root.contains("packet")) {
    const json& packet = root.at("packet");
    check_keys(packet, "packet", {"sigma0", "x0", "p0"});
    config.packet = PacketParams{number_field(packet, "packet", "sigma0"),
                                 number_field_or(packet, "packet", "x0", 0.0),
                                 number_field_or(packet, "packet", "p0", 0.0)};
    if (!(config.packet->sigma0 > 0)) fail("packet: \"sigma0\" must be positive");
  }
  if (root.contains("window")) {
    const json& window = root.at("window");
    check_keys(window, "window", {"x_lo", "x_hi"});
    config.window = WindowParams{number_field(window, "window", "x_lo"),
                                 number_field(window, "window", "x_hi")};
    if (!(config.window->x_lo > 0 && config.window->x_hi > config.window->x_lo))
      fail("window: require 0 < x_lo < x_hi");
    if (config.window->x_hi > config.grid.x_max) fail("window: x_hi beyond the grid");
  }
  if (root.contains("delta")) {
    const json& delta = root.at("delta");
    check_keys(delta, "delta",
               {"x0", "sigma_reg", "t_start", "halvings", "chi_center", "gaussian_width", "bump_width"});
    DeltaParams params;
    params.x0 = number_field_or(delta, "delta", "x0", 0.0);
    params.sigma_reg = number_field(delta, "delta", "sigma_reg");
    params.t_start = number_field_or(delta, "delta", "t_start", 0.1);
    params.halvings = static_cast<int>(delta.contains("halvings") ? integer_field(delta, "delta", "halvings") : 6);
    params.chi_center = number_field_or(delta, "delta", "chi_center", 0.0);
    params.gaussian_width = number_field_or(delta, "delta", "gaussian_width", 1.0);
    params.bump_width = number_field_or(delta, "delta", "bump_width", 2.0);
    if (!(params.sigma_reg >= 2 * grid->dx())) fail("delta: \"sigma_reg\" must be >= 2*dx");
    if (!(params.t_start > 0)) fail("delta: \"t_start\" must be positive");
    if (params.halvings < 1) fail("delta: \"halvings\" must be >= 1");
    if (!(params.gaussian_width > 0 && params.bump_width > 0)) fail("delta: widths must be positive");
    if (!(params.x0 > config.grid.x_min && params.x0 < config.grid.x_max))
      fail("delta: \"x0\" outside the grid");
    config.delta = params;
  }
  if (root.contains("diffusion")) {
    const json& diffusion = root.at("diffusion");
    check_keys(diffusion, "diffusion", {"k", "t"});
    config.diffusion = DiffusionParams{number_field(diffusion, "diffusion", "k"),
                                       number_field(diffusion, "diffusion", "t")};
    if (!(config.diffusion->k > 0 && config.diffusion->t > 0))
      fail("diffusion: \"k\" and \"t\" must be positive");
  }
  if (root.contains("crosscheck")) {
    const json& cross = root.at("crosscheck");
    check_keys(cross, "crosscheck", {"sigmas", "times"});
    CrossCheckParams params;
    for (const char* key : {"sigmas", "times"}) {
      const json& arr = require_field(cross, "crosscheck", key);
      if (!arr.is_array() || arr.empty())
        fail(std::string("crosscheck: \"") + key + "\" must be a nonempty array");
      for (const auto& v : arr) {
        if (!v.is_number() || !(v.get<double>() > 0))
          fail(std::string("crosscheck: entries of \"") + key + "\" must be positive numbers");
        (std::string(key) == "sigmas" ? params.sigmas : params.times).push_back(v.get<double>());
      }
    }
    config.crosscheck = params;
  }
  if (root.contains("samples")) {
    const json& samples = root.at("samples");
    check_keys(samples, "samples", {"count"});
    const std::int64_t count = integer_field(samples, "samples", "count");
    if (count < 0) fail("samples: \"count\" must be nonnegative");
    config.sample_count = static_cast<Eigen::Index>(count);
  }

  // Scenario-specific completeness.
  auto require_block = [&](bool present, const char* name) {
    if (!present) fail("config: scenario \"" + config.scenario + "\" requires the \"" + name + "\" block");
  };
  if (config.scenario == "free-gaussian") {
    require_block(config.packet.has_value(), "packet");
    require_block(config.evolution.has_value(), "evolution");
    if (config.evolution->s != 2) fail("free-gaussian: the closed-form checks require s = 2");
    if (!(config.evolution->t_final > 0)) fail("free-gaussian: \"t_final\" must be positive");
  } else if (config.scenario == "two-slit-pure") {
    require_block(config.sources.has_value(), "sources");
    require_block(config.evolution.has_value(), "evolution");
    if (config.sources->points.size() != 2) fail("two-slit-pure: exactly two sources required");
    if (!(config.evolution->t_final > 0)) fail("two-slit-pure: \"t_final\" must be positive");
    if (config.evolution->potential) fail("two-slit-pure: free evolution only");
  } else if (config.scenario == "two-slit-mixed") {
    require_block(config.ensemble.has_value(), "ensemble");
    require_block(config.evolution.has_value(), "evolution");
    if (config.ensemble->members.size() != 2) fail("two-slit-mixed: exactly two members required");
    for (const auto& member : config.ensemble->members)
      if (member.sources.points.size() != 1)
        fail("two-slit-mixed: each member must hold a single source");
    if (!(config.evolution->t_final > 0)) fail("two-slit-mixed: \"t_final\" must be positive");
  } else if (config.scenario == "n-slit") {
    require_block(config.sources.has_value(), "sources");
    require_block(config.evolution.has_value(), "evolution");
    if (config.sources->points.size() < 2) fail("n-slit: at least two sources required");
    if (!(config.evolution->t_final > 0)) fail("n-slit: \"t_final\" must be positive");
  } else if (config.scenario == "diffusion-compare") {
    require_block(config.diffusion.has_value(), "diffusion");
  } else if (config.scenario == "tail-exponent") {
    require_block(config.sources.has_value(), "sources");
    require_block(config.evolution.has_value(), "evolution");
    require_block(config.window.has_value(), "window");
    if (config.sources->points.size() != 1) fail("tail-exponent: a single source is required");
    if (!(config.evolution->t_final > 0)) fail("tail-exponent: \"t_final\" must be positive");
  } else if (config.scenario == "delta-limit") {
    require_block(config.delta.has_value(), "delta");
    require_block(config.evolution.has_value(), "evolution");
  } else if (config.scenario == "potential-well") {
    require_block(config.packet.has_value(), "packet");
    require_block(config.evolution.has_value(), "evolution");
    if (!config.evolution->potential) fail("potential-well: \"evolution.potential\" is required");
    if (!(config.evolution->t_final > 0)) fail("potential-well: \"t_final\" must be positive");
  } else if (config.scenario == "oracle-crosscheck") {
    require_block(config.crosscheck.has_value(), "crosscheck");
    require_block(config.evolution.has_value(), "evolution");
    if (config.evolution->s != 2) fail("oracle-crosscheck: the convolution oracle requires s = 2");
  }
  return config;
}

ScenarioConfig parse_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot read config file " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_config_text(buffer.str());
}

std::string report_to_json(const RunReport& report) {
  json j;
  j["scenario"] = report.scenario;
  j["checks"] = json::array();
  for (const auto& check : report.checks) {
    json entry;
    entry["name"] = check.name;
    entry["value"] = check.value;
    entry["bound"] = check.bound;
    entry["comparator"] = check.comparator;
    entry["pass"] = check.pass;
    entry["note"] = check.note;
    j["checks"].push_back(entry);
  }
  j["outputs"] = report.outputs;
  return j.dump(2) + "\n";
}

RunReport run_scenario(const ScenarioConfig& config, const RunOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  RunReport report;
  report.scenario = config.scenario;

  std::string out_dir = ".";
  if (const char* env = std::getenv("FUZZYMECH_OUTPUT_DIR")) out_dir = env;
  if (config.output_dir) out_dir = *config.output_dir;
  if (options.output_dir) out_dir = *options.output_dir;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw io_error("cannot create output directory " + out_dir + ": " + ec.message());
  Emitter emit{out_dir, &report.outputs};

  const std::uint64_t seed = options.seed.value_or(config.seed);
  const Grid<double> grid(config.grid.x_min, config.grid.x_max, config.grid.n);

  try {
    if (config.scenario == "free-gaussian")
      run_free_gaussian(config, grid, emit, report);
    else if (config.scenario == "two-slit-pure")
      run_two_slit_pure(config, grid, emit, report, seed);
    else if (config.scenario == "two-slit-mixed")
      run_two_slit_mixed(config, grid, emit, report);
    else if (config.scenario == "n-slit")
      run_n_slit(config, grid, emit, report, seed);
    else if (config.scenario == "diffusion-compare")
      run_diffusion_compare(config, grid, emit, report);
    else if (config.scenario == "tail-exponent")
      run_tail_exponent(config, grid, emit, report);
    else if (config.scenario == "delta-limit")
      run_delta_limit(config, grid, emit, report);
    else if (config.scenario == "potential-well")
      run_potential_well(config, grid, emit, report);
    else if (config.scenario == "oracle-crosscheck")
      run_oracle_crosscheck(config, grid, emit, report);
  } catch (const guard_error& e) {
    // Numerical guards are failed diagnostics, not crashes: emit the
    // remaining checklist entries as not-evaluated failures.
    const auto& nominal = scenario_checklists().at(config.scenario);
    for (const auto& name : nominal) {
      bool present = false;
      for (const auto& check : report.checks) present = present || check.name == name;
      if (!present)
        report.checks.push_back({name, std::numeric_limits<double>::quiet_NaN(), 0.0, "<=", false,
                                 std::string("not evaluated: ") + e.what()});
    }
  }

  // Internal consistency with the static checklist table.
  const auto& expected = scenario_checklists().at(config.scenario);
  if (report.checks.size() != expected.size())
    throw std::logic_error("run_scenario: checklist size mismatch for " + config.scenario);
  for (std::size_t i = 0; i < expected.size(); ++i)
    if (report.checks[i].name != expected[i])
      throw std::logic_error("run_scenario: checklist entry mismatch: " + report.checks[i].name);

  const std::string report_path =
      options.json_report_path ? *options.json_report_path : (fs::path(out_dir) / "report.json").string();
  {
    std::ofstream out(report_path, std::ios::binary);
    if (!out) throw io_error("cannot open report path " + report_path);
    out << report_to_json(report);
    if (!out) throw io_error("write failed for " + report_path);
  }

  report.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

}  // namespace fuzzy::scenario
