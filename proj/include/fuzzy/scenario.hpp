#pragma once

// Declarative scenario runner: strict JSON configs in, CSV field data and a
// JSON invariant report out.  Every parameter is validated against the module
// preconditions before any computation starts, and no output file is written
// for an invalid config.

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "fuzzy/grid.hpp"
#include "fuzzy/source.hpp"

namespace fuzzy::scenario {

class config_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class io_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Default bounds for every scenario check, overridable per config through
// the "tolerances" object.  This is the single constants table the runner
// and the acceptance suite draw from.
struct Tolerances {
  double norm_conservation = 1e-10;       // |N2 - 1| after evolution
  double oracle_l2 = 1e-6;                // relative L2 between independent evolvers
  double variance_rel = 1e-6;             // Gaussian spreading vs closed form
  double center_abs = 1e-6;               // free drift of the density center
  double fringe_period_rel = 0.01;        // measured vs 2*pi*t/(m0*L)
  double w_n_integral_abs = 1e-8;         // |int w_n dx|
  double w_n_projection_rel = 1e-3;       // L2 content of w_n in span{w_i}
  double w_n_bound_slack = 1e-12;         // |w_n| <= 2 sum sqrt(w_i w_j) + slack
  double visibility_mixed_max = 0.01;     // mixed pattern contrast at center
  double visibility_pure_min = 0.98;      // pure pattern contrast when overlapped
  double overlap_high = 0.99;             // R_w regime where full contrast is required
  double tail_exponent_abs = 0.05;        // fitted vs -(s-2)/(2(s-1))
  double delta_closed_form_abs = 1e-6;    // measured I vs Gaussian-smeared closed form
  double delta_floor_factor = 1.5;        // final deviation over the sigma_reg floor
  double diffusion_residual_abs = 1e-12;  // heat kernel vs continued Fresnel form
  double diffusion_moment_abs = 1e-10;    // kernel norm and variance
  double chapman_kolmogorov_abs = 1e-10;  // kernel semigroup convolution identity
  double harmonic_center_abs = 1e-4;      // <x>(t) vs the classical oscillator
  double mixed_linearity_abs = 0.0;       // bitwise additivity of the mixture
};

struct GridParams {
  double x_min = 0, x_max = 0;
  Eigen::Index n = 0;
};

struct PacketParams {
  double sigma0 = 1, x0 = 0, p0 = 0;
};

struct WindowParams {
  double x_lo = 0, x_hi = 0;
};

struct PotentialParams {
  std::string type;  // "harmonic"
  double omega = 1;
};

struct EvolutionParams {
  int s = 2;
  double m0 = 1;
  double t_final = 0;
  double dt = 0;
  std::optional<PotentialParams> potential;
};

struct DeltaParams {
  double x0 = 0;           // source position
  double sigma_reg = 0;    // regularization width of the delta profile
  double t_start = 0.1;    // first (largest) time of the halving sequence
  int halvings = 6;        // t_k = t_start * 2^-k, k = 0..halvings
  double chi_center = 0;
  double gaussian_width = 1;
  double bump_width = 2;
};

struct DiffusionParams {
  double k = 1, t = 1;
};

struct CrossCheckParams {
  std::vector<double> sigmas;
  std::vector<double> times;
};

struct ScenarioConfig {
  std::string scenario;
  GridParams grid;
  std::uint64_t seed = 0;
  std::optional<std::string> output_dir;
  Tolerances tolerances;

  std::optional<SourceSpec<double>> sources;
  std::optional<EnsembleSpec<double>> ensemble;
  std::optional<EvolutionParams> evolution;
  std::optional<PacketParams> packet;
  std::optional<WindowParams> window;
  std::optional<DeltaParams> delta;
  std::optional<DiffusionParams> diffusion;
  std::optional<CrossCheckParams> crosscheck;
  Eigen::Index sample_count = 0;
};

struct CheckEntry {
  std::string name;
  double value = 0;
  double bound = 0;
  std::string comparator;  // "<=" or ">="
  bool pass = false;
  std::string note;
};

struct RunReport {
  std::string scenario;
  double wall_time_s = 0;  // console summary only; excluded from the JSON
                           // serialization so reports stay byte-stable
  std::vector<CheckEntry> checks;
  std::vector<std::string> outputs;

  bool all_pass() const {
    for (const auto& c : checks)
      if (!c.pass) return false;
    return true;
  }
};

struct RunOptions {
  std::optional<std::string> output_dir;       // overrides config and environment
  std::optional<std::uint64_t> seed;           // overrides the config seed
  std::optional<std::string> json_report_path; // default <output dir>/report.json
  bool quiet = false;
};

const std::vector<std::string>& scenario_names();

// Static scenario -> check-name table; run_scenario emits exactly these, in
// this order, for each scenario.
const std::map<std::string, std::vector<std::string>>& scenario_checklists();

ScenarioConfig parse_config_text(const std::string& text);
ScenarioConfig parse_config(const std::string& path);

std::string report_to_json(const RunReport& report);

RunReport run_scenario(const ScenarioConfig& config, const RunOptions& options = {});

}  // namespace fuzzy::scenario
