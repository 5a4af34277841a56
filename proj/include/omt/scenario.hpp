#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "omt/dr.hpp"
#include "omt/uzawa.hpp"

namespace omt {

/// Density rasterized at cell centres.
struct DensitySpec {
  enum class Kind { uniform, disc, box, gaussian, file };
  Kind kind = Kind::uniform;
  std::vector<double> center;  // disc, gaussian
  double radius = 0.0;         // disc
  std::vector<double> lo, hi;  // box
  double sigma = 0.1;          // gaussian (isotropic)
  double value = 1.0;          // level inside the shape, or amplitude
  std::string path;            // file: an OMTF dump with the spatial dims
};

/// Axis-aligned square/box region with its own density cap.
struct ObstacleSpec {
  std::vector<double> center;
  std::vector<double> half_width;  // one per axis, or a single value for all
  double cap = 0.0;
};

enum class Algorithm { uzawa_direct, uzawa_indirect, dr };

std::string to_string(Algorithm a);
Algorithm algorithm_from_string(const std::string& s);
Formulation formulation_of(Algorithm a);

struct ProblemConfig {
  // grid
  double T = 1.0;
  int nt = 16;
  std::vector<int> nx{16};
  // system
  std::string system = "single_integrator";  // double_integrator | single_integrator | linear
  Eigen::MatrixXd A, B;                      // linear
  // densities
  DensitySpec rho0, rhoT;
  bool normalize = true;  // scale rhoT to the mass of rho0
  // bounds
  std::optional<double> cap;    // h away from obstacles
  std::optional<double> floor;  // g
  std::vector<ObstacleSpec> obstacles;
  std::vector<double> input_bounds;  // |u_i| <= k_i
  std::vector<InputHalfspace> halfspaces;
  // solver
  Algorithm algorithm = Algorithm::uzawa_indirect;
  UzawaParams uzawa;
  DRParams dr;
  // output
  std::string output_dir = "out";
  double cadence = 0.2;  // frame spacing in time units
};

/// Obstacle benchmark: double integrator on [0,1]^2, discs of level 10 at
/// (0.25, 0.4) and (0.75, 0.6), zero-density square of half-width 0.05 in the
/// centre, cap elsewhere, |u| <= k_bound, indirect Uzawa on 64x64 x 32.
/// With a cap equal to the disc level the k = 1 iteration stalls with a
/// continuity residual near 2e-2, hence twice the level.
ProblemConfig build_double_integrator_scenario(double k_bound, double radius = 0.15, double cap = 20.0);

/// Parses the TOML configuration. Throws ConfigError with the line on failure.
ProblemConfig parse_config(const std::string& text, const std::string& source = "<string>");
ProblemConfig load_config(const std::string& path);
/// Inverse of parse_config: parse_config(config_to_toml(c)) reproduces c.
std::string config_to_toml(const ProblemConfig& c);

struct Scenario {
  ProblemConfig config;
  Problem problem;
  SpaceSlice obstacle_mask;  // 1 inside any obstacle box
};

/// Rasterizes densities and bounds. Throws InvalidParameters / UnsupportedForDR
/// when the algorithm's preconditions fail.
Scenario build_scenario(const ProblemConfig& cfg);

/// Density at time t from the cell layers: the boundary traces at t = 0 and T,
/// averages of adjacent layers at interior layer interfaces, linear in between.
SpaceSlice density_frame(const Problem& p, const FluxField& mu_phys, double t);
/// Momentum frame, same construction (components 1..n of mu_phys).
std::vector<SpaceSlice> momentum_frame(const Problem& p, const FluxField& mu_phys, double t);

/// Control recovered from (rho, m) at one cell. Zero where rho <= floor.
SmallVec recover_control(const SystemModel& model, double t, const SmallVec& x, double rho, const SmallVec& m,
                         double floor);

struct Metrics {
  double residual = 0.0;
  double cost = 0.0;
  std::size_t degenerate_cells = 0;
  double mass0 = 0.0;
  /// max_t |mass(rho(t)) - mass(rho0)| / mass(rho0) over all layer interfaces.
  double max_mass_deviation = 0.0;
  /// max_t of the obstacle integral divided by mass(rho0).
  double max_obstacle_fraction = 0.0;
  /// max |u| (Euclidean) and max_i (|u_i| - k_i) over cells with rho > floor.
  double max_control = 0.0;
  double max_control_excess = 0.0;
  /// |rho(T) - rhoT|_1 / |rhoT|_1.
  double terminal_l1_gap = 0.0;
  double rho_floor = 0.0;
};

/// Everything here is a function of the problem and mu; used both by the run
/// summary and by recomputation from dumps.
Metrics compute_metrics(const Scenario& sc, const FluxField& mu, Formulation formulation);

struct RunOutcome {
  Algorithm algorithm = Algorithm::uzawa_indirect;
  FluxField mu;          // reported iterate in solver variables
  FluxField mu_pointwise;  // DR: prox_F side; otherwise equal to mu
  RunReport report;
};

/// Runs the configured algorithm; `tick` is called after every iteration.
RunOutcome run_scenario(const Scenario& sc, const std::function<void(int)>& tick = {});

/// Frame times 0, c, ..., T (count = round(T / cadence) + 1).
std::vector<double> frame_times(double T, double cadence);

}  // namespace omt
