#pragma once

#include <string>
#include <vector>

#include "omt/scenario.hpp"

namespace omt {

struct FrameFiles {
  double t = 0.0;
  std::string rho, m, u;  // relative to the run directory
};

/// Contents of manifest.json in a run directory.
struct RunManifest {
  Algorithm algorithm = Algorithm::uzawa_indirect;
  std::string config_toml;
  RunReport report;
  Metrics summary;
  std::vector<FrameFiles> frames;
  std::string mu, mu_pointwise, rho0, rhoT, obstacle;
};

/// Writes mu, the boundary densities, the obstacle mask, rho/m/u frames at the
/// configured cadence and manifest.json into `dir` (created if missing).
/// u is B^+(m/rho - f) where rho > 1e-6 max rho and 0 elsewhere.
RunManifest write_run(const std::string& dir, const Scenario& sc, const RunOutcome& out);
/// Throws FormatError on a missing or malformed manifest.
RunManifest read_manifest(const std::string& dir);

struct Recomputed {
  Scenario scenario;
  FluxField mu;
  Metrics metrics;
};

/// Rebuilds the scenario from the stored configuration, reads mu and recomputes
/// the summary metrics.
Recomputed recompute_from_dir(const std::string& dir);

}  // namespace omt
