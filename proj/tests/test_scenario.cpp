#include <bit>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>

#include "doctest.h"
#include "omt/dump.hpp"
#include "omt/errors.hpp"
#include "omt/render.hpp"
#include "omt/run_io.hpp"

using namespace omt;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("omt_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

ProblemConfig small_transport(Algorithm alg) {
  ProblemConfig c;
  c.T = 1.0;
  c.nt = 12;
  c.nx = {12};
  c.rho0.kind = c.rhoT.kind = DensitySpec::Kind::gaussian;
  c.rho0.center = {0.35};
  c.rhoT.center = {0.65};
  c.rho0.sigma = c.rhoT.sigma = 0.12;
  c.input_bounds = {1.0};
  c.cap = 5.0;
  c.algorithm = alg;
  c.uzawa.max_iter = c.dr.max_iter = 60;
  c.cadence = 0.25;
  return c;
}

}  // namespace

TEST_CASE("config parsing") {
  const std::string text = R"(
[grid]
T = 2.0
nt = 8
nx = [10, 12]

[system]
kind = "linear"
A = [[0, 1], [0, 0]]
B = [[0], [1]]

[rho0]
kind = "box"
lo = [0.1, 0.1]
hi = [0.4, 0.4]

[rhoT]
kind = "disc"
center = [0.7, 0.7]
radius = 0.2
value = 3

[density]
cap = 4.0
[[density.obstacle]]
center = [0.5, 0.5]
half_width = [0.1, 0.05]

[input]
halfspaces = [[1.0, -2.0], [-1.0, -2.0]]

[solver]
algorithm = "uzawa_direct"
max_iter = 77
rho_r = 0.25
kf = "range_projected"

[output]
dir = "somewhere"
cadence = 0.5
)";
  const ProblemConfig c = parse_config(text);
  CHECK(c.T == 2.0);
  CHECK(c.nx == std::vector<int>{10, 12});
  CHECK(c.system == "linear");
  CHECK(c.A(0, 1) == 1.0);
  CHECK(c.B.rows() == 2);
  CHECK(c.rho0.kind == DensitySpec::Kind::box);
  CHECK(c.rhoT.value == 3.0);
  CHECK(c.cap == 4.0);
  REQUIRE(c.obstacles.size() == 1);
  CHECK(c.obstacles[0].half_width == std::vector<double>{0.1, 0.05});
  REQUIRE(c.halfspaces.size() == 2);
  CHECK(c.halfspaces[1].a == std::vector<double>{-1.0});
  CHECK(c.halfspaces[1].b == -2.0);
  CHECK(c.algorithm == Algorithm::uzawa_direct);
  CHECK(c.uzawa.max_iter == 77);
  CHECK(c.uzawa.rho_r == 0.25);
  CHECK(c.uzawa.kf == KfVariant::range_projected);
  CHECK(c.cadence == 0.5);
}

TEST_CASE("config errors carry the line") {
  auto message = [](const std::string& text) {
    try {
      parse_config(text, "cfg.toml");
    } catch (const ConfigError& e) {
      return std::string(e.what());
    }
    return std::string("no error");
  };
  CHECK(message("[grid]\nnt = 4\nnxx = [3]\n").find("cfg.toml:3: unknown key 'nxx'") != std::string::npos);
  CHECK(message("[grid]\nnt = \n").find("cfg.toml:2:") != std::string::npos);
  CHECK(message("\n[grid]\nnt = 2.5\n").find("cfg.toml:3: 'nt' must be an integer") != std::string::npos);
  CHECK(message("[solver]\nalgorithm = \"newton\"\n").find("cfg.toml:2:") != std::string::npos);
  CHECK_THROWS_AS(load_config("/nonexistent/config.toml"), ConfigError);
}

TEST_CASE("configuration round trip") {
  ProblemConfig c = build_double_integrator_scenario(20.0);
  const std::string text = config_to_toml(c);
  const ProblemConfig back = parse_config(text);
  CHECK(config_to_toml(back) == text);
  CHECK(back.rho0.radius == c.rho0.radius);
  CHECK(back.input_bounds == c.input_bounds);
  CHECK(back.obstacles[0].half_width == c.obstacles[0].half_width);

  c = parse_config(R"([system]
kind = "linear"
A = [[0.1]]
B = [[2.0]]
[grid]
nx = [8]
[solver]
algorithm = "dr"
tol = 3e-7
literal_q = true
prox_m = "literal"
)");
  const ProblemConfig c2 = parse_config(config_to_toml(c));
  CHECK(c2.A(0, 0) == 0.1);
  CHECK(c2.dr.stop_tol == 3e-7);
  CHECK(c2.dr.literal_q);
  CHECK(c2.dr.prox_m == ProxMVariant::literal);
}

TEST_CASE("shipped benchmark configs match the built-in scenario") {
  for (double k : {20.0, 1.0}) {
    const std::string name = "double_integrator_k" + std::to_string(static_cast<int>(k)) + ".toml";
    const ProblemConfig file = load_config(std::string(OMT_SOURCE_DIR) + "/configs/" + name);
    CHECK(config_to_toml(file) == config_to_toml(build_double_integrator_scenario(k)));
  }
}

TEST_CASE("benchmark scenario rasterization") {
  const Scenario sc = build_scenario(build_double_integrator_scenario(20.0));
  const Problem& p = sc.problem;
  const Grid& g = p.grid;
  CHECK(g.cells() == 32u * 64 * 64);
  const double m0 = mass(p.rho0), mT = mass(p.rhoT);
  CHECK(std::abs(m0 - mT) <= 1e-12 * m0);

  int masked = 0, inside = 0;
  for (std::size_t k = 0; k < g.space_cells(); ++k) {
    const auto x = g.x_center(k);
    const bool in = std::max(std::abs(x[0] - 0.5), std::abs(x[1] - 0.5)) <= 0.05;
    CHECK((sc.obstacle_mask[k] > 0.0) == in);
    masked += in;
    CHECK(p.constraints.upper->values()[k] == (in ? 0.0 : 20.0));
    if (std::pow(x[0] - 0.25, 2) + std::pow(x[1] - 0.4, 2) < 0.15 * 0.15) {
      CHECK(p.rho0[k] == 10.0);
      ++inside;
    } else {
      CHECK(p.rho0[k] == 0.0);
    }
  }
  CHECK(masked == 36);  // six cell centres per axis fall in [0.45, 0.55]
  CHECK(inside > 200);
  CHECK(p.constraints.upper->values()[(g.nt() - 1) * g.space_cells()] == 20.0);
  CHECK(p.constraints.input.size() == 2);

  // Read as a squared radius, the initial disc would cover the obstacle.
  ProblemConfig literal = build_double_integrator_scenario(20.0, std::sqrt(0.15));
  const Scenario ls = build_scenario(literal);
  double overlap = 0.0;
  for (std::size_t k = 0; k < g.space_cells(); ++k) overlap += ls.obstacle_mask[k] * ls.problem.rho0[k];
  CHECK(overlap > 0.0);
}

TEST_CASE("scenario preconditions") {
  ProblemConfig c = small_transport(Algorithm::uzawa_indirect);
  c.floor = 6.0;
  CHECK_THROWS_AS(build_scenario(c), EmptyFeasibleSet);

  c = small_transport(Algorithm::dr);
  c.system = "linear";
  c.A = Eigen::MatrixXd::Constant(1, 1, 1.0);
  c.B = Eigen::MatrixXd::Constant(1, 1, 1.0);
  CHECK_THROWS_AS(build_scenario(c), UnsupportedForDR);

  c = small_transport(Algorithm::uzawa_indirect);
  c.uzawa.rho_r = c.uzawa.rho_s = 1.0;
  CHECK_THROWS_AS(build_scenario(c), InvalidParameters);

  c = small_transport(Algorithm::uzawa_indirect);
  c.input_bounds = {1.0, 2.0};
  CHECK_THROWS_AS(build_scenario(c), InvalidParameters);
}

TEST_CASE("frame times") {
  const auto t = frame_times(1.0, 0.2);
  REQUIRE(t.size() == 6);
  CHECK(t.front() == 0.0);
  CHECK(t.back() == 1.0);
  CHECK(t[2] == doctest::Approx(0.4));
  CHECK(frame_times(1.0, 5.0).size() == 2);
}

TEST_CASE("dump round trip is bit exact") {
  const fs::path dir = scratch("dump");
  fs::create_directories(dir);
  std::mt19937_64 rng(11);
  FieldDump d{{3, 5, 7}, {}};
  for (int i = 0; i < 105; ++i) d.data.push_back(std::bit_cast<double>(rng()));
  write_dump((dir / "a.omtf").string(), d);
  const FieldDump back = read_dump((dir / "a.omtf").string());
  CHECK(back.dims == d.dims);
  CHECK(std::memcmp(back.data.data(), d.data.data(), 8 * d.data.size()) == 0);

  // Little-endian regardless of host.
  write_dump((dir / "one.omtf").string(), FieldDump{{1}, {1.0}});
  const std::string bytes = read_bytes(dir / "one.omtf");
  REQUIRE(bytes.size() == 4 + 4 + 1 + 8 + 8);  // magic, version, rank, dims, data
  CHECK(bytes.substr(0, 4) == "OMTF");
  CHECK(bytes[4] == 1);
  CHECK(bytes[8] == 1);
  CHECK(static_cast<unsigned char>(bytes[23]) == 0xf0);
  CHECK(static_cast<unsigned char>(bytes[24]) == 0x3f);

  const std::string full = read_bytes(dir / "a.omtf");
  {
    std::ofstream(dir / "trunc.omtf", std::ios::binary) << full.substr(0, full.size() - 3);
    CHECK_THROWS_AS(read_dump((dir / "trunc.omtf").string()), FormatError);
    std::ofstream(dir / "tail.omtf", std::ios::binary) << full << "x";
    CHECK_THROWS_AS(read_dump((dir / "tail.omtf").string()), FormatError);
    std::string bad = full;
    bad[0] = 'X';
    std::ofstream(dir / "magic.omtf", std::ios::binary) << bad;
    CHECK_THROWS_AS(read_dump((dir / "magic.omtf").string()), FormatError);
    bad = full;
    bad[4] = 2;
    std::ofstream(dir / "version.omtf", std::ios::binary) << bad;
    CHECK_THROWS_AS(read_dump((dir / "version.omtf").string()), FormatError);
  }
  CHECK_THROWS_AS(write_dump((dir / "x.omtf").string(), FieldDump{{2, 2}, {1.0}}), FormatError);

  const Grid g(1.0, 3, {4, 2});
  FluxField f(g);
  for (double& v : f.raw()) v = std::bit_cast<double>(rng());
  write_dump((dir / "f.omtf").string(), to_dump(f));
  const FluxField fb = flux_from_dump(read_dump((dir / "f.omtf").string()), g);
  CHECK(std::memcmp(fb.raw().data(), f.raw().data(), 8 * f.raw().size()) == 0);
  CHECK_THROWS_AS(flux_from_dump(to_dump(f), Grid(1.0, 3, {2, 4})), FormatError);
  fs::remove_all(dir);
}

TEST_CASE("density frames") {
  const Grid g(1.0, 6, {5});
  Problem p{g, SystemModel::single_integrator(1), SpaceSlice(g, 2.0), SpaceSlice(g, 2.0), {}};
  FluxField mu(g);
  for (double& v : mu.component(0)) v = 2.0;
  for (double t : {0.0, 0.1, 0.5, 0.77, 1.0}) {
    const SpaceSlice f = density_frame(p, mu, t);
    for (double v : f.values()) CHECK(v == doctest::Approx(2.0));
  }
  // Interfaces average the adjacent layers.
  for (int it = 0; it < g.nt(); ++it) mu.component(0)[it * 5] = it;
  CHECK(density_frame(p, mu, 3 * g.dt())[0] == doctest::Approx(2.5));
  CHECK(density_frame(p, mu, 3.5 * g.dt())[0] == doctest::Approx(3.0));
}

TEST_CASE("control recovery") {
  const SystemModel di = SystemModel::double_integrator();
  SmallVec x(2), m(2);
  x << 0.3, 0.6;
  m << 2.0 * 0.6, 2.0 * -1.5;
  const SmallVec u = recover_control(di, 0.0, x, 2.0, m, 1e-6);
  REQUIRE(u.size() == 1);
  CHECK(u(0) == doctest::Approx(-1.5));
  CHECK(recover_control(di, 0.0, x, 1e-9, m, 1e-6)(0) == 0.0);
}

TEST_CASE("run directory: metrics recomputed from dumps") {
  for (Algorithm alg : {Algorithm::uzawa_indirect, Algorithm::uzawa_direct, Algorithm::dr}) {
    const fs::path dir = scratch("run_" + to_string(alg));
    const Scenario sc = build_scenario(small_transport(alg));
    const RunOutcome out = run_scenario(sc);
    const RunManifest m = write_run(dir.string(), sc, out);
    CHECK(m.frames.size() == 5);
    CHECK(m.summary.residual == out.report.residual.back());
    const Recomputed r = recompute_from_dir(dir.string());
    CHECK(std::abs(r.metrics.residual - m.summary.residual) <= 1e-12);
    CHECK(std::abs(r.metrics.cost - m.summary.cost) <= 1e-12 * (1.0 + m.summary.cost));
    CHECK(std::abs(r.metrics.max_mass_deviation - m.summary.max_mass_deviation) <= 1e-12);
    CHECK(std::abs(r.metrics.terminal_l1_gap - m.summary.terminal_l1_gap) <= 1e-12);
    CHECK(std::abs(r.metrics.max_control - m.summary.max_control) <= 1e-12);
    const RunManifest again = read_manifest(dir.string());
    CHECK(again.summary.cost == m.summary.cost);
    CHECK(again.report.residual == out.report.residual);
    fs::remove_all(dir);
  }
}

TEST_CASE("rendering") {
  CHECK(colormap(0.0) == std::array<std::uint8_t, 3>{0, 0, 4});
  CHECK(colormap(1.0) == std::array<std::uint8_t, 3>{252, 255, 164});
  CHECK(colormap(7.0) == colormap(1.0));

  const Image flat = render_field({4, 3}, std::vector<double>(12, 0.7), 0.0, 1.0, 2);
  CHECK(flat.width == 8);
  CHECK(flat.height == 6);
  for (std::size_t i = 0; i < flat.rgb.size(); i += 3) CHECK(flat.rgb[i] == flat.rgb[0]);

  // x2 grows upwards: cell (0, 2) is the top-left pixel.
  std::vector<double> v(12, 0.0);
  v[2] = 1.0;
  const Image one = render_field({4, 3}, v, 0.0, 1.0, 1);
  CHECK(one.rgb[0] == 252);
  std::vector<double> mask(12, 0.0);
  mask[0] = 1.0;
  const Image masked = render_field({4, 3}, v, 0.0, 1.0, 1, &mask);
  CHECK(masked.rgb[(2 * 4 + 0) * 3] == 128);

  const fs::path dir = scratch("render");
  const Scenario sc = build_scenario(small_transport(Algorithm::uzawa_indirect));
  write_run(dir.string(), sc, run_scenario(sc));
  RenderOptions ro;
  ro.out_dir = (dir / "a").string();
  const auto a = render_run(dir.string(), ro);
  ro.out_dir = (dir / "b").string();
  const auto b = render_run(dir.string(), ro);
  REQUIRE(a.size() == 5);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(read_bytes(a[i]) == read_bytes(b[i]));
  ro.field = RenderOptions::Field::u;
  ro.scale = RenderOptions::Scale::automatic;
  CHECK(render_run(dir.string(), ro).size() == 5);
  fs::remove_all(dir);
}
