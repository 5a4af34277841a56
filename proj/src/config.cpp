#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "omt/errors.hpp"
#include "omt/scenario.hpp"
#include "toml.hpp"

namespace omt {

std::string to_string(Algorithm a) {
  switch (a) {
    case Algorithm::uzawa_direct: return "uzawa_direct";
    case Algorithm::uzawa_indirect: return "uzawa_indirect";
    case Algorithm::dr: return "dr";
  }
  return "?";
}

Algorithm algorithm_from_string(const std::string& s) {
  if (s == "uzawa_direct") return Algorithm::uzawa_direct;
  if (s == "uzawa_indirect") return Algorithm::uzawa_indirect;
  if (s == "dr") return Algorithm::dr;
  throw ConfigError("unknown algorithm '" + s + "' (expected uzawa_direct, uzawa_indirect or dr)");
}

Formulation formulation_of(Algorithm a) {
  switch (a) {
    case Algorithm::uzawa_direct: return Formulation::direct;
    case Algorithm::uzawa_indirect: return Formulation::indirect;
    case Algorithm::dr: return Formulation::dr;
  }
  return Formulation::indirect;
}

namespace {

// Typed access with source positions in every message.
class Reader {
 public:
  Reader(std::string source) : source_(std::move(source)) {}

  [[noreturn]] void fail(const toml::node& n, const std::string& msg) const {
    std::ostringstream os;
    os << source_ << ":" << n.source().begin.line << ": " << msg;
    throw ConfigError(os.str());
  }

  void only(const toml::table& t, const std::string& where, std::set<std::string> keys) const {
    for (const auto& [k, v] : t)
      if (!keys.count(std::string(k.str()))) fail(v, "unknown key '" + std::string(k.str()) + "' in " + where);
  }

  const toml::table* table(const toml::table& t, const char* key) const {
    const toml::node* n = t.get(key);
    if (!n) return nullptr;
    if (!n->is_table()) fail(*n, std::string("'") + key + "' must be a table");
    return n->as_table();
  }

  double number(const toml::node& n, const std::string& what) const {
    if (auto v = n.value<double>()) return *v;
    fail(n, what + " must be a number");
  }

  template <class T>
  void get(const toml::table& t, const char* key, T& out) const {
    const toml::node* n = t.get(key);
    if (!n) return;
    const std::string what = std::string("'") + key + "'";
    if constexpr (std::is_same_v<T, double>) {
      out = number(*n, what);
    } else if constexpr (std::is_same_v<T, int>) {
      auto v = n->value<int64_t>();
      if (!v || !n->is_integer()) fail(*n, what + " must be an integer");
      out = static_cast<int>(*v);
    } else if constexpr (std::is_same_v<T, bool>) {
      auto v = n->value<bool>();
      if (!v) fail(*n, what + " must be true or false");
      out = *v;
    } else if constexpr (std::is_same_v<T, std::string>) {
      auto v = n->value<std::string>();
      if (!v) fail(*n, what + " must be a string");
      out = *v;
    } else if constexpr (std::is_same_v<T, std::vector<double>>) {
      out = numbers(*n, what);
    } else if constexpr (std::is_same_v<T, std::vector<int>>) {
      out.clear();
      for (double v : numbers(*n, what)) {
        if (v != static_cast<int>(v)) fail(*n, what + " must hold integers");
        out.push_back(static_cast<int>(v));
      }
    } else if constexpr (std::is_same_v<T, std::optional<double>>) {
      out = number(*n, what);
    }
  }

  std::vector<double> numbers(const toml::node& n, const std::string& what) const {
    std::vector<double> out;
    if (auto v = n.value<double>()) return {*v};
    if (!n.is_array()) fail(n, what + " must be a number or an array of numbers");
    for (const auto& e : *n.as_array()) out.push_back(number(e, what + " entries"));
    return out;
  }

  Eigen::MatrixXd matrix(const toml::table& t, const char* key) const {
    const toml::node* n = t.get(key);
    const std::string what = std::string("'") + key + "'";
    if (!n) fail(t, what + " is required");
    if (!n->is_array()) fail(*n, what + " must be an array of rows");
    const auto& rows = *n->as_array();
    Eigen::MatrixXd m;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const std::vector<double> r = numbers(rows[i], what + " rows");
      if (i == 0) m.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(r.size()));
      if (static_cast<Eigen::Index>(r.size()) != m.cols()) fail(rows[i], what + " rows differ in length");
      for (std::size_t j = 0; j < r.size(); ++j) m(i, j) = r[j];
    }
    return m;
  }

  DensitySpec density(const toml::table& t, const std::string& where) const {
    only(t, where, {"kind", "center", "radius", "lo", "hi", "sigma", "value", "path"});
    DensitySpec d;
    std::string kind = "uniform";
    get(t, "kind", kind);
    if (kind == "uniform") d.kind = DensitySpec::Kind::uniform;
    else if (kind == "disc") d.kind = DensitySpec::Kind::disc;
    else if (kind == "box") d.kind = DensitySpec::Kind::box;
    else if (kind == "gaussian") d.kind = DensitySpec::Kind::gaussian;
    else if (kind == "file") d.kind = DensitySpec::Kind::file;
    else fail(*t.get("kind"), "unknown density kind '" + kind + "'");
    get(t, "center", d.center);
    get(t, "radius", d.radius);
    get(t, "lo", d.lo);
    get(t, "hi", d.hi);
    get(t, "sigma", d.sigma);
    get(t, "value", d.value);
    get(t, "path", d.path);
    return d;
  }

 private:
  std::string source_;
};

}  // namespace

ProblemConfig parse_config(const std::string& text, const std::string& source) {
  toml::table root;
  try {
    root = toml::parse(text, source);
  } catch (const toml::parse_error& e) {
    std::ostringstream os;
    os << source << ":" << e.source().begin.line << ": " << e.description();
    throw ConfigError(os.str());
  }
  const Reader rd(source);
  rd.only(root, "the top level", {"grid", "system", "rho0", "rhoT", "density", "input", "solver", "output"});
  ProblemConfig c;

  if (const auto* t = rd.table(root, "grid")) {
    rd.only(*t, "[grid]", {"T", "nt", "nx"});
    rd.get(*t, "T", c.T);
    rd.get(*t, "nt", c.nt);
    rd.get(*t, "nx", c.nx);
  }
  if (const auto* t = rd.table(root, "system")) {
    rd.only(*t, "[system]", {"kind", "A", "B"});
    rd.get(*t, "kind", c.system);
    if (c.system == "linear") {
      c.A = rd.matrix(*t, "A");
      c.B = rd.matrix(*t, "B");
    } else if (c.system != "double_integrator" && c.system != "single_integrator") {
      rd.fail(*t->get("kind"), "unknown system '" + c.system + "'");
    }
  }
  if (const auto* t = rd.table(root, "rho0")) c.rho0 = rd.density(*t, "[rho0]");
  if (const auto* t = rd.table(root, "rhoT")) c.rhoT = rd.density(*t, "[rhoT]");
  if (const auto* t = rd.table(root, "density")) {
    rd.only(*t, "[density]", {"cap", "floor", "normalize", "obstacle"});
    rd.get(*t, "cap", c.cap);
    rd.get(*t, "floor", c.floor);
    rd.get(*t, "normalize", c.normalize);
    if (const toml::node* obs = t->get("obstacle")) {
      if (!obs->is_array_of_tables()) rd.fail(*obs, "'obstacle' must be an array of tables ([[density.obstacle]])");
      for (const auto& e : *obs->as_array()) {
        const auto& ot = *e.as_table();
        rd.only(ot, "[[density.obstacle]]", {"center", "half_width", "cap"});
        ObstacleSpec o;
        rd.get(ot, "center", o.center);
        rd.get(ot, "half_width", o.half_width);
        rd.get(ot, "cap", o.cap);
        c.obstacles.push_back(o);
      }
    }
  }
  if (const auto* t = rd.table(root, "input")) {
    rd.only(*t, "[input]", {"bounds", "halfspaces"});
    rd.get(*t, "bounds", c.input_bounds);
    if (const toml::node* hs = t->get("halfspaces")) {
      if (!hs->is_array()) rd.fail(*hs, "'halfspaces' must be an array of [a..., b] rows");
      for (const auto& row : *hs->as_array()) {
        std::vector<double> v = rd.numbers(row, "'halfspaces' rows");
        if (v.size() < 2) rd.fail(row, "a halfspace row needs at least one coefficient and the offset");
        InputHalfspace h;
        h.b = v.back();
        v.pop_back();
        h.a = v;
        c.halfspaces.push_back(h);
      }
    }
  }
  if (const auto* t = rd.table(root, "solver")) {
    rd.only(*t, "[solver]", {"algorithm", "max_iter", "tol", "r", "s", "rho_r", "rho_s", "elliptic_tol", "kf",
                             "prox_m", "literal_q"});
    std::string alg = to_string(c.algorithm);
    rd.get(*t, "algorithm", alg);
    try {
      c.algorithm = algorithm_from_string(alg);
    } catch (const ConfigError& e) {
      rd.fail(*t->get("algorithm"), e.what());
    }
    int max_iter = c.uzawa.max_iter;
    double tol = c.uzawa.stop_tol, etol = c.uzawa.elliptic.tol;
    rd.get(*t, "max_iter", max_iter);
    rd.get(*t, "tol", tol);
    rd.get(*t, "elliptic_tol", etol);
    c.uzawa.max_iter = c.dr.max_iter = max_iter;
    c.uzawa.stop_tol = c.dr.stop_tol = tol;
    c.uzawa.elliptic.tol = etol;
    c.dr.elliptic.tol = std::min(etol, c.dr.elliptic.tol);
    rd.get(*t, "r", c.uzawa.r);
    rd.get(*t, "s", c.uzawa.s);
    rd.get(*t, "rho_r", c.uzawa.rho_r);
    rd.get(*t, "rho_s", c.uzawa.rho_s);
    std::string kf = "drift", pm = "exact";
    rd.get(*t, "kf", kf);
    rd.get(*t, "prox_m", pm);
    if (kf == "drift") c.uzawa.kf = KfVariant::drift;
    else if (kf == "range_projected") c.uzawa.kf = KfVariant::range_projected;
    else rd.fail(*t->get("kf"), "kf must be 'drift' or 'range_projected'");
    if (pm == "exact") c.dr.prox_m = ProxMVariant::exact;
    else if (pm == "literal") c.dr.prox_m = ProxMVariant::literal;
    else rd.fail(*t->get("prox_m"), "prox_m must be 'exact' or 'literal'");
    rd.get(*t, "literal_q", c.dr.literal_q);
  }
  if (const auto* t = rd.table(root, "output")) {
    rd.only(*t, "[output]", {"dir", "cadence"});
    rd.get(*t, "dir", c.output_dir);
    rd.get(*t, "cadence", c.cadence);
  }
  return c;
}

ProblemConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  ProblemConfig c = parse_config(ss.str(), path);
  // Density files are relative to the config that names them.
  const std::filesystem::path base = std::filesystem::path(path).parent_path();
  for (DensitySpec* d : {&c.rho0, &c.rhoT})
    if (d->kind == DensitySpec::Kind::file && std::filesystem::path(d->path).is_relative())
      d->path = (base / d->path).string();
  return c;
}

namespace {

toml::array to_array(const std::vector<double>& v) {
  toml::array a;
  for (double x : v) a.push_back(x);
  return a;
}

toml::array to_rows(const Eigen::MatrixXd& m) {
  toml::array a;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    toml::array r;
    for (Eigen::Index j = 0; j < m.cols(); ++j) r.push_back(m(i, j));
    a.push_back(std::move(r));
  }
  return a;
}

toml::table density_table(const DensitySpec& d) {
  static const char* names[] = {"uniform", "disc", "box", "gaussian", "file"};
  toml::table t{{"kind", names[static_cast<int>(d.kind)]}, {"value", d.value}};
  switch (d.kind) {
    case DensitySpec::Kind::disc:
      t.insert("center", to_array(d.center));
      t.insert("radius", d.radius);
      break;
    case DensitySpec::Kind::box:
      t.insert("lo", to_array(d.lo));
      t.insert("hi", to_array(d.hi));
      break;
    case DensitySpec::Kind::gaussian:
      t.insert("center", to_array(d.center));
      t.insert("sigma", d.sigma);
      break;
    case DensitySpec::Kind::file:
      t.insert("path", d.path);
      break;
    case DensitySpec::Kind::uniform:
      break;
  }
  return t;
}

}  // namespace

std::string config_to_toml(const ProblemConfig& c) {
  toml::table root;
  toml::array nx;
  for (int n : c.nx) nx.push_back(n);
  root.insert("grid", toml::table{{"T", c.T}, {"nt", c.nt}, {"nx", nx}});
  toml::table sys{{"kind", c.system}};
  if (c.system == "linear") {
    sys.insert("A", to_rows(c.A));
    sys.insert("B", to_rows(c.B));
  }
  root.insert("system", sys);
  root.insert("rho0", density_table(c.rho0));
  root.insert("rhoT", density_table(c.rhoT));
  toml::table dens{{"normalize", c.normalize}};
  if (c.cap) dens.insert("cap", *c.cap);
  if (c.floor) dens.insert("floor", *c.floor);
  if (!c.obstacles.empty()) {
    toml::array obs;
    for (const ObstacleSpec& o : c.obstacles)
      obs.push_back(toml::table{{"center", to_array(o.center)}, {"half_width", to_array(o.half_width)}, {"cap", o.cap}});
    dens.insert("obstacle", obs);
  }
  root.insert("density", dens);
  toml::table input;
  if (!c.input_bounds.empty()) input.insert("bounds", to_array(c.input_bounds));
  if (!c.halfspaces.empty()) {
    toml::array hs;
    for (const InputHalfspace& h : c.halfspaces) {
      std::vector<double> row = h.a;
      row.push_back(h.b);
      hs.push_back(to_array(row));
    }
    input.insert("halfspaces", hs);
  }
  root.insert("input", input);
  root.insert("solver", toml::table{
                            {"algorithm", to_string(c.algorithm)},
                            {"max_iter", c.algorithm == Algorithm::dr ? c.dr.max_iter : c.uzawa.max_iter},
                            {"tol", c.algorithm == Algorithm::dr ? c.dr.stop_tol : c.uzawa.stop_tol},
                            {"elliptic_tol", c.algorithm == Algorithm::dr ? c.dr.elliptic.tol : c.uzawa.elliptic.tol},
                            {"r", c.uzawa.r},
                            {"s", c.uzawa.s},
                            {"rho_r", c.uzawa.rho_r},
                            {"rho_s", c.uzawa.rho_s},
                            {"kf", c.uzawa.kf == KfVariant::drift ? "drift" : "range_projected"},
                            {"prox_m", c.dr.prox_m == ProxMVariant::exact ? "exact" : "literal"},
                            {"literal_q", c.dr.literal_q},
                        });
  root.insert("output", toml::table{{"dir", c.output_dir}, {"cadence", c.cadence}});
  std::ostringstream os;
  os << toml::toml_formatter(root, toml::toml_formatter::default_flags & ~toml::format_flags::indentation);
  return os.str() + "\n";
}

}  // namespace omt
