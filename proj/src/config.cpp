#include "metasurf/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

namespace metasurf {

namespace {

struct Entry {
  std::string section;
  std::string key;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}
std::string fmt(int v) { return std::to_string(v); }
std::string fmt(bool v) { return v ? "true" : "false"; }

double parse_double(const std::string& s, const std::string& key) {
  try {
    size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("invalid number for key '" + key + "': '" + s + "'");
  }
}
int parse_int(const std::string& s, const std::string& key) {
  try {
    size_t pos = 0;
    const int v = std::stoi(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("invalid integer for key '" + key + "': '" + s + "'");
  }
}
bool parse_bool(const std::string& s, const std::string& key) {
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw ConfigError("invalid boolean for key '" + key + "': '" + s + "'");
}

#define ENTRY_D(sec, name, field)                                            \
  {sec, name,                                                                \
   [](RunConfig& c, const std::string& s) { c.field = parse_double(s, name); }, \
   [](const RunConfig& c) { return fmt(c.field); }}
#define ENTRY_I(sec, name, field)                                         \
  {sec, name,                                                             \
   [](RunConfig& c, const std::string& s) { c.field = parse_int(s, name); }, \
   [](const RunConfig& c) { return fmt(c.field); }}
#define ENTRY_B(sec, name, field)                                          \
  {sec, name,                                                              \
   [](RunConfig& c, const std::string& s) { c.field = parse_bool(s, name); }, \
   [](const RunConfig& c) { return fmt(c.field); }}
#define ENTRY_S(sec, name, field)                                  \
  {sec, name, [](RunConfig& c, const std::string& s) { c.field = s; }, \
   [](const RunConfig& c) { return c.field; }}

const std::vector<Entry>& schema() {
  static const std::vector<Entry> entries = {
      ENTRY_D("materials", "rho_air_kg_m3", materials.rho_air),
      ENTRY_D("materials", "k_air_pa", materials.K_air),
      ENTRY_D("materials", "rho_elastic_kg_m3", materials.rho_elastic),
      ENTRY_D("materials", "k_elastic_pa", materials.K_elastic),

      ENTRY_I("cell", "nx", cell_nx),
      ENTRY_I("cell", "ny", cell_ny),
      ENTRY_D("cell", "ndd_height_cell", ndd_height),
      ENTRY_S("cell", "inclusion", inclusion),
      ENTRY_D("cell", "circle_center_x_cell", circle_center_x),
      ENTRY_D("cell", "circle_center_y_cell", circle_center_y),
      ENTRY_D("cell", "circle_radius_cell", circle_radius_cell),
      ENTRY_D("cell", "para_base_x_cell", para_base_x),
      ENTRY_D("cell", "para_base_y_cell", para_base_y),
      ENTRY_D("cell", "para_width_cell", para_width_cell),
      ENTRY_D("cell", "para_height_cell", para_height_cell),
      ENTRY_D("cell", "para_slant_cell", para_slant_cell),
      ENTRY_S("cell", "phi_file", phi_file),

      ENTRY_S("macro", "geometry", geometry),
      ENTRY_D("macro", "eps0_m", eps0_m),
      ENTRY_D("macro", "rho0_kg_m3", rho0_kg_m3),
      ENTRY_D("macro", "k0_pa", k0_pa),
      ENTRY_D("macro", "interface_length_m", interface_length_m),
      ENTRY_D("macro", "depth_m", depth_m),
      ENTRY_D("macro", "outlet_width_m", outlet_width_m),
      ENTRY_D("macro", "wall_width_m", wall_width_m),
      ENTRY_D("macro", "validation_outlet_width_m", validation_outlet_width_m),
      ENTRY_D("macro", "validation_outlet_offset_m", validation_outlet_offset_m),
      ENTRY_D("macro", "meas_offset_m", meas_offset_m),
      ENTRY_D("macro", "meas_x0_m", meas_x0_m),
      ENTRY_D("macro", "meas_x1_m", meas_x1_m),
      ENTRY_B("macro", "outlet1_left", outlet1_left),
      ENTRY_I("macro", "nx", macro_nx),
      ENTRY_I("macro", "ny", macro_ny),

      ENTRY_D("frequency", "k0_per_m", k0_per_m),
      ENTRY_D("frequency", "p_in_pa", p_in_pa),

      ENTRY_D("sweep", "k0_min_per_m", sweep_k0_min_per_m),
      ENTRY_D("sweep", "k0_max_per_m", sweep_k0_max_per_m),
      ENTRY_D("sweep", "k0_step_per_m", sweep_k0_step_per_m),
      ENTRY_I("sweep", "jobs", sweep_jobs),

      ENTRY_D("objective", "weight", weight),
      ENTRY_S("objective", "wiring", wiring),

      ENTRY_D("levelset", "k_phi", k_phi),
      ENTRY_D("levelset", "tau", tau),
      ENTRY_D("levelset", "dt", dt),
      ENTRY_D("levelset", "snap_fraction", snap_fraction),

      ENTRY_I("optimizer", "max_iterations", max_iterations),
      ENTRY_D("optimizer", "conv_threshold", conv_threshold),
      ENTRY_I("optimizer", "conv_activation", conv_activation),
      ENTRY_I("optimizer", "snapshot_every", snapshot_every),

      ENTRY_S("tdcheck", "probe_points_cell", td_probes),
      ENTRY_D("tdcheck", "eps_coarse_cell", td_eps_coarse_cell),
      ENTRY_D("tdcheck", "eps_fine_cell", td_eps_fine_cell),

      ENTRY_S("output", "dir", output_dir),
      ENTRY_B("output", "debug_fields", debug_fields),
  };
  return entries;
}

#undef ENTRY_D
#undef ENTRY_I
#undef ENTRY_B
#undef ENTRY_S

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

RunConfig parse_config_text(const std::string& text, const std::string& origin) {
  RunConfig cfg;
  std::istringstream is(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    if (t.front() == '[') {
      if (t.back() != ']')
        throw ConfigError(origin + ":" + std::to_string(lineno) + ": malformed section");
      section = trim(t.substr(1, t.size() - 2));
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    bool found = false;
    for (const auto& e : schema()) {
      if (e.section == section && e.key == key) {
        e.set(cfg, value);
        found = true;
        break;
      }
    }
    if (!found)
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": unknown key '" +
                        section + "." + key + "'");
  }
  return cfg;
}

RunConfig parse_config_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream buf;
  buf << is.rdbuf();
  return parse_config_text(buf.str(), path);
}

void write_manifest(const RunConfig& cfg, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot write manifest '" + path + "'");
  os << "# resolved run configuration; rerunning with this file reproduces the "
        "outputs\n";
  std::string section;
  for (const auto& e : schema()) {
    if (e.section != section) {
      section = e.section;
      os << "\n[" << section << "]\n";
    }
    os << e.key << " = " << e.get(cfg) << "\n";
  }
}

MacroConfig RunConfig::macro_config() const {
  MacroConfig m;
  m.k0 = k0_per_m;
  m.P_in = p_in_pa;
  m.eps0 = eps0_m;
  m.rho0 = rho0_kg_m3;
  m.K0 = k0_pa;
  if (geometry == "validation")
    m.geometry = MacroGeometry::Validation;
  else if (geometry == "design")
    m.geometry = MacroGeometry::Design;
  else
    throw ConfigError("macro.geometry must be 'validation' or 'design'");
  m.interface_length = interface_length_m;
  m.depth = depth_m;
  m.outlet_width = outlet_width_m;
  m.wall_width = wall_width_m;
  m.validation_outlet_width = validation_outlet_width_m;
  m.validation_outlet_offset = validation_outlet_offset_m;
  m.meas_offset = meas_offset_m;
  m.meas_x0 = meas_x0_m;
  m.meas_x1 = meas_x1_m;
  m.outlet1_left = outlet1_left;
  m.nx = macro_nx;
  m.ny = macro_ny;
  return m;
}

ObjectiveSpec RunConfig::objective_spec() const {
  ObjectiveSpec s;
  s.w = weight;
  if (wiring == "case1") {
    s.gamma_min = BoundaryTag::Outlet2;
    s.gamma_max = BoundaryTag::Outlet1;
  } else if (wiring == "case2") {
    s.gamma_min = BoundaryTag::Outlet1;
    s.gamma_max = BoundaryTag::Outlet2;
  } else {
    throw ConfigError("objective.wiring must be 'case1' or 'case2'");
  }
  return s;
}

LevelSetParams RunConfig::levelset_params() const {
  LevelSetParams p;
  p.K_phi = k_phi;
  p.tau = tau;
  p.dt = dt;
  return p;
}

OptimizerConfig RunConfig::optimizer_config() const {
  OptimizerConfig oc;
  oc.materials = materials;
  oc.macro = macro_config();
  oc.objective = objective_spec();
  oc.levelset = levelset_params();
  oc.conform.snap_fraction = snap_fraction;
  oc.cell_nx = cell_nx;
  oc.cell_ny = cell_ny;
  oc.ndd_height = ndd_height;
  oc.init_center = {circle_center_x, circle_center_y};
  oc.init_radius = circle_radius_cell;
  oc.init_phi_file = phi_file;
  oc.max_iterations = max_iterations;
  oc.conv_threshold = conv_threshold;
  oc.conv_activation = conv_activation;
  oc.snapshot_every = snapshot_every;
  oc.output_dir = output_dir;
  oc.debug_fields = debug_fields;
  return oc;
}

std::vector<Vec2> RunConfig::td_probe_points() const {
  std::vector<Vec2> out;
  std::istringstream is(td_probes);
  std::string item;
  while (std::getline(is, item, ';')) {
    const auto comma = item.find(',');
    if (comma == std::string::npos)
      throw ConfigError("tdcheck.probe_points_cell: expected 'x,y; x,y; ...'");
    out.push_back({parse_double(trim(item.substr(0, comma)), "probe x"),
                   parse_double(trim(item.substr(comma + 1)), "probe y")});
  }
  if (out.empty()) throw ConfigError("tdcheck.probe_points_cell is empty");
  return out;
}

LevelSet RunConfig::make_levelset(std::shared_ptr<const TriMesh> mesh) const {
  if (inclusion == "none")
    return initialize_profile(std::move(mesh), [](const Vec2&) { return -1.0; });
  if (inclusion == "circle") {
    const Vec2 c{circle_center_x, circle_center_y};
    const double r = circle_radius_cell;
    if (r <= 0.0) throw ConfigError("circle radius must be positive");
    // Wrapped across the periodic seam so off-center circles stay periodic.
    return initialize_profile(std::move(mesh), [c, r](const Vec2& p) {
      double phi = -1.0;
      for (int k = -1; k <= 1; ++k) {
        const Vec2 q{p.x + k, p.y};
        phi = std::max(phi, (r - (q - c).norm()) / r);
      }
      return phi;
    });
  }
  if (inclusion == "parallelogram") {
    const double x0 = para_base_x, y0 = para_base_y;
    const double w = para_width_cell, h = para_height_cell, s = para_slant_cell;
    if (w <= 0.0 || h <= 0.0) throw ConfigError("parallelogram must have positive size");
    return initialize_profile(std::move(mesh), [x0, y0, w, h, s](const Vec2& p) {
      double phi = -1.0;
      for (int k = -1; k <= 1; ++k) {
        const double u = p.x + k - s * (p.y - y0) / h;  // sheared abscissa
        const double m =
            std::min(std::min(u - x0, x0 + w - u), std::min(p.y - y0, y0 + h - p.y));
        phi = std::max(phi, std::clamp(m / 0.05, -1.0, 1.0));
      }
      return phi;
    });
  }
  if (inclusion == "file") {
    if (phi_file.empty()) throw ConfigError("cell.phi_file required for inclusion=file");
    return load_levelset(std::move(mesh), phi_file);
  }
  throw ConfigError("cell.inclusion must be none|circle|parallelogram|file");
}

}  // namespace metasurf
