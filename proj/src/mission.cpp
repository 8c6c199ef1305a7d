#include "firefly/mission.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include <json.hpp>

namespace firefly {

using nlohmann::json;

namespace {

bool finite3(const Vec3& v) { return v.allFinite(); }

std::string robot_tag(int k) { return "robots[" + std::to_string(k) + "]"; }

}  // namespace

int MissionSpec::max_horizon() const {
  int h = 0;
  for (int hk : horizons) h = std::max(h, hk);
  return h;
}

void validate(const MissionSpec& spec, int min_robots) {
  const int n = spec.robot_count();
  if (n < min_robots) {
    throw MissionError("mission needs at least " + std::to_string(min_robots) + " robots, got " +
                       std::to_string(n));
  }
  if (static_cast<int>(spec.goals.size()) != n || static_cast<int>(spec.horizons.size()) != n) {
    throw MissionError("starts, goals and horizons must have one entry per robot");
  }
  if (!(spec.dt > 0.0) || !std::isfinite(spec.dt)) throw MissionError("dt must be positive");
  if (!(spec.separation > 0.0) || !std::isfinite(spec.separation)) {
    throw MissionError("d_s must be positive");
  }
  if (!(spec.u_max > 0.0) || !std::isfinite(spec.u_max) || spec.u_min != -spec.u_max) {
    throw MissionError("u_box must be a symmetric interval [-a, a] with a > 0");
  }
  for (int k = 0; k < n; ++k) {
    if (!finite3(spec.starts[k])) throw MissionError(robot_tag(k) + ".start must be finite");
    if (!finite3(spec.goals[k].center) || !(spec.goals[k].radius > 0.0) ||
        !std::isfinite(spec.goals[k].radius)) {
      throw MissionError(robot_tag(k) + ".goal: radius must be positive");
    }
    if (spec.horizons[k] < 1) throw MissionError(robot_tag(k) + ".horizon must be >= 1");
  }
  for (std::size_t o = 0; o < spec.obstacles.size(); ++o) {
    const auto& ob = spec.obstacles[o];
    if (!finite3(ob.center) || !(ob.radius > 0.0) || !std::isfinite(ob.radius)) {
      throw MissionError("obstacles[" + std::to_string(o) + "]: radius must be positive");
    }
    for (int k = 0; k < n; ++k) {
      if ((spec.starts[k] - ob.center).norm() <= ob.radius) {
        throw MissionError(robot_tag(k) + ".start lies inside obstacles[" + std::to_string(o) +
                           "]");
      }
    }
  }
  for (int k = 0; k < n; ++k) {
    for (int j = k + 1; j < n; ++j) {
      if ((spec.starts[k] - spec.starts[j]).norm() <= spec.separation) {
        throw MissionError("starts of robots " + std::to_string(k) + " and " + std::to_string(j) +
                           " are closer than d_s");
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Random numbers

double ScenarioRng::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double ScenarioRng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

int ScenarioRng::uniform_int(int lo, int hi) {
  const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
  return lo + static_cast<int>(engine_() % span);
}

Vec3 ScenarioRng::unit_vector() {
  // Archimedes: uniform z and azimuth give a uniform point on the sphere.
  const double z = uniform(-1.0, 1.0);
  const double phi = uniform(0.0, 2.0 * std::numbers::pi);
  const double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
  return Vec3(rho * std::cos(phi), rho * std::sin(phi), z);
}

// ---------------------------------------------------------------------------
// Generators

namespace {

MissionSpec base_spec(const GeneratorConfig& cfg) {
  MissionSpec spec;
  spec.separation = cfg.separation;
  spec.u_min = -cfg.u_max;
  spec.u_max = cfg.u_max;
  spec.dt = cfg.dt;
  return spec;
}

Vec3 workspace_center(const GeneratorConfig& cfg) {
  const double c = 0.5 * (cfg.workspace_min + cfg.workspace_max);
  return Vec3(c, c, c);
}

}  // namespace

MissionSpec generate_experiment1(const ScenarioSeed& seed, const GeneratorConfig& cfg) {
  if (seed.n_robots < 2) throw MissionError("experiment 1 needs at least 2 robots");
  if (seed.n_obstacles < 0) throw MissionError("obstacle count must be non-negative");
  ScenarioRng rng(seed.rng_seed);
  MissionSpec spec = base_spec(cfg);
  const Vec3 goal = workspace_center(cfg);
  for (int k = 0; k < seed.n_robots; ++k) {
    const double theta = 2.0 * std::numbers::pi * k / seed.n_robots;
    spec.starts.push_back(goal + cfg.start_circle_radius *
                                     Vec3(std::cos(theta), std::sin(theta), 0.0));
    spec.goals.push_back(Sphere{goal, cfg.shared_goal_radius});
    spec.horizons.push_back(cfg.horizon);
  }
  for (int o = 0; o < seed.n_obstacles; ++o) {
    bool placed = false;
    for (int draw = 0; draw < cfg.max_draws && !placed; ++draw) {
      const int k = rng.uniform_int(0, seed.n_robots - 1);
      const double s = rng.uniform();
      const double r = rng.uniform(cfg.obstacle_radius_min, cfg.obstacle_radius_max);
      if (s <= 0.0) continue;  // open segment
      const Vec3 c = spec.starts[k] + s * (goal - spec.starts[k]);
      bool ok = (c - goal).norm() > r + cfg.shared_goal_radius + cfg.goal_clearance;
      for (const auto& p : spec.starts) ok = ok && (c - p).norm() > r + cfg.start_clearance;
      if (ok) {
        spec.obstacles.push_back(Sphere{c, r});
        placed = true;
      }
    }
    if (!placed) {
      throw MissionError("scenario generation failed: no admissible obstacle after " +
                         std::to_string(cfg.max_draws) + " draws");
    }
  }
  validate(spec);
  return spec;
}

MissionSpec generate_experiment2(const ScenarioSeed& seed, const GeneratorConfig& cfg) {
  if (seed.n_robots < 2) throw MissionError("experiment 2 needs at least 2 robots");
  ScenarioRng rng(seed.rng_seed);
  MissionSpec spec = base_spec(cfg);
  const Vec3 center = workspace_center(cfg);
  spec.obstacles.push_back(Sphere{center, cfg.central_obstacle_radius});
  const double spacing = std::max(cfg.min_start_spacing, cfg.separation);
  for (int k = 0; k < seed.n_robots; ++k) {
    bool placed = false;
    for (int draw = 0; draw < cfg.max_draws && !placed; ++draw) {
      const Vec3 start = center + cfg.shell_radius * rng.unit_vector();
      const Vec3 goal = center + cfg.shell_radius * rng.unit_vector();
      bool ok = (start - goal).norm() > cfg.goal_radius;
      for (const auto& p : spec.starts) ok = ok && (start - p).norm() > spacing;
      if (ok) {
        spec.starts.push_back(start);
        spec.goals.push_back(Sphere{goal, cfg.goal_radius});
        spec.horizons.push_back(cfg.horizon);
        placed = true;
      }
    }
    if (!placed) {
      throw MissionError("scenario generation failed: no admissible start/goal after " +
                         std::to_string(cfg.max_draws) + " draws");
    }
  }
  validate(spec);
  return spec;
}

MissionSpec generate(const ScenarioSeed& seed, const GeneratorConfig& cfg) {
  return seed.kind == ExperimentKind::ObstacleSweep ? generate_experiment1(seed, cfg)
                                                    : generate_experiment2(seed, cfg);
}

// ---------------------------------------------------------------------------
// Scenario files

namespace {

json vec_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

json sphere_json(const Sphere& s) {
  return json{{"center", vec_json(s.center)}, {"radius", s.radius}};
}

const json& field(const json& obj, const char* key, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key)) {
    throw MissionError("scenario parse error: missing field '" + where + key + "'");
  }
  return obj.at(key);
}

double number(const json& obj, const char* key, const std::string& where) {
  const json& v = field(obj, key, where);
  if (!v.is_number()) {
    throw MissionError("scenario parse error: field '" + where + key + "' must be a number");
  }
  return v.get<double>();
}

Vec3 vec3(const json& obj, const char* key, const std::string& where) {
  const json& v = field(obj, key, where);
  if (!v.is_array() || v.size() != 3 || !v[0].is_number() || !v[1].is_number() ||
      !v[2].is_number()) {
    throw MissionError("scenario parse error: field '" + where + key +
                       "' must be an array of 3 numbers");
  }
  return Vec3(v[0].get<double>(), v[1].get<double>(), v[2].get<double>());
}

Sphere sphere(const json& obj, const std::string& where) {
  Sphere s{vec3(obj, "center", where), number(obj, "radius", where)};
  if (!(s.radius > 0.0)) {
    throw MissionError("scenario parse error: field '" + where + "radius': radius must be positive");
  }
  return s;
}

}  // namespace

std::string to_scenario_text(const MissionSpec& spec) {
  json robots = json::array();
  for (int k = 0; k < spec.robot_count(); ++k) {
    robots.push_back(json{{"start", vec_json(spec.starts[k])},
                          {"goal", sphere_json(spec.goals[k])},
                          {"horizon", spec.horizons[k]}});
  }
  json obstacles = json::array();
  for (const auto& o : spec.obstacles) obstacles.push_back(sphere_json(o));
  json doc = {{"version", kScenarioVersion},
              {"dt", spec.dt},
              {"d_s", spec.separation},
              {"u_box", {{"min", spec.u_min}, {"max", spec.u_max}}},
              {"robots", robots},
              {"obstacles", obstacles}};
  return doc.dump(2) + "\n";
}

MissionSpec from_scenario_text(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw MissionError(std::string("scenario parse error: ") + e.what());
  }
  const json& version = field(doc, "version", "");
  if (!version.is_string() || version.get<std::string>() != kScenarioVersion) {
    throw MissionError(std::string("scenario parse error: field 'version' must be \"") +
                       kScenarioVersion + "\"");
  }
  MissionSpec spec;
  spec.dt = number(doc, "dt", "");
  spec.separation = number(doc, "d_s", "");
  const json& box = field(doc, "u_box", "");
  spec.u_min = number(box, "min", "u_box.");
  spec.u_max = number(box, "max", "u_box.");
  const json& robots = field(doc, "robots", "");
  if (!robots.is_array()) throw MissionError("scenario parse error: field 'robots' must be a list");
  for (std::size_t k = 0; k < robots.size(); ++k) {
    const std::string where = "robots[" + std::to_string(k) + "].";
    spec.starts.push_back(vec3(robots[k], "start", where));
    spec.goals.push_back(sphere(field(robots[k], "goal", where), where + "goal."));
    const json& h = field(robots[k], "horizon", where);
    if (!h.is_number_integer()) {
      throw MissionError("scenario parse error: field '" + where + "horizon' must be an integer");
    }
    spec.horizons.push_back(h.get<int>());
  }
  const json& obstacles = field(doc, "obstacles", "");
  if (!obstacles.is_array()) {
    throw MissionError("scenario parse error: field 'obstacles' must be a list");
  }
  for (std::size_t o = 0; o < obstacles.size(); ++o) {
    spec.obstacles.push_back(sphere(obstacles[o], "obstacles[" + std::to_string(o) + "]."));
  }
  try {
    validate(spec, 1);
  } catch (const MissionError& e) {
    throw MissionError(std::string("scenario parse error: ") + e.what());
  }
  return spec;
}

void save(const MissionSpec& spec, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open scenario file for writing: " + path.string());
  out << to_scenario_text(spec);
  if (!out) throw IoError("failed writing scenario file: " + path.string());
}

MissionSpec load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open scenario file: " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return from_scenario_text(buf.str());
}

}  // namespace firefly
