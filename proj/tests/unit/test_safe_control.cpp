#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "firefly/safe_control.hpp"

using namespace firefly;

namespace {

Vec3 next_position(const RobotState& s, const Vec3& u, double dt) {
  return s.position + dt * s.velocity + 0.5 * dt * dt * u;
}

// Smallest barrier value over obstacles and pairs, recomputed from scratch.
double min_barrier(const MissionSpec& spec, const std::vector<Vec3>& p) {
  double h = kNoBarrier;
  for (std::size_t k = 0; k < p.size(); ++k) {
    for (const auto& o : spec.obstacles) {
      h = std::min(h, (p[k] - o.center).squaredNorm() - o.radius * o.radius);
    }
    for (std::size_t j = k + 1; j < p.size(); ++j) {
      h = std::min(h, (p[k] - p[j]).squaredNorm() - spec.separation * spec.separation);
    }
  }
  return h;
}

std::vector<Vec3> positions(const std::vector<RobotState>& s) {
  std::vector<Vec3> p;
  for (const auto& x : s) p.push_back(x.position);
  return p;
}

std::vector<Vec3> replay(const MissionSpec& spec, const std::vector<RobotState>& s,
                         const std::vector<RobotInput>& u) {
  std::vector<Vec3> p;
  for (std::size_t k = 0; k < s.size(); ++k) p.push_back(next_position(s[k], u[k].acceleration, spec.dt));
  return p;
}

MissionSpec head_on() {
  MissionSpec spec;
  spec.starts = {Vec3(0, 0, 0), Vec3(1, 0, 0)};
  spec.goals = {Sphere{Vec3(5, 0, 0), 0.5}, Sphere{Vec3(-4, 0, 0), 0.5}};
  spec.horizons = {25, 25};
  spec.separation = 0.3;
  return spec;
}

struct RandomCase {
  MissionSpec spec;
  std::vector<RobotState> states;
  std::vector<RobotInput> fair;
};

// Robots scattered around two obstacles, moving and pushed toward each other.
RandomCase random_case(std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> pos(-3.0, 3.0), vel(-1.0, 1.0), acc(-8.0, 8.0);
  RandomCase c;
  c.spec.obstacles = {Sphere{Vec3(0.5, 0.5, 0), 0.6}, Sphere{Vec3(-1, -1, 0.5), 0.4}};
  c.spec.separation = 0.2;
  while (static_cast<int>(c.states.size()) < n) {
    RobotState s;
    s.position = Vec3(pos(rng), pos(rng), pos(rng));
    s.velocity = Vec3(vel(rng), vel(rng), vel(rng));
    bool ok = true;
    for (const auto& o : c.spec.obstacles) ok = ok && (s.position - o.center).norm() > o.radius + 0.3;
    for (const auto& x : c.states) ok = ok && (s.position - x.position).norm() > c.spec.separation + 0.3;
    if (!ok) continue;
    c.states.push_back(s);
    c.spec.starts.push_back(s.position);
    c.spec.goals.push_back(Sphere{Vec3(pos(rng), pos(rng), pos(rng)), 0.5});
    c.spec.horizons.push_back(25);
    c.fair.push_back(RobotInput{Vec3(acc(rng), acc(rng), acc(rng))});
  }
  return c;
}

}  // namespace

TEST_CASE("barrier values") {
  MissionSpec spec;
  spec.starts = {Vec3(2, 0, 0), Vec3(2, 0.5, 0)};
  spec.goals = {Sphere{Vec3(2, 0, 0), 1.0}, Sphere{Vec3(10, 0, 0), 1.0}};
  spec.obstacles = {Sphere{Vec3(0, 0, 0), 1.0}};
  spec.horizons = {25, 25};
  std::vector<RobotState> s(2);
  s[0].position = Vec3(2, 0, 0);
  s[1].position = Vec3(2, 0.5, 0);
  const BarrierReport r = barriers(spec, s);
  CHECK(r.h_obstacle == doctest::Approx(3.0));
  CHECK(r.obstacle_robot == 0);
  CHECK(r.h_separation == doctest::Approx(0.2499));
  CHECK(r.h == doctest::Approx(0.2499));
  // Robot 0 sits at its goal center; robot 1 is far from its goal.
  CHECK(r.V == doctest::Approx(8.0 * 8.0 + 0.25 - 1.0));
  CHECK(r.clf_robot == 1);
  s[1].position = Vec3(10, 0, 0);
  CHECK(barriers(spec, s).V == doctest::Approx(-1.0));
  s[1].position = Vec3(11, 0, 0);
  CHECK(barriers(spec, s).V == doctest::Approx(0.0));
}

TEST_CASE("rows are exact lower bounds on the next barrier") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> acc(-20.0, 20.0);
  for (int trial = 0; trial < 20; ++trial) {
    RandomCase c = random_case(rng, 3);
    for (CbfFloor floor : {CbfFloor::PerBarrier, CbfFloor::Composite}) {
      const auto rows = cbf_rows(c.spec, c.states, 0.1, floor);
      std::vector<RobotInput> u(3);
      for (auto& x : u) x.acceleration = Vec3(acc(rng), acc(rng), acc(rng));
      const auto p = replay(c.spec, c.states, u);
      const double h_now = barriers(c.spec, c.states).h;
      for (const CbfRow& row : rows) {
        double h_next, h_cur;
        if (row.second < 0) {
          const auto& o = c.spec.obstacles[row.obstacle];
          h_next = (p[row.first] - o.center).squaredNorm() - o.radius * o.radius;
          h_cur = (c.states[row.first].position - o.center).squaredNorm() - o.radius * o.radius;
        } else {
          const double d2 = c.spec.separation * c.spec.separation;
          h_next = (p[row.first] - p[row.second]).squaredNorm() - d2;
          h_cur = (c.states[row.first].position - c.states[row.second].position).squaredNorm() - d2;
        }
        const double floor_value = 0.9 * (floor == CbfFloor::Composite ? h_now : h_cur);
        // margin >= 0 must imply the decay condition.
        CHECK(h_next - floor_value >= row.margin(u) - 1e-9);
      }
    }
  }
}

TEST_CASE("central filter") {
  SUBCASE("safe fair inputs pass through") {
    MissionSpec spec;
    spec.starts = {Vec3(0, 0, 0), Vec3(0, 5, 0)};
    spec.goals = {Sphere{Vec3(3, 0, 0), 0.5}, Sphere{Vec3(3, 5, 0), 0.5}};
    spec.horizons = {25, 25};
    std::vector<RobotState> s(2);
    s[0].position = spec.starts[0];
    s[1].position = spec.starts[1];
    const std::vector<RobotInput> fair = {RobotInput{Vec3(1, 0, 0)}, RobotInput{Vec3(1, 0, 0)}};
    const SafeStep out = central_safe_step(spec, s, fair, central_safety_config());
    CHECK((out.inputs[0].acceleration - fair[0].acceleration).norm() < 1e-5);
    CHECK((out.inputs[1].acceleration - fair[1].acceleration).norm() < 1e-5);
    CHECK(out.max_delta() < 1e-5);
    CHECK(out.rounds == 1);
  }
  SUBCASE("head-on robots deflect and stay separated") {
    const MissionSpec spec = head_on();
    std::vector<RobotState> s(2);
    s[0].position = spec.starts[0];
    s[0].velocity = Vec3(1.5, 0, 0);
    s[1].position = spec.starts[1];
    s[1].velocity = Vec3(-1.5, 0, 0);
    const std::vector<RobotInput> fair = {RobotInput{Vec3(5, 0, 0)}, RobotInput{Vec3(-5, 0, 0)}};
    const SafeStep out = central_safe_step(spec, s, fair, central_safety_config());
    const auto p = replay(spec, s, out.inputs);
    CHECK(min_barrier(spec, p) >= 0.85 * min_barrier(spec, positions(s)) - 1e-6);
    // The steered reference has a sideways component, opposite for the two robots.
    CHECK(std::abs(out.reference[0].acceleration.y()) > 1e-3);
    CHECK(out.reference[0].acceleration.y() * out.reference[1].acceleration.y() < 0.0);
  }
  SUBCASE("soundness on random states") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 25; ++trial) {
      RandomCase c = random_case(rng, 4);
      for (bool per_barrier : {false, true}) {
        SafetyConfig cfg = central_safety_config();
        cfg.per_barrier = per_barrier;
        const SafeStep out = central_safe_step(c.spec, c.states, c.fair, cfg);
        const auto p = replay(c.spec, c.states, out.inputs);
        CHECK(min_barrier(c.spec, p) >= (1.0 - cfg.alpha) * min_barrier(c.spec, positions(c.states)) - 1e-6);
        for (const auto& u : out.inputs) CHECK(u.acceleration.cwiseAbs().maxCoeff() <= 100.0 + 1e-9);
      }
    }
  }
  SUBCASE("goal progress without slack") {
    MissionSpec spec;
    spec.starts = {Vec3(0, 0, 0), Vec3(0, 5, 0)};
    spec.goals = {Sphere{Vec3(4, 0, 0), 0.5}, Sphere{Vec3(4, 5, 0), 0.5}};
    spec.horizons = {25, 25};
    std::vector<RobotState> s(2);
    s[0].position = spec.starts[0];
    s[1].position = spec.starts[1];
    // Zero fair input makes no progress; the CLF row must pull toward the goal.
    const std::vector<RobotInput> fair(2);
    const SafetyConfig cfg = central_safety_config();
    const SafeStep out = central_safe_step(spec, s, fair, cfg);
    const auto p = replay(spec, s, out.inputs);
    for (int k = 0; k < 2; ++k) {
      const double r2 = spec.goals[k].radius * spec.goals[k].radius;
      const double v_now = (s[k].position - spec.goals[k].center).squaredNorm() - r2;
      const double v_next = (p[k] - spec.goals[k].center).squaredNorm() - r2;
      CHECK(v_next <= v_now + spec.dt * (-cfg.lambda * v_now) + out.max_delta() + 1e-3);
    }
  }
  SUBCASE("mismatched sizes are rejected") {
    const MissionSpec spec = head_on();
    std::vector<RobotState> s(2);
    CHECK_THROWS_AS(central_safe_step(spec, s, std::vector<RobotInput>(1), central_safety_config()),
                    std::invalid_argument);
  }
}

TEST_CASE("distributed filter") {
  SUBCASE("zero rounds return the fair inputs with a warning") {
    const MissionSpec spec = head_on();
    std::vector<RobotState> s(2);
    s[0].position = spec.starts[0];
    s[1].position = spec.starts[1];
    const std::vector<RobotInput> fair = {RobotInput{Vec3(50, 0, 0)}, RobotInput{Vec3(-50, 0, 0)}};
    SafetyConfig cfg = distributed_safety_config();
    cfg.dist_rounds = 0;
    const SafeStep out = distributed_safe_step(spec, s, fair, cfg);
    CHECK(out.warning);
    CHECK(out.inputs == fair);
  }
  SUBCASE("no interaction converges in one round") {
    MissionSpec spec;
    spec.starts = {Vec3(0, 0, 0), Vec3(0, 5, 0)};
    spec.goals = {Sphere{Vec3(3, 0, 0), 0.5}, Sphere{Vec3(3, 5, 0), 0.5}};
    spec.horizons = {25, 25};
    std::vector<RobotState> s(2);
    s[0].position = spec.starts[0];
    s[1].position = spec.starts[1];
    const std::vector<RobotInput> fair = {RobotInput{Vec3(3, 0, 0)}, RobotInput{Vec3(3, 0, 0)}};
    const SafeStep out = distributed_safe_step(spec, s, fair, distributed_safety_config());
    CHECK(out.rounds == 1);
    CHECK_FALSE(out.warning);
    CHECK((out.inputs[0].acceleration - fair[0].acceleration).norm() < 1e-5);
  }
  SUBCASE("symmetric head-on gets symmetric corrections") {
    const MissionSpec spec = head_on();
    std::vector<RobotState> s(2);
    s[0].position = spec.starts[0];
    s[0].velocity = Vec3(1.5, 0, 0);
    s[1].position = spec.starts[1];
    s[1].velocity = Vec3(-1.5, 0, 0);
    const std::vector<RobotInput> fair = {RobotInput{Vec3(5, 0, 0)}, RobotInput{Vec3(-5, 0, 0)}};
    SafetyConfig cfg = distributed_safety_config();
    cfg.steer = 0.0;
    const SafeStep out = distributed_safe_step(spec, s, fair, cfg);
    const Vec3 c0 = out.inputs[0].acceleration - fair[0].acceleration;
    const Vec3 c1 = out.inputs[1].acceleration - fair[1].acceleration;
    CHECK(c0.norm() > 1e-3);
    CHECK((c0 + c1).norm() < 1e-4);
    const auto p = replay(spec, s, out.inputs);
    CHECK(min_barrier(spec, p) >= 0.9 * min_barrier(spec, positions(s)) - 1e-6);
  }
  SUBCASE("soundness on random states") {
    std::mt19937_64 rng(9);
    for (int trial = 0; trial < 25; ++trial) {
      RandomCase c = random_case(rng, 4);
      for (int threads : {1, 3}) {
        SafetyConfig cfg = distributed_safety_config();
        cfg.threads = threads;
        const SafeStep out = distributed_safe_step(c.spec, c.states, c.fair, cfg);
        const auto p = replay(c.spec, c.states, out.inputs);
        CHECK(min_barrier(c.spec, p) >= (1.0 - cfg.alpha) * min_barrier(c.spec, positions(c.states)) - 1e-6);
        CHECK(out.rounds >= 1);
        CHECK(out.rounds <= cfg.dist_rounds);
      }
    }
  }
}

TEST_CASE("safety configuration") {
  CHECK(central_safety_config().alpha == 0.15);
  CHECK(central_safety_config().lambda == 0.025);
  CHECK(distributed_safety_config().alpha == 0.1);
  CHECK(distributed_safety_config().lambda == 0.1);
  CHECK(safety_mode_from_string("central") == SafetyMode::Central);
  CHECK(safety_mode_from_string("distributed") == SafetyMode::Distributed);
  CHECK_THROWS(safety_mode_from_string("other"));
  SafetyConfig bad;
  bad.alpha = 0.0;
  CHECK_THROWS(bad.validate());
  bad = SafetyConfig{};
  bad.responsibility = 1.0;
  CHECK_THROWS(bad.validate());
}
