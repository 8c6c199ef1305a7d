#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "firefly/fair_planner.hpp"

using namespace firefly;

namespace {

MissionSpec two_robot_mission(const Vec3& goal_a, const Vec3& goal_b, double radius = 0.5) {
  MissionSpec spec;
  spec.starts = {Vec3(0, 0, 0), Vec3(0, 3, 0)};
  spec.goals = {Sphere{goal_a, radius}, Sphere{goal_b, radius}};
  spec.horizons = {25, 25};
  return spec;
}

// Position gain of u[t] on p[H] for the double integrator, written out
// independently of DynamicsModel.
double gain(double dt, int horizon, int t) { return dt * dt * (0.5 + (horizon - 1 - t)); }

}  // namespace

TEST_CASE("minimum energy inputs match the closed form") {
  // Straight-line rest-to-ball: u[t] = d * c_t / sum c^2 along the goal
  // direction, with d the distance to the ball surface.
  const MissionSpec spec = two_robot_mission(Vec3(4, 0, 0), Vec3(0, 3, 5), 0.5);
  for (int k = 0; k < 2; ++k) {
    const Vec3 dir = (spec.goals[k].center - spec.starts[k]).normalized();
    const double d = (spec.goals[k].center - spec.starts[k]).norm() - spec.goals[k].radius;
    double sum = 0.0;
    for (int t = 0; t < 25; ++t) sum += std::pow(gain(spec.dt, 25, t), 2);
    const Eigen::VectorXd u = min_energy_inputs(spec, k);
    REQUIRE(u.size() == 75);
    for (int t = 0; t < 25; ++t) {
      const Vec3 expected = d * gain(spec.dt, 25, t) / sum * dir;
      CHECK((u.segment<3>(3 * t) - expected).norm() < 1e-5);
    }
    CHECK((terminal_position(spec, k, u) - spec.goals[k].center).norm() ==
          doctest::Approx(spec.goals[k].radius).epsilon(1e-5));
  }
}

TEST_CASE("degenerate and infeasible missions") {
  SUBCASE("start inside the goal needs no input") {
    MissionSpec spec = two_robot_mission(Vec3(0, 0, 0), Vec3(0, 6, 0));
    CHECK(min_energy_inputs(spec, 0).isZero());
    CHECK_THROWS_AS(solo_baseline(spec), FairnessError);
  }
  SUBCASE("goal beyond the input box") {
    MissionSpec spec = two_robot_mission(Vec3(30, 0, 0), Vec3(0, 6, 0));
    spec.u_min = -0.5;
    spec.u_max = 0.5;
    // Max reach at 0.5 per axis: 0.5 * 25^2 * 0.04 / 2 = 6.25 per axis.
    CHECK_THROWS_AS(min_energy_inputs(spec, 0), MissionInfeasible);
    CHECK_THROWS_AS(initial_plan(spec), MissionInfeasible);
  }
}

TEST_CASE("local descent program") {
  MissionSpec spec = two_robot_mission(Vec3(3, 0, 0), Vec3(0, 6, 0), 2.0);
  TeamPlan plan = initial_plan(spec);
  // Push the terminal point of robot 0 well inside its goal so small steps stay feasible.
  spec.goals[0].radius = 3.0;
  PlannerConfig cfg;
  SUBCASE("zero gradient gives zero step") {
    const Eigen::VectorXd g = Eigen::VectorXd::Zero(75);
    const SolveResult r = solve(local_problem(0, plan, g, cfg, spec));
    REQUIRE(r.status == SolveStatus::Optimal);
    CHECK(r.x.norm() < 1e-6);
  }
  SUBCASE("interior optimum is -g / 2 kappa") {
    Eigen::VectorXd g = Eigen::VectorXd::LinSpaced(75, -1e-3, 1e-3);
    cfg.kappa = 2.0;
    const SolveResult r = solve(local_problem(0, plan, g, cfg, spec));
    REQUIRE(r.status == SolveStatus::Optimal);
    CHECK((r.x + g / (2.0 * cfg.kappa)).norm() < 1e-6);
  }
  SUBCASE("executed prefix is excluded") {
    plan.prefix_len = 10;
    const ConvexProgram p = local_problem(0, plan, Eigen::VectorXd::Zero(75), cfg, spec);
    CHECK(p.n_vars() == 45);
  }
}

TEST_CASE("step size schedule") {
  PlannerConfig cfg;
  cfg.max_iters = 10;
  CHECK(cfg.gamma(1) == doctest::Approx(cfg.gamma_start));
  CHECK(cfg.gamma(10) == doctest::Approx(cfg.gamma_end));
  CHECK(cfg.gamma(50) == doctest::Approx(cfg.gamma_end));
  for (int r = 1; r < 12; ++r) {
    CHECK(cfg.gamma(r + 1) <= cfg.gamma(r));
    CHECK(cfg.gamma(r) > 0.0);
  }
  cfg.gamma_end = 2.0;
  CHECK_THROWS(cfg.validate());
}

TEST_CASE("fair planning") {
  ScenarioSeed seed;
  seed.kind = ExperimentKind::TeamSweep;
  seed.n_robots = 4;
  for (std::uint64_t s = 1; s <= 4; ++s) {
    seed.rng_seed = s;
    const MissionSpec spec = generate(seed);
    const TeamPlan init = initial_plan(spec);
    const SoloBaseline solo = solo_baseline(spec);
    for (FairnessKind kind : {FairnessKind::F1, FairnessKind::F2, FairnessKind::F3, FairnessKind::F4}) {
      CAPTURE(s);
      CAPTURE(to_string(kind));
      FairnessNotion notion;
      notion.kind = kind;
      PlanStats st;
      const TeamPlan out = plan_fair(spec, notion, solo, init, default_planner_config(kind), &st);
      CHECK(st.f_final <= st.f_initial + 1e-9);
      CHECK(st.iterations <= 1000);
      CHECK(evaluate(notion, out, solo) == doctest::Approx(st.f_final));
      for (int k = 0; k < spec.robot_count(); ++k) CHECK(plan_feasible(spec, out, k, 1e-5));
    }
  }
}

TEST_CASE("fair planning edge cases") {
  const MissionSpec spec = two_robot_mission(Vec3(4, 0, 0), Vec3(0, 6, 0), 0.5);
  const TeamPlan init = initial_plan(spec);
  const SoloBaseline solo = solo_baseline(spec);
  FairnessNotion notion;

  SUBCASE("zero iterations leave the plan unchanged") {
    PlannerConfig cfg;
    cfg.max_iters = 0;
    CHECK(plan_fair(spec, notion, solo, init, cfg).distance(init) == 0.0);
  }
  SUBCASE("mirror-symmetric robots stay mirrored") {
    // Robots 0 and 2 mirror each other across x = 0; robot 1 sits on the
    // mirror plane and spends more, so the outer pair must move.
    MissionSpec mirror;
    mirror.starts = {Vec3(-1, 0, 0), Vec3(0, 1, 0), Vec3(1, 0, 0)};
    mirror.goals = {Sphere{Vec3(-3, 4, 0), 0.5}, Sphere{Vec3(0, 5, 1), 0.5},
                    Sphere{Vec3(3, 4, 0), 0.5}};
    mirror.horizons = {25, 25, 25};
    TeamPlan start = initial_plan(mirror);
    start.inputs[1] *= 2.0;
    const TeamPlan out = plan_fair(mirror, notion, solo_baseline(mirror), start, PlannerConfig{});
    CHECK(out.distance(start) > 1e-3);
    for (int t = 0; t < 25; ++t) {
      const Vec3 a = out.input(0, t);
      const Vec3 b = out.input(2, t);
      CHECK(a.x() == doctest::Approx(-b.x()).epsilon(1e-6));
      CHECK(a.y() == doctest::Approx(b.y()).epsilon(1e-6));
      CHECK(a.z() == doctest::Approx(b.z()).epsilon(1e-6));
    }
  }
  SUBCASE("frozen robots keep their inputs") {
    TeamPlan start = init;
    start.inputs[1] *= 3.0;  // unequal energies, so robot 0 wants to move
    const std::vector<char> frozen = {0, 1};
    const TeamPlan out = plan_fair(spec, notion, solo, start, PlannerConfig{}, nullptr, nullptr, frozen);
    CHECK(out.inputs[1] == start.inputs[1]);
    CHECK(out.inputs[0] != start.inputs[0]);
  }
  SUBCASE("trace has one line per iteration") {
    TeamPlan start = init;
    start.inputs[1] *= 3.0;
    std::ostringstream trace;
    PlanStats st;
    plan_fair(spec, notion, solo, start, PlannerConfig{}, &st, &trace);
    const std::string text = trace.str();
    CHECK(std::count(text.begin(), text.end(), '\n') == st.iterations + 1);
  }
}

TEST_CASE("plan repair") {
  const MissionSpec spec = two_robot_mission(Vec3(4, 0, 0), Vec3(0, 6, 0), 0.5);
  const TeamPlan init = initial_plan(spec);
  SUBCASE("feasible plans are untouched") {
    CHECK(repair_plan(spec, init).distance(init) == 0.0);
  }
  SUBCASE("an infeasible suffix is made feasible") {
    TeamPlan bad = init;
    bad.prefix_len = 5;
    for (int t = 5; t < 25; ++t) bad.set_input(0, t, Vec3::Zero());
    REQUIRE_FALSE(plan_feasible(spec, bad, 0));
    const TeamPlan fixed = repair_plan(spec, bad);
    CHECK(plan_feasible(spec, fixed, 0, 1e-6));
    for (int t = 0; t < 5; ++t) CHECK(fixed.input(0, t) == bad.input(0, t));
    CHECK(fixed.inputs[1] == bad.inputs[1]);
    const std::vector<char> frozen = {1, 0};
    CHECK(repair_plan(spec, bad, {}, frozen).inputs[0] == bad.inputs[0]);
  }
  SUBCASE("unreachable remainder throws") {
    TeamPlan bad = init;
    bad.prefix_len = 24;
    for (int t = 0; t < 25; ++t) bad.set_input(0, t, Vec3::Zero());
    MissionSpec tight = spec;
    tight.u_min = -1.0;
    tight.u_max = 1.0;
    CHECK_THROWS_AS(repair_plan(tight, bad), MissionInfeasible);
  }
}
