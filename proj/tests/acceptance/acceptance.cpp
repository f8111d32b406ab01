// Acceptance suite: one PASS/FAIL line per criterion.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <iostream>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "imbal/agents.hpp"
#include "imbal/battery_env.hpp"
#include "imbal/eval.hpp"
#include "imbal/market_data.hpp"
#include "imbal/policy_correction.hpp"
#include "oracles.hpp"

using namespace imbal;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

Probs random_probs(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Probs p{u(rng), u(rng), u(rng)};
  const double s = p[0] + p[1] + p[2];
  for (auto& x : p) x /= s;
  return p;
}

double rel_error(const std::vector<double>& a, const std::vector<double>& b) {
  double d = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    d += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return std::sqrt(d) / std::max({std::sqrt(na), std::sqrt(nb), 1e-12});
}

// Smallest |pre-activation| of any hidden unit over a batch.
double min_hidden_margin(const FeedForwardNet& net, const Eigen::MatrixXd& x) {
  Eigen::MatrixXd a = x;
  double m = std::numeric_limits<double>::infinity();
  const auto& layers = net.layers();
  for (std::size_t l = 0; l + 1 < layers.size(); ++l) {
    Eigen::MatrixXd z = (layers[l].weights * a).colwise() + layers[l].biases;
    m = std::min(m, z.cwiseAbs().minCoeff());
    a = z.cwiseMax(0.0);
  }
  return m;
}

// ---------------------------------------------------------------- 1

Outcome soc_dynamics() {
  const BatteryParams p;
  const double eta = std::sqrt(0.9), dt = 2.0 / 60.0;
  struct Case {
    double soc;
    Action a;
    double expected;
  };
  const std::vector<Case> table{
      {0.5, Action::kCharge, 0.5 + 4.0 * eta * dt / 8.0},
      {0.5, Action::kIdle, 0.5},
      {0.5, Action::kDischarge, 0.5 + (-4.0 / eta) * dt / 8.0},
      {0.995, Action::kCharge, std::min(1.0, 0.995 + 4.0 * eta * dt / 8.0)},
      {0.11, Action::kDischarge, std::max(0.10, 0.11 - 4.0 / eta * dt / 8.0)},
  };
  double worst = 0.0;
  for (const Case& c : table) worst = std::max(worst, std::abs(soc_transition(c.soc, c.a, p) - c.expected));

  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> u(p.soc_min + 0.05, p.soc_max - 0.05);
  double worst_rt = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const double s = u(rng);
    const double up = soc_transition(s, Action::kCharge, p);
    const double down = up - soc_transition(up, Action::kDischarge, p);
    // Grid energy in per step is fixed; stored energy over energy drawn per step is the round trip.
    const double loss = 1.0 - (up - s) / down;
    worst_rt = std::max(worst_rt, std::abs(loss - (1.0 - p.eta_charge * p.eta_discharge)));
  }
  return {worst <= 1e-12 && worst_rt <= 1e-12,
          fmt("table max err %.2e, round-trip max err %.2e", worst, worst_rt)};
}

// ---------------------------------------------------------------- 2

Outcome categorical_oracle() {
  std::mt19937_64 rng(202);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> n_atoms(2, 7);
  const std::array<double, 3> gammas{0.0, 0.5, 0.999};
  double worst = 0.0, worst_mass = 0.0;
  for (int t = 0; t < 500; ++t) {
    const double lo = -10.0 + 9.0 * u(rng);
    const AtomGrid g{n_atoms(rng), lo, lo + 0.5 + 15.0 * u(rng)};
    std::vector<double> p(g.count);
    double s = 0.0;
    for (auto& x : p) s += (x = u(rng));
    for (auto& x : p) x /= s;
    const double r = -20.0 + 40.0 * u(rng);
    const double gamma = gammas[static_cast<std::size_t>(t % 3)];
    const auto a = categorical_projection(p, r, gamma, g);
    const auto b = oracle::kernel_projection(p, r, gamma, g);
    double mass = 0.0;
    for (std::size_t i = 0; i < g.count; ++i) {
      worst = std::max(worst, std::abs(a[i] - b[i]));
      mass += a[i];
    }
    worst_mass = std::max(worst_mass, std::abs(mass - 1.0));
  }
  return {worst <= 1e-12 && worst_mass <= 1e-12, fmt("max err %.2e, max mass err %.2e", worst, worst_mass)};
}

// ---------------------------------------------------------------- 3

std::vector<Transition> random_transitions(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> nd;
  std::vector<Transition> ts;
  for (std::size_t i = 0; i < n; ++i) {
    Transition t;
    t.state = {static_cast<int>(u(rng) * 15), static_cast<int>(u(rng) * 96), 1 + static_cast<int>(u(rng) * 12),
               0.1 + 0.9 * u(rng), 80.0 + 60.0 * nd(rng)};
    t.next_state = t.state;
    t.next_state.indicative_price += 10.0 * nd(rng);
    t.action = action_from_index(static_cast<std::size_t>(u(rng) * 3));
    t.reward = nd(rng);
    t.done = u(rng) < 0.2;
    ts.push_back(t);
  }
  return ts;
}

template <typename Loss>
double fd_error(FeedForwardNet& net, const std::vector<double>& analytic, Loss loss) {
  std::vector<double> fd(analytic.size());
  const double h = 1e-6;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double saved = net.parameter(i);
    net.parameter(i) = saved + h;
    const double fp = loss();
    net.parameter(i) = saved - h;
    const double fm = loss();
    net.parameter(i) = saved;
    fd[i] = (fp - fm) / (2 * h);
  }
  return rel_error(analytic, fd);
}

Outcome gradient_checks() {
  std::mt19937_64 rng(303);
  const NormStats norm{80.0, 60.0};
  const int points = 50;
  std::array<double, 3> worst{};
  std::array<int, 3> skipped{};

  for (int kind = 0; kind < 2; ++kind) {
    const AgentKind k = kind == 0 ? AgentKind::kDqn : AgentKind::kDdqn;
    const AtomGrid atoms{7, -4.0, 4.0};
    for (int done = 0; done < points;) {
      auto nets = make_agent_nets(k, {12, 8}, atoms, rng());
      nets.target = make_agent_nets(k, {12, 8}, atoms, rng()).online;
      const auto batch = make_batch(random_transitions(rng, 16), norm);
      if (min_hidden_margin(nets.online, batch.states) < 1e-4) {
        ++skipped[kind];
        continue;
      }
      const double gamma = 0.9;
      const auto loss = [&] {
        return k == AgentKind::kDqn ? dqn_loss(batch, nets, gamma).loss : ddqn_loss(batch, nets, gamma).loss;
      };
      const auto g = flatten(k == AgentKind::kDqn ? dqn_loss(batch, nets, gamma).grads
                                                   : ddqn_loss(batch, nets, gamma).grads);
      worst[kind] = std::max(worst[kind], fd_error(nets.online, g, loss));
      ++done;
    }
  }

  std::uniform_real_distribution<double> u(0.0, 1.0);
  ConstraintConfig cfg;
  cfg.omega = 0.5;
  for (int done = 0; done < points;) {
    auto net = FeedForwardNet::initialized({5, 12, 8, 3}, rng());
    std::vector<EnvState> s;
    std::vector<Probs> teacher;
    for (int i = 0; i < 24; ++i) {
      s.push_back({0, 40, 1, 0.1 + 0.9 * u(rng), -900.0 + 2800.0 * u(rng)});
      teacher.push_back(random_probs(rng));
    }
    const NormStats dn{100.0, 300.0};
    Eigen::MatrixXd x(5, static_cast<Eigen::Index>(s.size()));
    for (std::size_t i = 0; i < s.size(); ++i) {
      const Features f = encode_state(s[i], dn);
      for (Eigen::Index r = 0; r < 5; ++r) x(r, static_cast<Eigen::Index>(i)) = f[static_cast<std::size_t>(r)];
    }
    const DistillStep step = distill_gradient(net, s, dn, teacher, cfg);
    if (step.degenerate > 0 || min_hidden_margin(net, x) < 1e-4) {
      ++skipped[2];
      continue;
    }
    std::vector<Probs> pre;
    const Eigen::MatrixXd y = net.forward_batch(x);
    for (Eigen::Index j = 0; j < y.cols(); ++j) {
      const auto p = softmax(std::span<const double>(y.col(j).data(), 3));
      pre.push_back({p[0], p[1], p[2]});
    }
    const ConstraintSet cs = correct_policy(s, pre, cfg).constraints;
    const auto loss = [&] { return distill_objective(net, s, dn, teacher, cfg, cs); };
    worst[2] = std::max(worst[2], fd_error(net, flatten(step.grads), loss));
    ++done;
  }
  const bool pass = worst[0] < 1e-4 && worst[1] < 1e-4 && worst[2] < 1e-4;
  return {pass, fmt("rel err dqn %.2e ddqn %.2e distill %.2e (50 points each; %d/%d/%d near-kink resampled)",
                    worst[0], worst[1], worst[2], skipped[0], skipped[1], skipped[2])};
}

// ---------------------------------------------------------------- 4

constexpr std::array<double, 24> kCycle{40, 30, 20, 10, -10, -30, 20, 60, 110, 150, 90, 50,
                                        30, 20, 10, 30,  70,  120, 180, 220, 160, 90, 60, 50};

BatteryParams tiny_battery() {
  BatteryParams b;
  b.capacity_mwh = 4.0;
  b.p_max_mw = 1.0;
  b.eta_charge = 1.0;
  b.eta_discharge = 1.0;
  b.soc_min = 0.0;
  b.soc_max = 1.0;
  b.step_minutes = 60;
  return b;
}

DayProfile tiny_day() {
  DayProfile d;
  d.date = Date{std::chrono::year{2023}, std::chrono::January, std::chrono::day{2}};
  d.month = 1;
  for (int h = 0; h < 24; ++h) {
    const double p = kCycle[static_cast<std::size_t>(h)];
    d.slots.push_back(DaySlot{0, 4 * h, p, p});
  }
  return d;
}

// Finite-horizon value iteration over (hour, SoC level); returns the
// undiscounted profit of the resulting optimal policy from level 2.
double tiny_optimum(double gamma) {
  std::array<std::array<double, 5>, 25> v{};
  std::array<std::array<int, 5>, 24> best{};
  for (int t = 23; t >= 0; --t)
    for (int k = 0; k < 5; ++k) {
      double bv = -1e300;
      for (int a = -1; a <= 1; ++a) {
        const int next = std::clamp(k + a, 0, 4);
        // One level is 1 MWh; only the energy that fits is bought or sold.
        const double q = -(next - k) * kCycle[static_cast<std::size_t>(t)] +
                         gamma * v[static_cast<std::size_t>(t + 1)][static_cast<std::size_t>(next)];
        if (q > bv + 1e-12) {
          bv = q;
          best[static_cast<std::size_t>(t)][static_cast<std::size_t>(k)] = a;
        }
      }
      v[static_cast<std::size_t>(t)][static_cast<std::size_t>(k)] = bv;
    }
  double profit = 0.0;
  int k = 2;
  for (int t = 0; t < 24; ++t) {
    const int a = best[static_cast<std::size_t>(t)][static_cast<std::size_t>(k)];
    const int next = std::clamp(k + a, 0, 4);
    profit += -(next - k) * kCycle[static_cast<std::size_t>(t)];
    k = next;
  }
  return profit;
}

TrainConfig tiny_config() {
  TrainConfig c;
  c.gamma = 0.99;
  c.episodes = 2000;
  c.minibatch = 256;
  c.buffer_capacity = 100000;
  c.hidden_layers = {64, 64};
  c.reward_scale = 0.01;
  c.atoms = AtomGrid{51, -10.0, 10.0};
  c.validation_interval = 100;
  c.seed = 7;
  return c;
}

Outcome tiny_mdp() {
  const BatteryParams b = tiny_battery();
  TrainingData data;
  data.train = {tiny_day()};
  data.validation = data.train;
  data.norm = compute_norm_stats(data.train);
  const double optimum = tiny_optimum(0.99);
  const TrainConfig c = tiny_config();
  const TrainResult dqn = train(AgentKind::kDqn, data, b, c);
  const TrainResult ddqn = train(AgentKind::kDdqn, data, b, c);
  const auto profit = [&](const TrainResult& r) {
    return greedy_profit(r.nets.online, r.nets.kind, r.nets.atoms, data.train, b, data.norm, c.initial_soc) *
           b.capacity_mwh;
  };
  const double pd = profit(dqn), pdd = profit(ddqn);
  const bool pass = pd >= 0.95 * optimum && pdd >= pd - 0.01 * std::abs(pd);
  return {pass, fmt("optimum %.1f EUR/day, DQN %.1f (%.1f%%), DDQN %.1f", optimum, pd, 100.0 * pd / optimum, pdd)};
}

// ---------------------------------------------------------------- 5

ConstraintSet single_state_rows(int family) {
  ConstraintSet cs;
  cs.batch_size = 1;
  const double e = 1e-3;
  auto add = [&](std::array<double, 3> c, double r) {
    LinearConstraint l;
    l.coeffs = c;
    l.rhs = r;
    cs.rows.push_back(l);
  };
  switch (family) {
    case 1:  // charge strictly largest
      add({-1, 0, 1}, e);
      add({0, -1, 1}, e);
      break;
    case 2:  // discharge strictly largest
      add({1, -1, 0}, e);
      add({1, 0, -1}, e);
      break;
    case 3:  // idle over discharge
      add({-1, 1, 0}, e);
      break;
    case 4:  // charge rows plus a redundant idle row
      add({-1, 0, 1}, e);
      add({0, -1, 1}, e);
      add({-1, 1, 0}, e);
      break;
    default:
      break;
  }
  return cs;
}

Outcome qp_oracle() {
  std::mt19937_64 rng(505);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0, worst_idem = 0.0, worst_expand = 0.0;
  auto check = [&](const std::vector<Probs>& x, const std::vector<Probs>& y, const ConstraintSet& cs) {
    const auto px = project_policy(x, cs).probs;
    const auto py = project_policy(y, cs).probs;
    const auto brute = oracle::grid_projection(x, cs);
    const auto ppx = project_policy(px, cs).probs;
    double dxy = 0.0, dpxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i)
      for (std::size_t k = 0; k < 3; ++k) {
        worst = std::max(worst, std::abs(px[i][k] - brute[i][k]));
        worst_idem = std::max(worst_idem, std::abs(ppx[i][k] - px[i][k]));
        dxy += std::pow(x[i][k] - y[i][k], 2);
        dpxy += std::pow(px[i][k] - py[i][k], 2);
      }
    worst_expand = std::max(worst_expand, std::sqrt(dpxy) - std::sqrt(dxy));
  };
  for (int t = 0; t < 200; ++t) {
    const ConstraintSet cs = single_state_rows(t % 5);
    check({random_probs(rng)}, {random_probs(rng)}, cs);
  }
  const ConstraintConfig cfg;
  for (int t = 0; t < 50; ++t) {
    std::vector<EnvState> s;
    std::vector<Action> h;
    for (int i = 0; i < 3; ++i) {
      s.push_back({0, 5, 2, 0.1 + 0.9 * u(rng), -800.0 + 3000.0 * u(rng)});
      h.push_back(s.back().indicative_price >= cfg.price_upper
                      ? Action::kDischarge
                      : action_from_index(static_cast<std::size_t>(u(rng) * 3)));
    }
    const ConstraintSet cs = build_constraints(s, cfg, h);
    check({random_probs(rng), random_probs(rng), random_probs(rng)},
          {random_probs(rng), random_probs(rng), random_probs(rng)}, cs);
  }
  return {worst <= 2e-4 && worst_idem <= 1e-9 && worst_expand <= 1e-9,
          fmt("max |qp - grid| %.2e, idempotence %.2e, expansion %.2e", worst, worst_idem, worst_expand)};
}

// ---------------------------------------------------------------- 6-8, 10

struct Pipeline {
  BatteryParams battery;
  DatasetSplit split;
  TrainingData data;
  TrainResult teacher;
  DistillResult student;
  GridSpec probe;
  ConstraintConfig constraints;
  double train_seconds = 0.0;
  double distill_seconds = 0.0;
};

TrainConfig teacher_config() {
  TrainConfig c;
  c.episodes = 3000;
  c.minibatch = 256;
  c.buffer_capacity = 100000;
  c.hidden_layers = {64, 64};
  c.update_interval = 32;
  c.reward_scale = 0.01;
  c.atoms = AtomGrid{51, -50.0, 50.0};
  c.validation_interval = 250;
  c.seed = 11;
  return c;
}

DistillConfig student_config() {
  DistillConfig d;
  d.epochs = 600;
  d.trajectory_states = 1024;
  d.seed = 13;
  return d;
}

// Teacher targets and the KL balance follow the scaled rewards above.
ConstraintConfig student_constraints() {
  ConstraintConfig c;
  c.kd_temperature = 0.03;
  c.omega = 3e-3;
  return c;
}

Pipeline run_pipeline() {
  Pipeline p;
  SynthConfig synth;
  const PriceSeries prices = generate_synthetic_prices(synth, 2023);
  p.split = split_dataset(prices);
  p.data = make_training_data(p.split, p.battery);
  p.constraints = student_constraints();
  auto t0 = Clock::now();
  p.teacher = train(AgentKind::kDdqn, p.data, p.battery, teacher_config());
  p.train_seconds = seconds_since(t0);
  t0 = Clock::now();
  p.student = train_student(p.teacher.checkpoint, p.data.train, p.battery, p.constraints, student_config(), p.probe);
  p.distill_seconds = seconds_since(t0);
  return p;
}

Outcome property_satisfaction(const Pipeline& p) {
  const Controller teacher = controller_from_checkpoint("teacher", p.teacher.checkpoint);
  const Controller with = make_student_controller("student+layer", p.student.student, true);
  const Controller free = make_student_controller("student", p.student.student, false);
  const ViolationReport tr = verify_properties(teacher.policy, p.probe, p.constraints);
  const ViolationReport wr = verify_properties(with.policy, p.probe, p.constraints);
  const ViolationReport fr = verify_properties(free.policy, p.probe, p.constraints);
  const bool pass = p.probe.cell_count() >= 10000 && wr.total_violations() == 0 && fr.violating_fraction() <= 0.01;
  return {pass, fmt("%zu states; teacher %.2f%% violating, with-layer %zu violations, layer-free %.2f%% "
                    "(train %.0f s, distill %.0f s)",
                    p.probe.cell_count(), 100.0 * tr.violating_fraction(), wr.total_violations(),
                    100.0 * fr.violating_fraction(), p.train_seconds, p.distill_seconds)};
}

Outcome fidelity(const Pipeline& p) {
  const Controller teacher = controller_from_checkpoint("teacher", p.teacher.checkpoint);
  const Controller free = make_student_controller("student", p.student.student, false);
  std::vector<EnvState> bad;
  verify_properties(teacher.policy, p.probe, p.constraints, Exec::kParallel, &bad);
  const auto key = [](const EnvState& s) {
    return std::make_tuple(s.minute_of_qh, s.qh_of_day, s.month, s.soc, s.indicative_price);
  };
  std::set<decltype(key(EnvState{}))> excluded;
  for (const auto& s : bad) excluded.insert(key(s));
  std::size_t agree = 0, total = 0;
  for (const auto& ctx : p.probe.contexts) {
    const auto states = p.probe.states(ctx);
    const auto ta = teacher.policy(states);
    const auto sa = free.policy(states);
    for (std::size_t i = 0; i < states.size(); ++i) {
      if (excluded.count(key(states[i]))) continue;
      ++total;
      agree += ta[i] == sa[i];
    }
  }
  const double rate = total ? static_cast<double>(agree) / static_cast<double>(total) : 0.0;
  return {rate >= 0.90, fmt("agreement %.2f%% on %zu property-satisfying states", 100.0 * rate, total)};
}

struct Profits {
  double teacher, student, student_layer, rbc;
};

Profits held_out_profits(const Pipeline& p) {
  const auto days = make_day_profiles(p.split.test, p.battery);
  const double soc = 0.5;
  const RbcThresholds th = quartile_thresholds(p.split.train);
  return {backtest(controller_from_checkpoint("teacher", p.teacher.checkpoint), days, p.battery, soc)
              .profit_per_day_per_mwh,
          backtest(make_student_controller("student", p.student.student, false), days, p.battery, soc)
              .profit_per_day_per_mwh,
          backtest(make_student_controller("student+layer", p.student.student, true), days, p.battery, soc)
              .profit_per_day_per_mwh,
          backtest(make_rbc_controller(th), days, p.battery, soc).profit_per_day_per_mwh};
}

Outcome profit_ordering(const Pipeline& p) {
  const Profits pr = held_out_profits(p);
  const bool vs_teacher = pr.student >= pr.teacher - 0.05 * std::abs(pr.teacher);
  const bool vs_rbc = pr.student >= pr.rbc;
  return {vs_teacher && vs_rbc,
          fmt("EUR/day/MWh on %zu held-out days: student %.1f, teacher %.1f, rbc %.1f (with layer %.1f); "
              ">= teacher-5%% %s, >= rbc %s",
              p.split.test.day_count(), pr.student, pr.teacher, pr.rbc, pr.student_layer, vs_teacher ? "yes" : "no",
              vs_rbc ? "yes" : "no")};
}

Outcome determinism(const Pipeline& p) {
  const Pipeline q = run_pipeline();
  const bool same_teacher = save_checkpoint(p.teacher.checkpoint) == save_checkpoint(q.teacher.checkpoint);
  const bool same_student = save_checkpoint(p.student.checkpoint) == save_checkpoint(q.student.checkpoint);
  const Profits a = held_out_profits(p), b = held_out_profits(q);
  const bool same_backtest = std::memcmp(&a, &b, sizeof a) == 0;
  const bool same_curve = p.teacher.curve.size() == q.teacher.curve.size() &&
                          std::equal(p.teacher.curve.begin(), p.teacher.curve.end(), q.teacher.curve.begin(),
                                     [](const CurvePoint& x, const CurvePoint& y) {
                                       return x.episode == y.episode && x.validation_profit == y.validation_profit;
                                     });
  return {same_teacher && same_student && same_backtest && same_curve,
          fmt("rerun teacher %s, student %s, curve %s, backtests %s", same_teacher ? "identical" : "DIFFERENT",
              same_student ? "identical" : "DIFFERENT", same_curve ? "identical" : "DIFFERENT",
              same_backtest ? "identical" : "DIFFERENT")};
}

// ---------------------------------------------------------------- 9

Outcome table_arithmetic() {
  const ComparisonTable t = compare_profits({"rbc", "dqn", "ddqn", "student"}, {341.1, 413.1, 450.9, 465.2});
  const double a = t.pct[2][0], b = t.pct[2][1], c = t.pct[3][2];
  const bool pass = std::abs(a - 32.2) <= 0.05 && std::abs(b - 9.2) <= 0.05 && std::abs(c - 3.2) <= 0.05;
  return {pass, fmt("ddqn vs rbc %+.2f%%, ddqn vs dqn %+.2f%%, student vs ddqn %+.2f%%", a, b, c)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance suite"};
  std::vector<int> only;
  std::vector<int> known_red;
  app.add_option("--only", only, "Run only these criteria")->check(CLI::Range(1, 10));
  app.add_option("--known-red", known_red, "Criteria whose failure does not affect the exit code")
      ->check(CLI::Range(1, 10));
  CLI11_PARSE(app, argc, argv);
  const auto wanted = [&](int n) { return only.empty() || std::find(only.begin(), only.end(), n) != only.end(); };

  int failures = 0;
  const auto report = [&](int n, const char* name, double limit_s, const std::function<Outcome()>& fn) {
    if (!wanted(n)) return;
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double s = seconds_since(t0);
    if (limit_s > 0 && s > limit_s) {
      o.pass = false;
      o.detail += fmt("; over the %.0f s budget", limit_s);
    }
    const bool known = std::find(known_red.begin(), known_red.end(), n) != known_red.end();
    failures += !o.pass && !known;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  " << n << "  " << name << ": " << o.detail
              << fmt(" [%.2f s]", s) << (!o.pass && known ? " (known red)" : "") << std::endl;
  };

  report(1, "soc dynamics", 1, soc_dynamics);
  report(2, "categorical projection oracle", 5, categorical_oracle);
  report(3, "gradient checks", 120, gradient_checks);
  report(4, "tiny-MDP oracle", 300, tiny_mdp);
  report(5, "QP projection oracle", 120, qp_oracle);

  std::optional<Pipeline> pipe;
  double pipe_seconds = 0.0;
  const auto need_pipe = [&] {
    if (!pipe) {
      const auto t0 = Clock::now();
      pipe = run_pipeline();
      pipe_seconds = seconds_since(t0);
    }
    return true;
  };
  report(6, "property satisfaction", 0, [&] {
    need_pipe();
    const auto t0 = Clock::now();
    Outcome o = property_satisfaction(*pipe);
    // Budget covers teacher training, distillation and verification.
    const double total = pipe_seconds + seconds_since(t0);
    if (total > 15 * 60) {
      o.pass = false;
      o.detail += fmt("; %.0f s exceeds the 900 s budget", total);
    }
    return o;
  });
  report(7, "distillation fidelity", 0, [&] {
    need_pipe();
    return fidelity(*pipe);
  });
  report(8, "held-out profit ordering", 0, [&] {
    need_pipe();
    return profit_ordering(*pipe);
  });
  report(9, "comparison percentages", 1, table_arithmetic);
  report(10, "determinism", 0, [&] {
    need_pipe();
    return determinism(*pipe);
  });
  return failures == 0 ? 0 : 1;
}
