#include <cmath>
#include <exception>

#include "imbal/error.hpp"
#include "imbal/policy_correction.hpp"

namespace imbal {

namespace {

std::vector<double> axis(double lo, double hi, double step) {
  const auto n = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9)) + 1;
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = lo + step * static_cast<double>(i);
  return out;
}

void add_example(ViolationReport& r, Property p, ViolationExample ex) {
  auto& list = r.examples[static_cast<std::size_t>(p)];
  if (list.size() < ViolationReport::kMaxExamples) list.push_back(std::move(ex));
}

nlohmann::json state_json(const EnvState& s) {
  return {{"minute_of_qh", s.minute_of_qh}, {"qh_of_day", s.qh_of_day}, {"month", s.month},
          {"soc", s.soc},                   {"price", s.indicative_price}};
}

struct ContextResult {
  ViolationReport report;
  std::vector<EnvState> violating;
};

ContextResult check_context(const BatchPolicy& policy, const GridSpec& grid, const CalendarContext& ctx,
                            const ConstraintConfig& config) {
  ContextResult out;
  ViolationReport& r = out.report;
  const std::vector<EnvState> states = grid.states(ctx);
  const std::vector<Action> actions = policy(states);
  if (actions.size() != states.size())
    throw Error(ErrorKind::kDimensionMismatch, "verify_properties: policy returned wrong batch size");
  const std::size_t n_price = grid.prices().size();
  const std::size_t n_soc = grid.socs().size();
  std::vector<char> flagged(states.size(), 0);
  r.total_states = states.size();

  for (std::size_t c = 0; c < states.size(); ++c) {
    const EnvState& s = states[c];
    if (s.indicative_price <= config.price_lower && actions[c] != Action::kCharge) {
      ++r.counts[0];
      flagged[c] = 1;
      add_example(r, Property::kP1, {s, actions[c], std::nullopt, std::nullopt});
    }
    if (s.indicative_price >= config.price_upper && actions[c] != Action::kDischarge) {
      ++r.counts[1];
      flagged[c] = 1;
      add_example(r, Property::kP2, {s, actions[c], std::nullopt, std::nullopt});
    }
  }
  auto check_pair = [&](std::size_t lo, std::size_t hi) {
    ++r.total_pairs;
    if (index_of(actions[lo]) >= index_of(actions[hi])) return;
    ++r.counts[2];
    flagged[lo] = flagged[hi] = 1;
    add_example(r, Property::kP3, {states[lo], actions[lo], states[hi], actions[hi]});
  };
  for (std::size_t i = 0; i < n_price; ++i) {
    for (std::size_t j = 0; j < n_soc; ++j) {
      const std::size_t c = i * n_soc + j;
      if (i + 1 < n_price) check_pair(c, c + n_soc);
      if (j + 1 < n_soc) check_pair(c, c + 1);
    }
  }
  for (std::size_t c = 0; c < states.size(); ++c) {
    if (!flagged[c]) continue;
    ++r.violating_states;
    out.violating.push_back(states[c]);
  }
  return out;
}

}  // namespace

void GridSpec::validate() const {
  if (!(price_step > 0.0) || !(soc_step > 0.0)) throw Error(ErrorKind::kInvalidArgument, "grid steps must be positive");
  if (!(price_max >= price_min) || !(soc_max >= soc_min))
    throw Error(ErrorKind::kInvalidArgument, "grid bounds must be ordered");
  if (contexts.empty()) throw Error(ErrorKind::kInvalidArgument, "grid needs at least one calendar context");
  for (const auto& c : contexts) {
    if (c.minute_of_qh < 0 || c.minute_of_qh >= kMinutesPerQuarterHour || c.qh_of_day < 0 ||
        c.qh_of_day >= kQuarterHoursPerDay || c.month < 1 || c.month > 12)
      throw Error(ErrorKind::kInvalidArgument, "grid calendar context out of range");
  }
}

std::vector<double> GridSpec::prices() const { return axis(price_min, price_max, price_step); }
std::vector<double> GridSpec::socs() const { return axis(soc_min, soc_max, soc_step); }

std::vector<EnvState> GridSpec::states(const CalendarContext& context) const {
  const auto ps = prices();
  const auto ss = socs();
  std::vector<EnvState> out;
  out.reserve(ps.size() * ss.size());
  for (double p : ps)
    for (double s : ss) out.push_back({context.minute_of_qh, context.qh_of_day, context.month, s, p});
  return out;
}

std::size_t GridSpec::cell_count() const { return prices().size() * socs().size() * contexts.size(); }

double ViolationReport::violating_fraction() const {
  return total_states == 0 ? 0.0 : static_cast<double>(violating_states) / static_cast<double>(total_states);
}

void ViolationReport::merge(const ViolationReport& other) {
  total_states += other.total_states;
  total_pairs += other.total_pairs;
  violating_states += other.violating_states;
  for (std::size_t p = 0; p < 3; ++p) {
    counts[p] += other.counts[p];
    for (const auto& ex : other.examples[p])
      if (examples[p].size() < kMaxExamples) examples[p].push_back(ex);
  }
}

nlohmann::json ViolationReport::to_json() const {
  nlohmann::json j;
  j["total_states"] = total_states;
  j["total_pairs"] = total_pairs;
  j["violating_states"] = violating_states;
  j["violating_fraction"] = violating_fraction();
  for (std::size_t p = 0; p < 3; ++p) {
    const std::string name = to_string(static_cast<Property>(p));
    j["counts"][name] = counts[p];
    nlohmann::json list = nlohmann::json::array();
    for (const auto& ex : examples[p]) {
      nlohmann::json e{{"state", state_json(ex.state)}, {"action", std::string(to_string(ex.action))}};
      if (ex.partner) e["partner"] = state_json(*ex.partner);
      if (ex.partner_action) e["partner_action"] = std::string(to_string(*ex.partner_action));
      list.push_back(std::move(e));
    }
    j["examples"][name] = std::move(list);
  }
  return j;
}

ViolationReport verify_properties(const BatchPolicy& policy, const GridSpec& grid, const ConstraintConfig& config,
                                  Exec exec, std::vector<EnvState>* violating) {
  grid.validate();
  const auto n = static_cast<std::ptrdiff_t>(grid.contexts.size());
  std::vector<ContextResult> parts(grid.contexts.size());
  std::vector<std::exception_ptr> errors(grid.contexts.size());
#pragma omp parallel for schedule(static) if (exec == Exec::kParallel)
  for (std::ptrdiff_t c = 0; c < n; ++c) {
    const auto k = static_cast<std::size_t>(c);
    try {
      parts[k] = check_context(policy, grid, grid.contexts[k], config);
    } catch (...) {
      errors[k] = std::current_exception();
    }
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  ViolationReport report;
  for (auto& part : parts) {
    report.merge(part.report);
    if (violating) violating->insert(violating->end(), part.violating.begin(), part.violating.end());
  }
  return report;
}

}  // namespace imbal
