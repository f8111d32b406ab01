#include <algorithm>
#include <map>
#include <numeric>
#include <tuple>

#include "imbal/error.hpp"
#include "imbal/kernels.hpp"
#include "imbal/policy_correction.hpp"

namespace imbal {

namespace {

using CalendarKey = std::tuple<int, int, int>;

CalendarKey key_of(const EnvState& s) { return {s.minute_of_qh, s.qh_of_day, s.month}; }

// Prefix-max Fenwick tree over soc ranks stored in reverse, so a prefix
// query returns the max over all socs >= the queried one.
class MaxFenwick {
 public:
  explicit MaxFenwick(std::size_t n) : tree_(n + 1, -1) {}
  void update(std::size_t pos, long long v) {
    for (++pos; pos < tree_.size(); pos += pos & (~pos + 1)) tree_[pos] = std::max(tree_[pos], v);
  }
  long long query(std::size_t pos) const {
    long long best = -1;
    for (++pos; pos > 0; pos -= pos & (~pos + 1)) best = std::max(best, tree_[pos]);
    return best;
  }

 private:
  std::vector<long long> tree_;
};

struct Level {
  std::optional<std::size_t> value;
  std::optional<std::size_t> partner;
};

// For every state, the largest value among the other same-calendar states
// that dominate it in (price, soc), with the lowest-index partner on ties.
std::vector<Level> dominating_levels(std::span<const EnvState> states, std::span<const std::size_t> values) {
  const std::size_t n = states.size();
  const auto big = static_cast<long long>(n);
  // Encoded so that larger value wins, then smaller index.
  auto encode = [&](std::size_t idx) { return static_cast<long long>(values[idx]) * big + (big - 1 - static_cast<long long>(idx)); };
  auto decode = [&](long long code, Level& lv) {
    if (code < 0) return;
    lv.value = static_cast<std::size_t>(code / big);
    lv.partner = static_cast<std::size_t>(big - 1 - code % big);
  };

  std::map<CalendarKey, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < n; ++i) groups[key_of(states[i])].push_back(i);

  std::vector<Level> out(n);
  for (auto& [key, idx] : groups) {
    std::vector<double> socs;
    for (std::size_t i : idx) socs.push_back(states[i].soc);
    std::sort(socs.begin(), socs.end());
    socs.erase(std::unique(socs.begin(), socs.end()), socs.end());
    auto rev_rank = [&](double soc) {
      const auto r = static_cast<std::size_t>(std::lower_bound(socs.begin(), socs.end(), soc) - socs.begin());
      return socs.size() - 1 - r;
    };
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      if (states[a].indicative_price != states[b].indicative_price)
        return states[a].indicative_price > states[b].indicative_price;
      if (states[a].soc != states[b].soc) return states[a].soc > states[b].soc;
      return a < b;
    });
    MaxFenwick tree(socs.size());
    std::size_t k = 0;
    while (k < idx.size()) {
      // Block of identical (price, soc) states dominate each other.
      std::size_t e = k + 1;
      while (e < idx.size() && states[idx[e]].indicative_price == states[idx[k]].indicative_price &&
             states[idx[e]].soc == states[idx[k]].soc)
        ++e;
      const std::size_t rank = rev_rank(states[idx[k]].soc);
      const long long before = tree.query(rank);
      for (std::size_t a = k; a < e; ++a) {
        long long best = before;
        for (std::size_t b = k; b < e; ++b)
          if (b != a) best = std::max(best, encode(idx[b]));
        decode(best, out[idx[a]]);
      }
      for (std::size_t a = k; a < e; ++a) tree.update(rank, encode(idx[a]));
      k = e;
    }
  }
  return out;
}

LinearConstraint row(std::size_t state, std::size_t hi, std::size_t lo, double margin, Property src,
                     std::optional<std::size_t> partner = std::nullopt) {
  LinearConstraint c;
  c.state = state;
  c.coeffs[hi] = 1.0;
  c.coeffs[lo] = -1.0;
  c.rhs = margin;
  c.source = src;
  c.partner = partner;
  return c;
}

constexpr std::size_t kDis = index_of(Action::kDischarge);
constexpr std::size_t kIdl = index_of(Action::kIdle);
constexpr std::size_t kChg = index_of(Action::kCharge);

ConstraintSet constraints_from_levels(std::span<const EnvState> states, const ConstraintConfig& config,
                                      const std::vector<Level>& levels) {
  ConstraintSet cs;
  cs.batch_size = states.size();
  for (std::size_t s = 0; s < states.size(); ++s) {
    const double price = states[s].indicative_price;
    const Level& lv = levels[s];
    if (price <= config.price_lower) {
      cs.rows.push_back(row(s, kChg, kIdl, config.margin, Property::kP1));
      cs.rows.push_back(row(s, kChg, kDis, config.margin, Property::kP1));
      continue;
    }
    if (price >= config.price_upper) {
      if (lv.value && *lv.value > kDis)
        throw Error(ErrorKind::kInfeasible,
                    "state " + std::to_string(s) + " must discharge (price >= upper threshold) but partner " +
                        std::to_string(*lv.partner) + " requires a higher action");
      cs.rows.push_back(row(s, kDis, kIdl, config.margin, Property::kP2));
      cs.rows.push_back(row(s, kDis, kChg, config.margin, Property::kP2));
      continue;
    }
    if (!lv.value) continue;
    if (*lv.value == kChg) {
      cs.rows.push_back(row(s, kChg, kIdl, config.margin, Property::kP3, lv.partner));
      cs.rows.push_back(row(s, kChg, kDis, config.margin, Property::kP3, lv.partner));
    } else if (*lv.value == kIdl) {
      cs.rows.push_back(row(s, kIdl, kDis, config.margin, Property::kP3, lv.partner));
    }
  }
  return cs;
}

std::vector<std::size_t> argmax_indices(const std::vector<Probs>& probs) {
  std::vector<std::size_t> a(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) a[i] = index_of(argmax_action(probs[i]));
  return a;
}

}  // namespace

std::vector<std::optional<std::size_t>> dominating_max(std::span<const EnvState> states,
                                                        std::span<const std::size_t> values) {
  if (values.size() != states.size())
    throw Error(ErrorKind::kDimensionMismatch, "dominating_max: one value per state required");
  const auto levels = dominating_levels(states, values);
  std::vector<std::optional<std::size_t>> out(levels.size());
  for (std::size_t i = 0; i < levels.size(); ++i) out[i] = levels[i].value;
  return out;
}

ConstraintSet build_constraints(std::span<const EnvState> states, const ConstraintConfig& config,
                                std::span<const Action> hints) {
  config.validate();
  if (states.empty()) throw Error(ErrorKind::kInvalidArgument, "build_constraints: empty batch");
  if (hints.size() != states.size())
    throw Error(ErrorKind::kDimensionMismatch, "build_constraints: one hint per state required");
  std::vector<std::size_t> values(hints.size());
  for (std::size_t i = 0; i < hints.size(); ++i) values[i] = index_of(hints[i]);
  return constraints_from_levels(states, config, dominating_levels(states, values));
}

Correction correct_policy(std::span<const EnvState> states, std::span<const Probs> raw,
                          const ConstraintConfig& config, Exec exec) {
  config.validate();
  if (raw.size() != states.size())
    throw Error(ErrorKind::kDimensionMismatch, "correct_policy: one distribution per state required");
  Correction out;
  std::vector<Level> levels(states.size());
  while (true) {
    ++out.rounds;
    out.constraints = constraints_from_levels(states, config, levels);
    out.projection = project_policy(raw, out.constraints, exec);
    const std::vector<std::size_t> actions = argmax_indices(out.projection.probs);
    const std::vector<Level> dom = dominating_levels(states, actions);
    bool changed = false;
    for (std::size_t s = 0; s < states.size(); ++s) {
      if (!dom[s].value || *dom[s].value <= actions[s]) continue;
      // Levels only grow, so the loop ends after at most 2n rounds.
      if (!levels[s].value || *levels[s].value < *dom[s].value) {
        levels[s] = dom[s];
        changed = true;
      }
    }
    if (!changed) break;
  }
  out.probs = out.projection.probs;
  return out;
}

Probs teacher_policy(const AgentNets& teacher, const Features& x, double temperature) {
  const auto q = action_values(teacher.online, teacher.kind, teacher.atoms, x);
  const auto p = softmax(q, temperature);
  return {p[0], p[1], p[2]};
}

std::vector<Probs> teacher_policy_batch(const AgentNets& teacher, const Eigen::MatrixXd& features,
                                        double temperature) {
  const Eigen::MatrixXd out = kernels::parallel::forward_batch(teacher.online, features);
  std::vector<Probs> probs(static_cast<std::size_t>(out.cols()));
  for (Eigen::Index j = 0; j < out.cols(); ++j) {
    const auto q = action_values(teacher.kind, teacher.atoms,
                                 std::span<const double>(out.col(j).data(), static_cast<std::size_t>(out.rows())));
    const auto p = softmax(q, temperature);
    probs[static_cast<std::size_t>(j)] = {p[0], p[1], p[2]};
  }
  return probs;
}

DistillLoss distill_loss(std::span<const Probs> pre, std::span<const Probs> post,
                         std::span<const Probs> teacher, double omega, bool swap_kl) {
  if (pre.size() != post.size() || pre.size() != teacher.size())
    throw Error(ErrorKind::kDimensionMismatch, "distill_loss: batch sizes differ");
  DistillLoss out;
  out.grad_pre.assign(pre.size(), Probs{});
  out.grad_post.assign(pre.size(), Probs{});
  if (pre.empty()) return out;
  const double inv_n = 1.0 / static_cast<double>(pre.size());
  Probs ga{}, gb{}, gc{}, gd{};
  for (std::size_t i = 0; i < pre.size(); ++i) {
    if (!swap_kl) {
      out.loss += inv_n * (omega * kl_divergence(post[i], teacher[i]) + kl_divergence(pre[i], post[i]));
      kl_divergence_grad(post[i], teacher[i], ga, gb);  // d/dpost of KL(post||teacher)
      kl_divergence_grad(pre[i], post[i], gc, gd);      // d/dpre, d/dpost of KL(pre||post)
      for (std::size_t k = 0; k < kNumActions; ++k) {
        out.grad_post[i][k] = inv_n * (omega * ga[k] + gd[k]);
        out.grad_pre[i][k] = inv_n * gc[k];
      }
    } else {
      out.loss += inv_n * (omega * kl_divergence(teacher[i], post[i]) + kl_divergence(post[i], pre[i]));
      kl_divergence_grad(teacher[i], post[i], ga, gb);  // d/dpost via q slot
      kl_divergence_grad(post[i], pre[i], gc, gd);
      for (std::size_t k = 0; k < kNumActions; ++k) {
        out.grad_post[i][k] = inv_n * (omega * gb[k] + gc[k]);
        out.grad_pre[i][k] = inv_n * gd[k];
      }
    }
  }
  return out;
}

}  // namespace imbal
