#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "imbal/error.hpp"
#include "imbal/policy_correction.hpp"

namespace imbal {

namespace {

constexpr double kTol = 1e-12;
constexpr std::size_t kNonNegRow = std::numeric_limits<std::size_t>::max();

struct Inequality {
  Eigen::Vector3d normal;
  double rhs = 0.0;
  std::size_t row = kNonNegRow;
};

struct StateSolution {
  Probs x{};
  ActiveSet active;
  bool feasible = false;
};

// Minimizes ||x - p||^2 over {sum x = 1, normal_i . x >= rhs_i} by trying
// candidate active sets in a fixed order. At most two inequality rows can be
// independent of the simplex row in three dimensions, and some optimal
// multiplier vector is supported on independent rows, so subsets of size
// <= 2 suffice.
StateSolution solve_state(const Probs& p_arr, const std::vector<Inequality>& ineqs) {
  const Eigen::Vector3d p(p_arr[0], p_arr[1], p_arr[2]);
  const std::size_t n = ineqs.size();
  StateSolution sol;

  auto try_subset = [&](const std::vector<std::size_t>& subset) -> bool {
    const auto m = static_cast<Eigen::Index>(subset.size() + 1);
    Eigen::MatrixXd A(m, 3);
    Eigen::VectorXd b(m);
    A.row(0).setOnes();
    b(0) = 1.0;
    for (std::size_t k = 0; k < subset.size(); ++k) {
      A.row(static_cast<Eigen::Index>(k + 1)) = ineqs[subset[k]].normal.transpose();
      b(static_cast<Eigen::Index>(k + 1)) = ineqs[subset[k]].rhs;
    }
    Eigen::FullPivLU<Eigen::MatrixXd> rank_check(A);
    rank_check.setThreshold(1e-10);
    if (rank_check.rank() < m) return false;
    const Eigen::MatrixXd M = A * A.transpose();
    const Eigen::VectorXd lambda = M.ldlt().solve(b - A * p);
    for (Eigen::Index k = 1; k < m; ++k)
      if (lambda(k) < -kTol) return false;
    const Eigen::Vector3d x = p + A.transpose() * lambda;
    for (const Inequality& q : ineqs)
      if (q.normal.dot(x) < q.rhs - kTol) return false;
    sol.feasible = true;
    sol.x = {x(0), x(1), x(2)};
    for (std::size_t k = 0; k < subset.size(); ++k) {
      const Inequality& q = ineqs[subset[k]];
      const double lam = lambda(static_cast<Eigen::Index>(k + 1));
      if (lam <= kTol) sol.active.degenerate = true;
      sol.active.normals.push_back({q.normal(0), q.normal(1), q.normal(2)});
      sol.active.multipliers.push_back(lam);
      sol.active.rows.push_back(q.row);
      if (q.row == kNonNegRow) {
        for (std::size_t c = 0; c < kNumActions; ++c)
          if (q.normal(static_cast<Eigen::Index>(c)) == 1.0) sol.x[c] = 0.0;
      }
    }
    // Tight but inactive rows also break strict complementarity.
    for (std::size_t i = 0; i < n; ++i) {
      if (std::find(subset.begin(), subset.end(), i) != subset.end()) continue;
      if (std::abs(ineqs[i].normal.dot(x) - ineqs[i].rhs) <= kTol) sol.active.degenerate = true;
    }
    return true;
  };

  if (try_subset({})) return sol;
  for (std::size_t i = 0; i < n; ++i)
    if (try_subset({i})) return sol;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (try_subset({i, j})) return sol;
  return sol;
}

std::vector<Inequality> inequalities_for(const ConstraintSet& cs, const std::vector<std::size_t>& rows) {
  std::vector<Inequality> ineqs;
  for (std::size_t k = 0; k < kNumActions; ++k) {
    Inequality q;
    q.normal = Eigen::Vector3d::Zero();
    q.normal(static_cast<Eigen::Index>(k)) = 1.0;
    ineqs.push_back(q);
  }
  for (std::size_t r : rows) {
    const LinearConstraint& c = cs.rows[r];
    ineqs.push_back(Inequality{Eigen::Vector3d(c.coeffs[0], c.coeffs[1], c.coeffs[2]), c.rhs, r});
  }
  return ineqs;
}

}  // namespace

const char* to_string(Property p) {
  switch (p) {
    case Property::kP1: return "P1";
    case Property::kP2: return "P2";
    case Property::kP3: return "P3";
  }
  return "?";
}

void ConstraintConfig::validate() const {
  auto bad = [](const char* what) { throw Error(ErrorKind::kInvalidArgument, what); };
  if (!(price_lower < price_upper)) bad("price_lower must be below price_upper");
  if (!(margin > 0.0 && margin < 1.0 / 3.0))
    throw Error(ErrorKind::kInfeasible, "margin must lie in (0, 1/3) for the argmax constraints to be feasible");
  if (!(omega > 0.0)) bad("omega must be positive");
  if (!(kd_temperature > 0.0)) bad("kd_temperature must be positive");
}

std::vector<std::vector<std::size_t>> ConstraintSet::rows_by_state() const {
  std::vector<std::vector<std::size_t>> out(batch_size);
  for (std::size_t r = 0; r < rows.size(); ++r) out.at(rows[r].state).push_back(r);
  return out;
}

Action argmax_action(const Probs& p) {
  return action_from_index(static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin()));
}

Projection project_policy(std::span<const Probs> inputs, const ConstraintSet& constraints, Exec exec) {
  if (constraints.batch_size != 0 && constraints.batch_size != inputs.size())
    throw Error(ErrorKind::kDimensionMismatch, "constraint set built for a different batch size");
  ConstraintSet cs = constraints;
  cs.batch_size = inputs.size();
  const auto by_state = cs.rows_by_state();
  const auto n = static_cast<std::ptrdiff_t>(inputs.size());

  Projection out;
  out.probs.resize(inputs.size());
  out.active.resize(inputs.size());
  std::vector<char> ok(inputs.size(), 1);

  auto body = [&](std::ptrdiff_t s) {
    const auto i = static_cast<std::size_t>(s);
    StateSolution sol = solve_state(inputs[i], inequalities_for(cs, by_state[i]));
    ok[i] = sol.feasible ? 1 : 0;
    out.probs[i] = sol.x;
    out.active[i] = std::move(sol.active);
  };
  if (exec == Exec::kParallel) {
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t s = 0; s < n; ++s) body(s);
  } else {
    for (std::ptrdiff_t s = 0; s < n; ++s) body(s);
  }

  for (std::size_t i = 0; i < inputs.size(); ++i) {
    if (!ok[i]) {
      std::ostringstream msg;
      msg << "projection infeasible for batch state " << i << "; constraints:";
      for (std::size_t r : by_state[i]) {
        const LinearConstraint& c = cs.rows[r];
        msg << " [row " << r << " " << to_string(c.source) << " (" << c.coeffs[0] << ',' << c.coeffs[1]
            << ',' << c.coeffs[2] << ") >= " << c.rhs << ']';
      }
      throw Error(ErrorKind::kInfeasible, msg.str());
    }
    if (out.active[i].degenerate) ++out.degenerate_count;
  }
  return out;
}

std::vector<Probs> project_policy_backward(const Projection& forward, std::span<const Probs> upstream,
                                           std::size_t* degenerate_warnings) {
  if (upstream.size() != forward.probs.size())
    throw Error(ErrorKind::kDimensionMismatch, "backward: upstream batch size mismatch");
  std::vector<Probs> grad(upstream.size());
  std::size_t warnings = 0;
  for (std::size_t i = 0; i < upstream.size(); ++i) {
    const ActiveSet& act = forward.active[i];
    if (act.degenerate) ++warnings;
    const auto m = static_cast<Eigen::Index>(act.normals.size() + 1);
    Eigen::MatrixXd A(m, 3);
    A.row(0).setOnes();
    for (std::size_t k = 0; k < act.normals.size(); ++k)
      A.row(static_cast<Eigen::Index>(k + 1)) << act.normals[k][0], act.normals[k][1], act.normals[k][2];
    // Least-norm pseudo-inverse keeps singular active sets deterministic.
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(A);
    const Eigen::Matrix3d P = Eigen::Matrix3d::Identity() - cod.pseudoInverse() * A;
    const Eigen::Vector3d g(upstream[i][0], upstream[i][1], upstream[i][2]);
    const Eigen::Vector3d r = P * g;
    grad[i] = {r(0), r(1), r(2)};
  }
  if (degenerate_warnings) *degenerate_warnings += warnings;
  return grad;
}

}  // namespace imbal
