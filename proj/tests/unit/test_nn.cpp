#include <cmath>
#include <random>

#include "helpers.hpp"
#include "imbal/checkpoint.hpp"
#include "imbal/kernels.hpp"
#include "imbal/nn.hpp"

using namespace imbal;

namespace {

std::vector<double> random_vec(std::size_t n, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> nd(0.0, scale);
  std::vector<double> v(n);
  for (auto& x : v) x = nd(rng);
  return v;
}

// Central differences of dot(forward(x), up) w.r.t. every parameter.
double max_fd_rel_error(FeedForwardNet net, const std::vector<double>& x, const std::vector<double>& up) {
  const auto g = flatten(backward(net, x, up));
  const double h = 1e-6;
  double worst = 0.0;
  auto value = [&]() {
    const Eigen::VectorXd y = net.forward(x);
    double s = 0.0;
    for (std::size_t k = 0; k < up.size(); ++k) s += y[static_cast<Eigen::Index>(k)] * up[k];
    return s;
  };
  for (std::size_t i = 0; i < net.parameter_count(); ++i) {
    const double saved = net.parameter(i);
    net.parameter(i) = saved + h;
    const double fp = value();
    net.parameter(i) = saved - h;
    const double fm = value();
    net.parameter(i) = saved;
    const double fd = (fp - fm) / (2 * h);
    const double err = std::abs(fd - g[i]) / std::max(1.0, std::abs(g[i]) + std::abs(fd));
    worst = std::max(worst, err);
  }
  return worst;
}

}  // namespace

TEST_CASE("zero net outputs zero") {
  const FeedForwardNet net({5, 4, 3});
  const std::vector<double> x{1, -2, 3, 0.5, 7};
  CHECK(net.forward(x).isZero(0.0));
}

TEST_CASE("identity-like single layer") {
  FeedForwardNet net({1, 1});
  net.layers()[0].weights(0, 0) = 1.0;
  const std::vector<double> x{2.0};
  CHECK(net.forward(x)[0] == 2.0);
}

TEST_CASE("forward is deterministic and checks dimensions") {
  const auto net = FeedForwardNet::initialized({5, 256, 128, 153}, 42);
  const std::vector<double> x{0.1, 0.2, 0.3, 0.4, 0.5};
  CHECK(net.forward(x) == net.forward(x));
  CHECK(FeedForwardNet::initialized({5, 256, 128, 153}, 42) == net);
  const std::vector<double> bad{1.0, 2.0};
  CHECK_THROWS_KIND(net.forward(bad), ErrorKind::kDimensionMismatch);
  CHECK(net.all_finite());
}

TEST_CASE("initialization bounds") {
  const auto net = FeedForwardNet::initialized({5, 64, 32, 3}, 1);
  for (const auto& l : net.layers()) {
    const double bound = std::sqrt(6.0 / static_cast<double>(l.weights.rows() + l.weights.cols()));
    CHECK(l.weights.cwiseAbs().maxCoeff() <= bound);
    CHECK(l.biases.isZero(0.0));
  }
}

TEST_CASE("backward trivial cases") {
  const auto net = FeedForwardNet::initialized({5, 8, 3}, 3);
  const std::vector<double> x{1, 2, 3, 4, 5};
  const std::vector<double> zero(3, 0.0);
  for (double g : flatten(backward(net, x, zero))) CHECK(g == 0.0);

  FeedForwardNet lin({3, 2});
  const std::vector<double> xi{1.5, -2.0, 0.25};
  const std::vector<double> unit{0.0, 1.0};
  const NetGradients g = backward(lin, xi, unit);
  CHECK(g[0].weights(1, 0) == 1.5);
  CHECK(g[0].weights(1, 1) == -2.0);
  CHECK(g[0].weights(1, 2) == 0.25);
  CHECK(g[0].weights.row(0).isZero(0.0));
  CHECK(g[0].biases[1] == 1.0);
}

TEST_CASE("gradients match finite differences on the artifact shapes") {
  std::mt19937_64 rng(9);
  for (const std::vector<std::size_t>& dims :
       {std::vector<std::size_t>{5, 64, 32, 3}, std::vector<std::size_t>{5, 16, 8, 153}}) {
    auto net = FeedForwardNet::initialized(dims, 5);
    // Non-zero biases so kinks are not hit at exactly zero.
    for (auto& l : net.layers())
      for (Eigen::Index i = 0; i < l.biases.size(); ++i) l.biases[i] = 0.05 * static_cast<double>(i % 7) - 0.1;
    const auto x = random_vec(5, rng);
    const auto up = random_vec(dims.back(), rng);
    CHECK(max_fd_rel_error(net, x, up) < 1e-5);
  }
}

TEST_CASE("full teacher shape gradient spot check") {
  std::mt19937_64 rng(10);
  auto net = FeedForwardNet::initialized({5, 256, 128, 3}, 6);
  const auto x = random_vec(5, rng);
  const auto up = random_vec(3, rng);
  const auto g = flatten(backward(net, x, up));
  std::uniform_int_distribution<std::size_t> pick(0, net.parameter_count() - 1);
  const double h = 1e-6;
  for (int t = 0; t < 200; ++t) {
    const std::size_t i = pick(rng);
    const double saved = net.parameter(i);
    net.parameter(i) = saved + h;
    const Eigen::VectorXd yp = net.forward(x);
    net.parameter(i) = saved - h;
    const Eigen::VectorXd ym = net.forward(x);
    net.parameter(i) = saved;
    double fd = 0.0;
    for (int k = 0; k < 3; ++k) fd += (yp[k] - ym[k]) * up[static_cast<std::size_t>(k)] / (2 * h);
    CHECK(std::abs(fd - g[i]) / std::max(1.0, std::abs(fd) + std::abs(g[i])) < 1e-5);
  }
}

TEST_CASE("parallel kernels equal the serial reference") {
  std::mt19937_64 rng(4);
  const auto net = FeedForwardNet::initialized({5, 64, 32, 7}, 8);
  for (Eigen::Index cols : {1, 63, 64, 65, 300}) {
    Eigen::MatrixXd x(5, cols), up(7, cols);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = random_vec(1, rng)[0];
    for (Eigen::Index i = 0; i < up.size(); ++i) up.data()[i] = random_vec(1, rng)[0];
    const Eigen::MatrixXd ys = kernels::serial::forward_batch(net, x);
    const Eigen::MatrixXd yp = kernels::parallel::forward_batch(net, x);
    CHECK((ys - yp).cwiseAbs().maxCoeff() < 1e-12);
    const auto gs = flatten(kernels::serial::backward_batch(net, x, up));
    const auto gp = flatten(kernels::parallel::backward_batch(net, kernels::parallel::forward_cached(net, x), up));
    REQUIRE(gs.size() == gp.size());
    double worst = 0.0;
    for (std::size_t i = 0; i < gs.size(); ++i) worst = std::max(worst, std::abs(gs[i] - gp[i]) / (1.0 + std::abs(gs[i])));
    CHECK(worst < 1e-10);
    // Column j of the batch equals the single-sample path.
    const std::vector<double> x0(x.col(0).data(), x.col(0).data() + 5);
    CHECK((net.forward(x0) - yp.col(0)).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("adam") {
  auto net = FeedForwardNet::initialized({2, 3, 1}, 2);
  const auto before = net.flat_parameters();
  AdamState st = AdamState::for_net(net, 1e-3);
  adam_step(net, zero_gradients(net), st);
  CHECK(st.step_count == 1);
  CHECK(net.flat_parameters() == before);

  // Constant gradient: the step tends to lr * sign(g).
  NetGradients g = zero_gradients(net);
  g[0].weights(0, 0) = 0.7;
  g[1].biases[0] = -2.0;
  double w_prev = net.layers()[0].weights(0, 0), b_prev = net.layers()[1].biases[0];
  double last_w = 0.0, last_b = 0.0;
  // Scalar recurrence oracle.
  double m = 0.0, v = 0.0;
  for (int t = 1; t <= 2000; ++t) {
    adam_step(net, g, st);
    last_w = net.layers()[0].weights(0, 0) - w_prev;
    last_b = net.layers()[1].biases[0] - b_prev;
    w_prev = net.layers()[0].weights(0, 0);
    b_prev = net.layers()[1].biases[0];
    m = 0.9 * m + 0.1 * 0.7;
    v = 0.999 * v + 0.001 * 0.49;
  }
  // The zero-gradient step above advanced the bias-correction counter.
  const double mh = m / (1 - std::pow(0.9, 2001)), vh = v / (1 - std::pow(0.999, 2001));
  CHECK(last_w == doctest::Approx(-1e-3 * mh / (std::sqrt(vh) + 1e-8)).epsilon(1e-9));
  CHECK(last_w == doctest::Approx(-1e-3).epsilon(1e-3));
  CHECK(last_b == doctest::Approx(1e-3).epsilon(1e-3));
  CHECK(st.step_count == 2001);
}

TEST_CASE("softmax") {
  const std::vector<double> eq{3.0, 3.0, 3.0};
  for (double t : {0.1, 1.0, 50.0})
    for (double p : softmax(eq, t)) CHECK(p == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  const std::vector<double> l2{std::log(2.0), 0.0};
  const auto p = softmax(l2);
  CHECK(p[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
  CHECK(p[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
  const std::vector<double> big{1000.0, 0.0};
  const auto q = softmax(big);
  CHECK(q[0] == 1.0);
  CHECK(q[1] == doctest::Approx(0.0).epsilon(1e-300));
  std::mt19937_64 rng(3);
  for (int i = 0; i < 100; ++i) {
    auto l = random_vec(5, rng, 30.0);
    const auto a = softmax(l);
    double s = 0.0;
    for (double x : a) s += x;
    CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
    for (auto& x : l) x += 17.0;
    const auto b = softmax(l);
    for (std::size_t k = 0; k < 5; ++k) CHECK(a[k] == doctest::Approx(b[k]).epsilon(1e-12));
  }
}

TEST_CASE("softmax backward matches finite differences") {
  std::mt19937_64 rng(12);
  for (double t : {1.0, 2.5}) {
    const auto l = random_vec(4, rng);
    const auto g = random_vec(4, rng);
    const auto p = softmax(l, t);
    const auto an = softmax_backward(p, g, t);
    for (std::size_t i = 0; i < 4; ++i) {
      auto lp = l, lm = l;
      lp[i] += 1e-6;
      lm[i] -= 1e-6;
      const auto pp = softmax(lp, t), pm = softmax(lm, t);
      double fd = 0.0;
      for (std::size_t k = 0; k < 4; ++k) fd += g[k] * (pp[k] - pm[k]) / 2e-6;
      CHECK(an[i] == doctest::Approx(fd).epsilon(1e-7));
    }
  }
}

TEST_CASE("kl divergence") {
  const std::vector<double> p{0.5, 0.5}, q{0.25, 0.75};
  CHECK(kl_divergence(p, p) == 0.0);
  CHECK(kl_divergence(p, q) == doctest::Approx(0.5 * std::log(2.0) + 0.5 * std::log(2.0 / 3.0)).epsilon(1e-14));
  CHECK(kl_divergence(p, q) == doctest::Approx(0.143841).epsilon(1e-6));
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    std::vector<double> a(3), b(3);
    double sa = 0, sb = 0;
    for (int k = 0; k < 3; ++k) {
      a[k] = u(rng);
      b[k] = u(rng);
      sa += a[k];
      sb += b[k];
    }
    for (int k = 0; k < 3; ++k) {
      a[k] /= sa;
      b[k] /= sb;
    }
    CHECK(kl_divergence(a, b) >= 0.0);
  }
  const std::vector<double> z{1.0, 0.0}, nz{0.5, 0.5};
  CHECK(std::isfinite(kl_divergence(z, nz)));
  CHECK(std::isfinite(kl_divergence(nz, z)));
}

TEST_CASE("kl gradient matches finite differences") {
  const std::vector<double> p{0.2, 0.3, 0.5}, q{0.6, 0.1, 0.3};
  std::vector<double> gp(3), gq(3);
  kl_divergence_grad(p, q, gp, gq);
  for (std::size_t i = 0; i < 3; ++i) {
    auto pp = p, pm = p, qp = q, qm = q;
    pp[i] += 1e-7;
    pm[i] -= 1e-7;
    qp[i] += 1e-7;
    qm[i] -= 1e-7;
    CHECK(gp[i] == doctest::Approx((kl_divergence(pp, q) - kl_divergence(pm, q)) / 2e-7).epsilon(1e-6));
    CHECK(gq[i] == doctest::Approx((kl_divergence(p, qp) - kl_divergence(p, qm)) / 2e-7).epsilon(1e-6));
  }
}

TEST_CASE("checkpoint round trip") {
  Checkpoint c;
  c.agent_kind = "dqn";
  c.net = FeedForwardNet::initialized({5, 16, 8, 3}, 77);
  c.net.layers()[1].biases[2] = 1.0 / 3.0;
  c.norm_stats = {81.234567890123, 47.1};
  c.seed = 123;
  c.episodes = 456;
  const std::string bytes = save_checkpoint(c);
  const Checkpoint d = load_checkpoint(bytes);
  CHECK(d.net == c.net);
  CHECK(d.norm_stats.price_mean == c.norm_stats.price_mean);
  CHECK(d.norm_stats.price_std == c.norm_stats.price_std);
  CHECK(d.seed == 123);
  CHECK(d.episodes == 456);
  CHECK(d.agent_kind == "dqn");
  CHECK(save_checkpoint(d) == bytes);
}

TEST_CASE("checkpoint errors") {
  Checkpoint c;
  c.agent_kind = "dqn";
  c.net = FeedForwardNet::initialized({5, 4, 3}, 1);
  const std::string bytes = save_checkpoint(c);
  CHECK_THROWS_KIND(load_checkpoint(bytes.substr(0, bytes.size() / 2)), ErrorKind::kLengthMismatch);
  auto j = nlohmann::json::parse(bytes);
  j["format_version"] = 999;
  CHECK_THROWS_KIND(load_checkpoint(j.dump()), ErrorKind::kUnsupportedVersion);
  j = nlohmann::json::parse(bytes);
  j["layers"][0]["biases"].erase(0);
  CHECK_THROWS_KIND(load_checkpoint(j.dump()), ErrorKind::kLengthMismatch);
  j = nlohmann::json::parse(bytes);
  j["layers"][0]["biases"][0] = "nan";
  CHECK_THROWS_KIND(load_checkpoint(j.dump()), ErrorKind::kNonFinite);
}

TEST_CASE("flat parameters round trip") {
  auto net = FeedForwardNet::initialized({3, 4, 2}, 9);
  auto flat = net.flat_parameters();
  CHECK(flat.size() == net.parameter_count());
  CHECK(flat[0] == net.layers()[0].weights(0, 0));
  CHECK(flat[1] == net.layers()[0].weights(0, 1));
  CHECK(flat[12] == net.layers()[0].biases[0]);
  flat[5] = 42.0;
  net.set_flat_parameters(flat);
  CHECK(net.parameter(5) == 42.0);
  flat.pop_back();
  CHECK_THROWS_KIND(net.set_flat_parameters(flat), ErrorKind::kLengthMismatch);
}
