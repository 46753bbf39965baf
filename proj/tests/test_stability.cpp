#include <catch_amalgamated.hpp>

#include <chrono>
#include <fstream>

#include "mplab/stability/report.hpp"

using namespace mplab;
using namespace mplab::stability;
using Catch::Approx;

namespace {

// Two states: s0 -> s1 with reward 1, s1 absorbing with reward 0.
TabularMdp two_state_chain(double gamma, std::size_t actions = 2) {
  TabularMdp m(2, actions, gamma);
  for (std::size_t a = 0; a < actions; ++a) {
    m.p(0, a, 1) = 1.0;
    m.r(0, a, 1) = 1.0;
    m.p(1, a, 1) = 1.0;
  }
  return m;
}

// Independent Bellman oracle: expected reward and expected continuation
// accumulated separately, max taken by explicit comparison.
QTable bellman_oracle(const TabularMdp& m, const QTable& q) {
  QTable out(m.states(), m.actions());
  for (std::size_t s = 0; s < m.states(); ++s)
    for (std::size_t a = 0; a < m.actions(); ++a) {
      double er = 0.0, ev = 0.0;
      for (std::size_t n = 0; n < m.states(); ++n) {
        double best = q(n, m.actions() - 1);
        for (std::size_t b = 0; b + 1 < m.actions(); ++b)
          if (q(n, b) > best) best = q(n, b);
        er += m.p(s, a, n) * m.r(s, a, n);
        ev += m.p(s, a, n) * best;
      }
      out(s, a) = er + m.gamma() * ev;
    }
  return out;
}

QTable random_q(std::size_t s, std::size_t a, Rng& rng, double scale = 5.0) {
  QTable q(s, a);
  for (auto& v : q.values()) v = uniform(rng, -scale, scale);
  return q;
}

}  // namespace

TEST_CASE("bellman_apply examples", "[stability][bellman]") {
  SECTION("self loop with reward 1") {
    auto m = self_loop_mdp(1.0, 0.5);
    CHECK(bellman_apply(m, QTable(1, 1))(0, 0) == 1.0);
  }
  SECTION("two-state chain one backup") {
    auto m = two_state_chain(0.5);
    auto q = bellman_apply(m, QTable(2, 2));
    CHECK(q(0, 0) == 1.0);
    CHECK(q(0, 1) == 1.0);
    CHECK(q(1, 0) == 0.0);
    CHECK(q(1, 1) == 0.0);
  }
  SECTION("random 4x3 matches the oracle") {
    Rng rng(11);
    auto m = random_mdp(4, 3, 0.9, rng);
    m.validate();
    for (int t = 0; t < 20; ++t) {
      auto q = random_q(4, 3, rng);
      auto got = bellman_apply(m, q), want = bellman_oracle(m, q);
      CHECK(sup_distance(got, want) < 1e-13);
    }
  }
  SECTION("shape mismatch") {
    CHECK_THROWS_AS(bellman_apply(two_state_chain(0.5), QTable(3, 2)), ShapeError);
  }
}

TEST_CASE("T* is a gamma contraction on random pairs", "[stability][bellman]") {
  Rng rng(5);
  auto m = random_mdp(5, 3, 0.9, rng);
  for (int t = 0; t < 1000; ++t) {
    auto q1 = random_q(5, 3, rng), q2 = random_q(5, 3, rng);
    const double lhs = sup_distance(bellman_apply(m, q1), bellman_apply(m, q2));
    REQUIRE(lhs <= 0.9 * sup_distance(q1, q2) + 1e-12);
  }
}

TEST_CASE("greedy_policy tie-breaking and scale invariance", "[stability][policy]") {
  QTable q(2, 3);
  q(0, 0) = 1; q(0, 1) = 3; q(0, 2) = 2;
  q(1, 0) = 2; q(1, 1) = 2; q(1, 2) = 1;
  CHECK(greedy_policy(q) == std::vector<std::size_t>{1, 0});
  QTable scaled = q;
  for (auto& v : scaled.values()) v *= 7.5;
  CHECK(greedy_policy(scaled) == greedy_policy(q));
}

TEST_CASE("value_iteration", "[stability][vi]") {
  SECTION("self loop gives the geometric series") {
    auto vi = value_iteration(self_loop_mdp(1.0, 0.5), 1e-12);
    CHECK(vi.q(0, 0) == Approx(2.0).margin(1e-11));
  }
  SECTION("successive differences shrink by gamma") {
    Rng rng(3);
    auto m = random_mdp(6, 2, 0.8, rng);
    auto vi = value_iteration(m, 1e-6);
    for (std::size_t k = 1; k < vi.diffs.size(); ++k)
      CHECK(vi.diffs[k] <= 0.8 * vi.diffs[k - 1] + 1e-14);
  }
  SECTION("random 5x3 fixed point is reproduced by one more backup") {
    Rng rng(17);
    auto m = random_mdp(5, 3, 0.95, rng);
    auto vi = value_iteration(m, 1e-8);
    CHECK(sup_distance(bellman_apply(m, vi.q), vi.q) < 1e-8);
    CHECK(sup_distance(bellman_apply(m, vi.q), vi.q) < 10 * 1e-8);
  }
  SECTION("tolerance must be positive") {
    CHECK_THROWS_AS(value_iteration(self_loop_mdp(1, 0.5), 0.0), PreconditionError);
  }
  SECTION("gamma outside [0,1) is rejected") {
    CHECK_THROWS_AS(TabularMdp(2, 2, 1.0), PreconditionError);
  }
}

TEST_CASE("td_error and q_update examples", "[stability][qlearning]") {
  SECTION("first update from zero") {
    QTable q(2, 1);
    q_update(q, {0, 0, 1.0, 1, false}, 0.95, 0.1);
    CHECK(q(0, 0) == Approx(0.1));
  }
  SECTION("arithmetic on the update rule") {
    QTable q(2, 2);
    q(0, 0) = 1.0;
    q(1, 1) = 3.0;
    q_update(q, {0, 0, 0.5, 1, false}, 0.9, 0.5);
    CHECK(q(0, 0) == Approx(2.1));
  }
  SECTION("td error values") {
    QTable q(2, 2);
    q(0, 0) = 2.0;
    q(1, 0) = 2.0;
    CHECK(td_error(q, {0, 0, 1.0, 1, false}, 0.9) == Approx(0.8));
    QTable z(2, 2);
    CHECK(td_error(z, {0, 0, 1.0, 1, true}, 0.9) == 1.0);
  }
  SECTION("expected td error vanishes at Q*") {
    Rng rng(23);
    auto m = random_mdp(4, 2, 0.9, rng);
    auto q = value_iteration(m, 1e-13).q;
    for (std::size_t s = 0; s < 4; ++s)
      for (std::size_t a = 0; a < 2; ++a) {
        double e = 0.0;
        for (std::size_t n = 0; n < 4; ++n)
          e += m.p(s, a, n) * td_error(q, {s, a, m.r(s, a, n), n, false}, 0.9);
        CHECK(std::abs(e) < 1e-11);
      }
  }
  SECTION("step size outside (0,1] is rejected") {
    QTable q(1, 1);
    CHECK_THROWS_AS(q_update(q, {0, 0, 1.0, 0, false}, 0.5, 1.5), PreconditionError);
  }
}

TEST_CASE("tabular Q-learning reaches Q*", "[stability][qlearning]") {
  const auto m = q_learning_reference_mdp();
  const auto q_star = value_iteration(m, 1e-12).q;
  QLearningOptions opt;
  opt.steps = 1'000'000;
  opt.epsilon = 0.2;
  opt.seed = 42;
  auto res = q_learning_run(m, harmonic_schedule(), opt);
  CHECK(sup_distance(res.q, q_star) < 1e-2);
  for (auto v : res.visits) CHECK(v > 1000);
}

TEST_CASE("generalized_update specializations", "[stability][operators]") {
  SECTION("K=I, D=I, alpha=1 is one Bellman step") {
    Rng rng(2);
    auto m = random_mdp(3, 2, 0.9, rng);
    QVector q(6);
    for (auto& v : q) v = uniform(rng, -1, 1);
    Matrix eye = Matrix::identity(6);
    auto got = generalized_update(q, m, 1.0, eye, Vector(6, 1.0));
    auto want = bellman_apply(m, q);
    CHECK(sup_distance(got, want) < 1e-15);
  }
  SECTION("half step on the self loop") {
    auto m = self_loop_mdp(1.0, 0.5);
    CHECK(generalized_update(QVector{0.0}, m, 0.5, Matrix::identity(1), Vector{1.0})[0] == 0.5);
  }
  SECTION("zero rho freezes that pair") {
    Rng rng(4);
    auto m = random_mdp(2, 2, 0.9, rng);
    QVector q{1, 2, 3, 4};
    Vector rho{0.5, 0.0, 0.25, 0.25};
    for (int i = 0; i < 50; ++i) q = update_uii(q, m, 1.0, rho);
    CHECK(q[1] == 2.0);
  }
  SECTION("K=I with D=I reproduces U^i bit for bit") {
    Rng rng(8);
    auto m = random_mdp(4, 3, 0.95, rng);
    Matrix eye = Matrix::identity(12);
    for (int t = 0; t < 100; ++t) {
      QVector q(12);
      for (auto& v : q) v = uniform(rng, -10, 10);
      const double alpha = uniform(rng, 0.01, 1.0);
      // Direct form of Q + alpha (T*Q - Q) over the same backup.
      const QVector tq = as_vector(bellman_apply(m, as_table(m, q)));
      QVector direct(12);
      for (std::size_t x = 0; x < 12; ++x) direct[x] = q[x] + alpha * (1.0 * (tq[x] - q[x]));
      REQUIRE(generalized_update(q, m, alpha, eye, Vector(12, 1.0)) == direct);
      REQUIRE(update_ui(q, m, alpha) == direct);
    }
  }
}

TEST_CASE("contraction_factor_ui", "[stability][ui]") {
  CHECK(contraction_factor_ui(0.5, 0.95) == Approx(0.975).epsilon(1e-15));
  CHECK(contraction_factor_ui(1.0, 0.0) == 0.0);
  CHECK(contraction_factor_ui(1e-12, 0.5) == Approx(1.0));
  CHECK_THROWS_AS(contraction_factor_ui(0.0, 0.5), PreconditionError);
  CHECK_THROWS_AS(contraction_factor_ui(1.5, 0.5), PreconditionError);
  CHECK_THROWS_AS(contraction_factor_ui(0.5, 1.0), PreconditionError);
}

TEST_CASE("empirical Lipschitz of U^i stays under the bound and approaches it",
          "[stability][ui]") {
  for (double alpha : {0.1, 0.5, 1.0})
    for (double gamma : {0.5, 0.9, 0.95}) {
      auto m = reference_mdp(3, gamma);
      UpdateOp op = [&](const QVector& q) { return update_ui(q, m, alpha); };
      const double bound = contraction_factor_ui(alpha, gamma);
      double prev = 0.0;
      for (std::size_t trials : {10, 100, 1000}) {
        const double est = empirical_lipschitz(op, m.pairs(), trials, 9);
        CHECK(est <= bound + 1e-12);
        CHECK(est >= prev);
        prev = est;
      }
      CHECK(prev > bound - 1e-3);
    }
  SECTION("single self loop attains the bound exactly") {
    auto m = self_loop_mdp(1.0, 0.95);
    UpdateOp op = [&](const QVector& q) { return update_ui(q, m, 0.5); };
    CHECK(empirical_lipschitz(op, 1, 50, 1) == Approx(0.975).epsilon(1e-12));
  }
  SECTION("identity update is exactly 1") {
    UpdateOp id = [](const QVector& q) { return q; };
    CHECK(empirical_lipschitz(id, 7, 100, 3) == 1.0);
  }
}

TEST_CASE("check_uii examples", "[stability][uii]") {
  auto c = check_uii(uniform_distribution(4), 3.0, 0.9);
  CHECK(c.verdict == Verdict::contracts);
  CHECK(c.factor == Approx(0.925));
  CHECK(check_uii(Vector{0.5, 0.5, 0.0}, 1.0, 0.9).verdict == Verdict::inconclusive);
  CHECK(check_uii(uniform_distribution(4), 5.0, 0.9).verdict == Verdict::inconclusive);
  CHECK_THROWS_AS(check_uii(Vector{0.5, 0.6}, 1.0, 0.9), PreconditionError);
}

TEST_CASE("missing data freezes the error on the unsampled pair", "[stability][uii]") {
  auto m = reference_mdp(2);
  const std::size_t n = m.pairs();
  auto res = missing_data_demo(m, n / 2, 0.9 * static_cast<double>(n), 10000, QVector(n, 0.0));
  CHECK(res.missing_error_constant);
  CHECK(res.missing_errors.front() > 0.0);
  CHECK(res.full_support_error < 1e-6);
}

TEST_CASE("check_uiii examples", "[stability][uiii]") {
  auto m = reference_mdp(1);
  const std::size_t n = m.pairs();
  const Vector rho = uniform_distribution(n);
  SECTION("identity kernel has zero off-diagonal mass") {
    auto c = check_uiii(Matrix::identity(n), rho, 1.0, 0.95, m, 200, 1);
    CHECK(c.literal_ii);
    for (double margin : c.margin_ii) CHECK(margin > 0.0);
  }
  SECTION("heavy off-diagonal mass fails condition ii") {
    Matrix k = Matrix::identity(n);
    k(0, 1) = k(1, 0) = 0.5;
    auto c = check_uiii(k, rho, 1.0, 0.95, m, 200, 1);
    CHECK_FALSE(c.literal_ii);
    CHECK(c.margin_ii[0] < 0.0);
  }
  SECTION("identity kernel agrees with U^ii") {
    for (double alpha : {0.5, 3.0, 0.9 * n}) {
      auto c = check_uiii(Matrix::identity(n), rho, alpha, 0.95, m, 500, 77);
      UpdateOp op = [&](const QVector& q) { return update_uii(q, m, alpha, rho); };
      CHECK(std::abs(c.empirical - empirical_lipschitz(op, n, 500, 77)) <= 1e-10);
    }
  }
  SECTION("non-symmetric kernel is rejected") {
    Matrix k = Matrix::identity(n);
    k(0, 1) = 0.1;
    CHECK_THROWS_AS(check_uiii(k, rho, 1.0, 0.95, m, 10, 1), PreconditionError);
  }
  SECTION("sound bound dominates the estimate") {
    Matrix k = Matrix::identity(n);
    for (std::size_t x = 0; x + 1 < n; ++x) k(x, x + 1) = k(x + 1, x) = 0.2;
    auto c = check_uiii(k, rho, 2.0, 0.95, m, 500, 5);
    CHECK(c.empirical <= c.g_bound + 1e-12);
  }
}

TEST_CASE("aggressive generalization diverges", "[stability][pathology]") {
  auto ex = aggressive_generalization_example();
  CHECK(is_positive_definite(ex.kernel));
  const double off = ex.rho[1] * ex.kernel(0, 1);
  CHECK(off > (1 - 0.95) / (1 + 0.95) * ex.rho[0] * ex.kernel(0, 0));
  UpdateOp op = [&](const QVector& q) {
    return generalized_update(q, ex.mdp, ex.alpha, ex.kernel, ex.rho);
  };
  CHECK(empirical_lipschitz(op, 2, 1000, 4) > 1.0);
  auto div = iterate_uiii(ex, QVector{0.0, 0.0}, 200);
  REQUIRE(div.diverged_at.has_value());
  CHECK(*div.diverged_at <= 200);
}

TEST_CASE("large step sizes expand", "[stability][pathology]") {
  auto m = reference_mdp(0);
  const std::size_t n = m.pairs();
  std::vector<double> alphas;
  for (int i = 1; i <= 16; ++i) alphas.push_back(0.25 * i * n);
  auto s = search_expanding_alpha(m, Matrix::identity(n), uniform_distribution(n), alphas, 500, 1);
  REQUIRE(s.expanding_alpha.has_value());
  CHECK(*s.expanding_alpha > 0.9 * n);
  for (std::size_t i = 0; i < alphas.size(); ++i)
    if (alphas[i] < n) CHECK(s.estimates[i] < 1.0);
}

TEST_CASE("sequence_convergence", "[stability][sequence]") {
  SECTION("constant delta keeps the geometric envelope") {
    std::vector<UpdateOp> ups(30, [](const QVector& q) {
      QVector o = q;
      for (auto& v : o) v *= 0.9;
      return o;
    });
    auto r = sequence_convergence(ups, std::vector<double>(30, 0.9), QVector{1.0, -2.0},
                                  QVector{0.0, 0.0});
    CHECK(r.bound_holds);
    REQUIRE(r.contraction_from.has_value());
    CHECK(*r.contraction_from == 0);
    CHECK(r.errors.back() == Approx(2.0 * std::pow(0.9, 30)));
  }
  SECTION("delta of one gives no verdict") {
    std::vector<UpdateOp> ups(5, [](const QVector& q) { return q; });
    auto r = sequence_convergence(ups, std::vector<double>(5, 1.0), QVector{1.0}, QVector{0.0});
    CHECK(r.bound_holds);
    CHECK_FALSE(r.contraction_from.has_value());
  }
  SECTION("alternating step sizes reach Q*") {
    auto m = reference_mdp(4);
    auto q_star = as_vector(value_iteration(m, 1e-13).q);
    std::vector<UpdateOp> ups;
    std::vector<double> deltas;
    for (int i = 0; i < 2000; ++i) {
      const double alpha = i % 2 ? 0.6 : 0.3;
      ups.push_back([&m, alpha](const QVector& q) { return update_ui(q, m, alpha); });
      deltas.push_back(contraction_factor_ui(alpha, m.gamma()));
    }
    auto r = sequence_convergence(ups, deltas, QVector(m.pairs(), 0.0), q_star);
    CHECK(r.bound_holds);
    CHECK(r.errors.back() < 1e-6);
  }
}

TEST_CASE("reference MDPs match the published instances", "[stability][data]") {
  std::ifstream in(MPLAB_DATA_DIR "/reference_mdps.json");
  REQUIRE(in);
  auto j = nlohmann::json::parse(in);
  REQUIRE(j.size() == 20);
  for (std::size_t i = 0; i < 20; ++i) {
    auto want = reference_mdp(i);
    auto got = mdp_from_json(j[i]);
    REQUIRE(got.states() == want.states());
    REQUIRE(got.actions() == want.actions());
    for (std::size_t s = 0; s < want.states(); ++s)
      for (std::size_t a = 0; a < want.actions(); ++a)
        for (std::size_t n = 0; n < want.states(); ++n) {
          CHECK(got.p(s, a, n) == want.p(s, a, n));
          CHECK(got.r(s, a, n) == want.r(s, a, n));
        }
  }
}

TEST_CASE("stability suite passes its guaranteed checks", "[stability][suite]") {
  auto rep = run_stability_suite();
  CHECK(rep.ok());
  CHECK(rep.text.find("disagree") != std::string::npos);
  CHECK(rep.text.find("0.975") != std::string::npos);
  CHECK(rep.csv() == run_stability_suite().csv());
}
