#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mplab/stability/mdp.hpp"

namespace mplab::stability {

/// Q viewed as a vector in R^{|S||A|}.
using QVector = Vector;
using UpdateOp = std::function<QVector(const QVector&)>;

inline QTable as_table(const TabularMdp& mdp, const QVector& q) {
  check_size(q.size(), mdp.pairs(), "Q vector");
  QTable t(mdp.states(), mdp.actions());
  std::copy(q.begin(), q.end(), t.values().begin());
  return t;
}

inline QVector as_vector(const QTable& q) { return QVector(q.values().begin(), q.values().end()); }

inline QVector bellman_apply(const TabularMdp& mdp, const QVector& q) {
  return as_vector(bellman_apply(mdp, as_table(mdp, q)));
}

/// Replay distribution rho over flattened pairs; entries >= 0 summing to 1.
inline void validate_distribution(std::span<const double> rho) {
  double total = 0.0;
  for (double r : rho) {
    require(r >= 0.0 && std::isfinite(r), "replay distribution entries must be non-negative");
    total += r;
  }
  require(std::abs(total - 1.0) <= 1e-12, "replay distribution must sum to 1");
}

inline Vector uniform_distribution(std::size_t n) { return Vector(n, 1.0 / static_cast<double>(n)); }

inline bool is_symmetric(const Matrix& k) {
  if (k.rows() != k.cols()) return false;
  for (std::size_t i = 0; i < k.rows(); ++i)
    for (std::size_t j = 0; j < i; ++j)
      if (k(i, j) != k(j, i)) return false;
  return true;
}

/// Cholesky succeeds with strictly positive pivots.
inline bool is_positive_definite(const Matrix& k) {
  if (!is_symmetric(k)) return false;
  const std::size_t n = k.rows();
  Matrix l(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double d = k(j, j);
    for (std::size_t c = 0; c < j; ++c) d -= l(j, c) * l(j, c);
    if (!(d > 0.0)) return false;
    l(j, j) = std::sqrt(d);
    for (std::size_t i = j + 1; i < n; ++i) {
      double v = k(i, j);
      for (std::size_t c = 0; c < j; ++c) v -= l(i, c) * l(j, c);
      l(i, j) = v / l(j, j);
    }
  }
  return true;
}

/// Q' = Q + alpha K D_rho (T*Q - Q)
inline QVector generalized_update(const QVector& q, const TabularMdp& mdp, double alpha,
                                  const Matrix& k, std::span<const double> rho) {
  const std::size_t n = mdp.pairs();
  check_size(q.size(), n, "Q vector");
  check_size(rho.size(), n, "replay distribution");
  if (k.rows() != n || k.cols() != n) throw ShapeError("kernel must be |S||A| x |S||A|");
  const QVector tq = bellman_apply(mdp, q);
  Vector weighted(n);
  for (std::size_t y = 0; y < n; ++y) weighted[y] = rho[y] * (tq[y] - q[y]);
  QVector out(n);
  for (std::size_t x = 0; x < n; ++x) {
    double s = 0.0;
    for (std::size_t y = 0; y < n; ++y) s += k(x, y) * weighted[y];
    out[x] = q[x] + alpha * s;
  }
  return out;
}

/// Q' = Q + alpha (T*Q - Q)
inline QVector update_ui(const QVector& q, const TabularMdp& mdp, double alpha) {
  const QVector tq = bellman_apply(mdp, q);
  QVector out(q.size());
  for (std::size_t x = 0; x < q.size(); ++x) out[x] = q[x] + alpha * (tq[x] - q[x]);
  return out;
}

/// Q' = Q + alpha D_rho (T*Q - Q)
inline QVector update_uii(const QVector& q, const TabularMdp& mdp, double alpha,
                          std::span<const double> rho) {
  check_size(rho.size(), q.size(), "replay distribution");
  const QVector tq = bellman_apply(mdp, q);
  QVector out(q.size());
  for (std::size_t x = 0; x < q.size(); ++x) out[x] = q[x] + alpha * (rho[x] * (tq[x] - q[x]));
  return out;
}

inline double contraction_factor_ui(double alpha, double gamma) {
  require(alpha > 0.0 && alpha <= 1.0, "alpha must lie in (0,1]");
  require(gamma >= 0.0 && gamma < 1.0, "gamma must lie in [0,1)");
  return 1.0 - alpha * (1.0 - gamma);
}

enum class Verdict { contracts, inconclusive, expands };

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::contracts: return "contracts";
    case Verdict::inconclusive: return "inconclusive";
    case Verdict::expands: return "expands";
  }
  return "?";
}

struct UiiCheck {
  Verdict verdict = Verdict::inconclusive;
  /// 1 - alpha min(rho) (1 - gamma); an upper bound only when the verdict is inconclusive.
  double factor = 1.0;
  double rho_min = 0.0;
  double rho_max = 0.0;
};

inline UiiCheck check_uii(std::span<const double> rho, double alpha, double gamma) {
  validate_distribution(rho);
  UiiCheck c;
  c.rho_min = *std::min_element(rho.begin(), rho.end());
  c.rho_max = *std::max_element(rho.begin(), rho.end());
  c.factor = 1.0 - alpha * c.rho_min * (1.0 - gamma);
  const bool ok = c.rho_min > 0.0 && alpha > 0.0 && alpha < 1.0 / c.rho_max;
  c.verdict = ok ? Verdict::contracts : Verdict::inconclusive;
  return c;
}

/// Max over trials of ||U Q1 - U Q2|| / ||Q1 - Q2|| in the sup norm. Even trials
/// draw independent uniform pairs; odd trials draw a constant offset plus a
/// perturbation whose scale cycles over several decades, which probes the
/// direction where Bellman backups are tight.
inline double empirical_lipschitz(const UpdateOp& op, std::size_t dim, std::size_t trials,
                                  std::uint64_t seed, double scale = 10.0) {
  require(trials >= 1, "empirical_lipschitz needs at least one trial");
  Rng rng = rng_fork(seed, "lipschitz");
  double worst = 0.0;
  QVector q1(dim), q2(dim);
  for (std::size_t t = 0; t < trials; ++t) {
    for (auto& v : q1) v = uniform(rng, -scale, scale);
    if (t % 2 == 0) {
      for (auto& v : q2) v = uniform(rng, -scale, scale);
    } else {
      const double offset = uniform(rng, -scale, scale);
      const double eps = scale * std::pow(10.0, -static_cast<double>((t / 2) % 6));
      for (std::size_t i = 0; i < dim; ++i) q2[i] = q1[i] + offset + eps * uniform(rng, -1.0, 1.0);
    }
    const double den = sup_distance(q1, q2);
    if (den == 0.0) continue;
    worst = std::max(worst, sup_distance(op(q1), op(q2)) / den);
  }
  return worst;
}

struct UiiiCheck {
  /// alpha rho_x K_xx > 1 per row, as literally stated.
  std::vector<bool> condition_i;
  /// (1-gamma) rho_x K_xx - (1+gamma) sum_{y!=x} rho_y |K_xy| per row; >= 0 means ii) holds.
  std::vector<double> margin_ii;
  bool literal_i = false;
  bool literal_ii = false;
  Verdict literal = Verdict::inconclusive;
  /// max_x sum_y (alpha gamma rho_y |K_xy| + |delta_xy - alpha rho_y K_xy|): a sound sup-norm bound.
  double g_bound = 0.0;
  /// max_x (1 + (1+gamma) sum_{y!=x} rho_y |K_xy| - (1-gamma) rho_x K_xx), the alpha-free closed form.
  double g_closed_form = 0.0;
  double empirical = 0.0;
  Verdict empirical_verdict = Verdict::inconclusive;
  bool disagree = false;
};

/// Evaluates both literal conditions, the bound they come from, and an
/// empirical Lipschitz estimate on `mdp`. The empirical verdict wins when they disagree.
inline UiiiCheck check_uiii(const Matrix& k, std::span<const double> rho, double alpha,
                            double gamma, const TabularMdp& mdp, std::size_t trials,
                            std::uint64_t seed) {
  require(is_symmetric(k), "kernel must be symmetric");
  validate_distribution(rho);
  const std::size_t n = k.rows();
  check_size(rho.size(), n, "replay distribution");
  UiiiCheck c;
  c.literal_i = c.literal_ii = true;
  c.g_closed_form = -INFINITY;
  for (std::size_t x = 0; x < n; ++x) {
    double off = 0.0, row_bound = 0.0;
    for (std::size_t y = 0; y < n; ++y) {
      if (y != x) off += rho[y] * std::abs(k(x, y));
      row_bound += alpha * gamma * rho[y] * std::abs(k(x, y)) +
                   std::abs((x == y ? 1.0 : 0.0) - alpha * rho[y] * k(x, y));
    }
    const bool ci = alpha * rho[x] * k(x, x) > 1.0;
    const double m = (1.0 - gamma) * rho[x] * k(x, x) - (1.0 + gamma) * off;
    c.condition_i.push_back(ci);
    c.margin_ii.push_back(m);
    c.literal_i = c.literal_i && ci;
    c.literal_ii = c.literal_ii && m >= 0.0;
    c.g_bound = std::max(c.g_bound, row_bound);
    c.g_closed_form = std::max(c.g_closed_form, 1.0 - m);
  }
  c.literal = c.literal_i && c.literal_ii ? Verdict::contracts : Verdict::expands;
  const std::vector<double> r(rho.begin(), rho.end());
  UpdateOp op = [&](const QVector& q) { return generalized_update(q, mdp, alpha, k, r); };
  c.empirical = empirical_lipschitz(op, n, trials, seed);
  if (c.g_bound < 1.0)
    c.empirical_verdict = Verdict::contracts;
  else if (c.empirical > 1.0)
    c.empirical_verdict = Verdict::expands;
  else
    c.empirical_verdict = Verdict::inconclusive;
  c.disagree = c.literal != c.empirical_verdict;
  return c;
}

struct SequenceReport {
  std::vector<double> errors;    ///< ||Q* - Q^i|| for i = 0..n
  std::vector<double> envelope;  ///< ||Q* - Q^0|| prod_{j<i} delta_j
  bool bound_holds = true;
  /// First stage k with delta_j in [0,1) for every j >= k, if any.
  std::optional<std::size_t> contraction_from;
  QVector final_q;
};

inline SequenceReport sequence_convergence(const std::vector<UpdateOp>& updates,
                                           const std::vector<double>& deltas, const QVector& q0,
                                           const QVector& q_star, double slack = 1e-12) {
  require(updates.size() == deltas.size(), "one Lipschitz constant per update");
  SequenceReport rep;
  QVector q = q0;
  const double e0 = sup_distance(q_star, q0);
  double env = e0;
  rep.errors.push_back(e0);
  rep.envelope.push_back(env);
  for (std::size_t j = 0; j < updates.size(); ++j) {
    q = updates[j](q);
    env *= deltas[j];
    const double e = sup_distance(q_star, q);
    rep.errors.push_back(e);
    rep.envelope.push_back(env);
    if (e > env + slack * std::max(1.0, e0)) rep.bound_holds = false;
  }
  std::size_t k = deltas.size();
  while (k > 0 && deltas[k - 1] >= 0.0 && deltas[k - 1] < 1.0) --k;
  if (k < deltas.size()) rep.contraction_from = k;
  rep.final_q = std::move(q);
  return rep;
}

}  // namespace mplab::stability
