#pragma once

#include <string>
#include <vector>

#include "mplab/agent/observation.hpp"
#include "mplab/agent/replay.hpp"
#include "mplab/tensor/checkpoint.hpp"
#include "mplab/tensor/dense.hpp"
#include "mplab/tensor/lstm.hpp"

namespace mplab::agent {

using nn::Activation;
using nn::LstmCell;
using nn::Mlp;
using nn::ParamList;
using nn::Vector;

inline constexpr std::size_t kFeatures = 6;
inline constexpr std::size_t kActionDims = 2;  ///< window adjust, schedule logit

struct NetShape {
  std::size_t representation = 64;
  std::size_t hidden = 128;
};

/// Observation scaled to order one: rates per 1000 packets/s, times per 100 ms,
/// window change per 10 packets.
inline Vector featurize(const SubflowObservation& o) {
  return {o.sending_rate / 1000.0, o.throughput / 1000.0, o.rtt / 0.1,
          o.window_change / 10.0,  o.schedule_weight,     o.rtt_diff / 0.1};
}

inline std::vector<Vector> featurize(const ConnectionState& s) {
  require(!s.empty(), "connection state needs at least one subflow");
  std::vector<Vector> out;
  out.reserve(s.size());
  for (const auto& o : s) out.push_back(featurize(o));
  return out;
}

struct Representation {
  Vector final_state;
  std::vector<Vector> features;
};

/// Representation LSTM plus per-subflow actor and critic heads with shared
/// weights. The actor reads [f; x_n] and emits tanh(window, logit); the
/// critic reads [f; x_n; a_n] and the connection value is the sum over subflows.
struct AgentNets {
  LstmCell representation;
  Mlp actor;
  Mlp critic;

  AgentNets() : AgentNets(NetShape{}) {}
  explicit AgentNets(NetShape shape)
      : representation(kFeatures, shape.representation),
        actor({shape.representation + kFeatures, shape.hidden, shape.hidden, kActionDims},
              Activation::tanh, Activation::tanh),
        critic({shape.representation + kFeatures + kActionDims, shape.hidden, shape.hidden, 1},
               Activation::tanh, Activation::linear) {}

  void initialize(Rng& rng) {
    representation.initialize(rng);
    actor.initialize(rng);
    critic.initialize(rng);
  }

  ParamList representation_params() { return representation.params("representation"); }
  ParamList actor_params() { return actor.params("actor"); }
  ParamList critic_params() { return critic.params("critic"); }
  ParamList params() {
    ParamList out = representation_params();
    for (auto& p : actor_params()) out.push_back(p);
    for (auto& p : critic_params()) out.push_back(p);
    return out;
  }

  Representation encode(const ConnectionState& s, LstmCell::Tape* tape = nullptr) const {
    Representation r;
    r.features = featurize(s);
    r.final_state = representation.run(r.features, tape).hidden;
    return r;
  }

  AgentAction act(const Representation& r) const {
    AgentAction a;
    for (const auto& x : r.features) {
      const auto out = actor.infer(nn::concat(r.final_state, x));
      a.window_adjust.push_back(out[0]);
      a.schedule_logit.push_back(out[1]);
    }
    return a;
  }

  double value(const Representation& r, const AgentAction& a) const {
    nn::check_size(a.size(), r.features.size(), "action");
    double q = 0.0;
    for (std::size_t n = 0; n < r.features.size(); ++n)
      q += critic.infer(critic_input(r, n, a))[0];
    return q;
  }

  static Vector critic_input(const Representation& r, std::size_t n, const AgentAction& a) {
    Vector in = nn::concat(r.final_state, r.features[n]);
    in.push_back(a.window_adjust[n]);
    in.push_back(a.schedule_logit[n]);
    return in;
  }
};

/// target <- tau * online + (1 - tau) * target, tensor by tensor, evaluated as
/// target + tau * (online - target) so equal tensors stay bit-identical.
inline void soft_update(ParamList online, ParamList target, double tau) {
  require(tau >= 0.0 && tau <= 1.0, "soft update coefficient must lie in [0,1]");
  if (online.size() != target.size()) throw ShapeError("target network layout differs from online");
  for (std::size_t i = 0; i < online.size(); ++i) {
    const auto& o = online[i];
    auto& t = target[i];
    if (o.rows != t.rows || o.cols != t.cols)
      throw ShapeError("target shape mismatch for " + t.name);
    for (std::size_t k = 0; k < o.value.size(); ++k)
      t.value[k] += tau * (o.value[k] - t.value[k]);
  }
}

inline void soft_update(AgentNets& online, AgentNets& target, double tau) {
  soft_update(online.params(), target.params(), tau);
}

inline void copy_params(AgentNets& from, AgentNets& to) { soft_update(from, to, 1.0); }

}  // namespace mplab::agent
