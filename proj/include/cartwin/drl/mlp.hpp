#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "cartwin/errors.hpp"
#include "cartwin/rng.hpp"

namespace cartwin {

template <class S>
using MatX = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <class S>
using VecX = Eigen::Matrix<S, Eigen::Dynamic, 1>;

/// Flat view over one parameter tensor, used by the optimizer, soft
/// updates and serialization. Gradients live alongside the values.
template <class S>
struct TensorRef {
  S* value;
  S* grad;
  Eigen::Index size;
};

/// Fully connected layer with cached input for the backward pass.
/// Batches are column-major: one column per sample.
template <class S>
struct DenseLayer {
  MatX<S> w;
  VecX<S> b;
  MatX<S> dw;
  VecX<S> db;
  MatX<S> x_cache;

  void init(Eigen::Index out, Eigen::Index in, RngStream& rng,
            double scale = 0.0) {
    const double limit = scale > 0.0 ? scale : 1.0 / std::sqrt(double(in));
    w.resize(out, in);
    b.resize(out);
    for (Eigen::Index i = 0; i < w.size(); ++i) {
      w.data()[i] = static_cast<S>(rng.uniform(-limit, limit));
    }
    for (Eigen::Index i = 0; i < b.size(); ++i) {
      b(i) = static_cast<S>(rng.uniform(-limit, limit));
    }
    dw = MatX<S>::Zero(out, in);
    db = VecX<S>::Zero(out);
  }

  MatX<S> forward(const MatX<S>& x) {
    x_cache = x;
    return (w * x).colwise() + b;
  }

  /// Overwrites dw/db (no accumulation), returns gradient w.r.t. x.
  MatX<S> backward(const MatX<S>& g) {
    dw.noalias() = g * x_cache.transpose();
    db = g.rowwise().sum();
    return w.transpose() * g;
  }

  void collect(std::vector<TensorRef<S>>& out) {
    out.push_back({w.data(), dw.data(), w.size()});
    out.push_back({b.data(), db.data(), b.size()});
  }
};

template <class S>
MatX<S> relu(const MatX<S>& z) {
  return z.cwiseMax(S(0));
}

template <class S>
MatX<S> relu_backward(const MatX<S>& z, const MatX<S>& g) {
  return (z.array() > S(0)).template cast<S>() * g.array();
}

/// Policy network: two ReLU hidden layers and a tanh output scaled by the
/// caller, so actions are bounded by construction. Produces u in [-1, 1].
template <class S>
class ActorNet {
 public:
  ActorNet(Eigen::Index n_obs, Eigen::Index hidden, RngStream& rng) {
    l1.init(hidden, n_obs, rng);
    l2.init(hidden, hidden, rng);
    l3.init(1, hidden, rng, 3e-3);
  }

  MatX<S> forward(const MatX<S>& obs) {
    z1 = l1.forward(obs);
    a1 = relu(z1);
    z2 = l2.forward(a1);
    a2 = relu(z2);
    z3 = l3.forward(a2);
    u = z3.array().tanh();
    return u;
  }

  /// du: gradient of the objective w.r.t. the tanh output.
  void backward(const MatX<S>& du) {
    const MatX<S> dz3 = du.array() * (S(1) - u.array().square());
    const MatX<S> da2 = l3.backward(dz3);
    const MatX<S> dz2 = relu_backward(z2, da2);
    const MatX<S> da1 = l2.backward(dz2);
    const MatX<S> dz1 = relu_backward(z1, da1);
    l1.backward(dz1);
  }

  std::vector<TensorRef<S>> parameters() {
    std::vector<TensorRef<S>> out;
    l1.collect(out);
    l2.collect(out);
    l3.collect(out);
    return out;
  }

  /// Smallest |preactivation| seen in the last forward pass; used by the
  /// gradient checks to stay away from ReLU kinks.
  S min_preactivation_magnitude() const {
    return std::min(z1.cwiseAbs().minCoeff(), z2.cwiseAbs().minCoeff());
  }

  DenseLayer<S> l1, l2, l3;

 private:
  MatX<S> z1, a1, z2, a2, z3, u;
};

/// Action-value network: a state path (two ReLU layers), an action path
/// (two ReLU layers), elementwise sum merged through a ReLU, then a
/// linear head to the scalar value.
template <class S>
class CriticNet {
 public:
  CriticNet(Eigen::Index n_obs, Eigen::Index n_act, Eigen::Index hidden,
            Eigen::Index action_hidden, RngStream& rng) {
    s1.init(hidden, n_obs, rng);
    s2.init(hidden, hidden, rng);
    a1.init(action_hidden, n_act, rng);
    a2.init(hidden, action_hidden, rng);
    out.init(1, hidden, rng, 3e-3);
  }

  MatX<S> forward(const MatX<S>& obs, const MatX<S>& act) {
    zs1 = s1.forward(obs);
    hs1 = relu(zs1);
    zs2 = s2.forward(hs1);
    hs2 = relu(zs2);
    za1 = a1.forward(act);
    ha1 = relu(za1);
    za2 = a2.forward(ha1);
    ha2 = relu(za2);
    zm = hs2 + ha2;
    hm = relu(zm);
    return out.forward(hm);
  }

  /// dq: gradient w.r.t. the scalar output (1 x batch). Returns the
  /// gradient w.r.t. the action input when requested.
  MatX<S> backward(const MatX<S>& dq, bool need_daction) {
    const MatX<S> dhm = out.backward(dq);
    const MatX<S> dzm = relu_backward(zm, dhm);
    // state branch
    const MatX<S> dzs2 = relu_backward(zs2, dzm);
    const MatX<S> dhs1 = s2.backward(dzs2);
    const MatX<S> dzs1 = relu_backward(zs1, dhs1);
    s1.backward(dzs1);
    // action branch
    const MatX<S> dza2 = relu_backward(za2, dzm);
    const MatX<S> dha1 = a2.backward(dza2);
    const MatX<S> dza1 = relu_backward(za1, dha1);
    const MatX<S> dact = a1.backward(dza1);
    return need_daction ? dact : MatX<S>();
  }

  std::vector<TensorRef<S>> parameters() {
    std::vector<TensorRef<S>> refs;
    s1.collect(refs);
    s2.collect(refs);
    a1.collect(refs);
    a2.collect(refs);
    out.collect(refs);
    return refs;
  }

  S min_preactivation_magnitude() const {
    S m = std::min(zs1.cwiseAbs().minCoeff(), zs2.cwiseAbs().minCoeff());
    m = std::min(m, za1.cwiseAbs().minCoeff());
    m = std::min(m, za2.cwiseAbs().minCoeff());
    return std::min(m, zm.cwiseAbs().minCoeff());
  }

  DenseLayer<S> s1, s2, a1, a2, out;

 private:
  MatX<S> zs1, hs1, zs2, hs2, za1, ha1, za2, ha2, zm, hm;
};

/// Adam with bias correction, one slot pair per tensor.
template <class S>
class Adam {
 public:
  explicit Adam(const std::vector<TensorRef<S>>& params, double lr)
      : lr_(lr) {
    for (const auto& p : params) {
      m_.emplace_back(VecX<S>::Zero(p.size));
      v_.emplace_back(VecX<S>::Zero(p.size));
    }
  }

  void step(const std::vector<TensorRef<S>>& params) {
    ++t_;
    const S b1 = S(0.9), b2 = S(0.999), eps = S(1e-8);
    const S corr1 = S(1) - std::pow(b1, S(t_));
    const S corr2 = S(1) - std::pow(b2, S(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      Eigen::Map<VecX<S>> value(params[i].value, params[i].size);
      Eigen::Map<const VecX<S>> grad(params[i].grad, params[i].size);
      m_[i] = b1 * m_[i] + (S(1) - b1) * grad;
      v_[i] = b2 * v_[i] + (S(1) - b2) * grad.cwiseProduct(grad);
      const auto mhat = m_[i].array() / corr1;
      const auto vhat = v_[i].array() / corr2;
      value.array() -= S(lr_) * mhat / (vhat.sqrt() + eps);
    }
  }

 private:
  double lr_;
  int t_ = 0;
  std::vector<VecX<S>> m_, v_;
};

/// Polyak averaging: target <- tau * source + (1 - tau) * target.
template <class S>
void soft_update(const std::vector<TensorRef<S>>& source,
                 const std::vector<TensorRef<S>>& target, double tau) {
  if (source.size() != target.size()) {
    throw std::invalid_argument("soft_update: parameter list mismatch");
  }
  const S t = S(tau);
  for (std::size_t i = 0; i < source.size(); ++i) {
    Eigen::Map<const VecX<S>> s(source[i].value, source[i].size);
    Eigen::Map<VecX<S>> d(target[i].value, target[i].size);
    d = t * s + (S(1) - t) * d;
  }
}

/// Copy source parameters into target (hard sync).
template <class S>
void hard_update(const std::vector<TensorRef<S>>& source,
                 const std::vector<TensorRef<S>>& target) {
  soft_update(source, target, 1.0);
}

}  // namespace cartwin
