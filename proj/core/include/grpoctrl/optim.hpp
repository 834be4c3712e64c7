#pragma once

#include <cmath>

#include "grpoctrl/system.hpp"

namespace grpoctrl {

/// Adam on a flat parameter vector.
struct Adam {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  Vec m;
  Vec v;
  long steps = 0;

  /// theta <- theta - lr * m_hat / (sqrt(v_hat) + eps)
  void step(Vec& theta, const Vec& grad) {
    if (m.size() != theta.size()) {
      m = Vec::Zero(theta.size());
      v = Vec::Zero(theta.size());
      steps = 0;
    }
    ++steps;
    m = beta1 * m + (1.0 - beta1) * grad;
    v = beta2 * v + (1.0 - beta2) * grad.cwiseAbs2();
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(steps));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(steps));
    theta.array() -= learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
  }
};

}  // namespace grpoctrl
