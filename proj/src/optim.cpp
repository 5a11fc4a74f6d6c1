#include "selfpro/optim.hpp"

#include <cmath>

#include "selfpro/error.hpp"

namespace selfpro {

void Optimizer::step(std::span<Matrix* const> params, std::span<const Matrix> grads) {
  if (params.size() != grads.size()) throw Error(ErrorKind::shape, "parameter and gradient counts differ");
  if (first_.empty()) {
    for (Matrix* p : params) {
      first_.push_back(Matrix::Zero(p->rows(), p->cols()));
      if (cfg_.kind == OptimizerKind::adam) second_.push_back(Matrix::Zero(p->rows(), p->cols()));
    }
  }
  ++t_;
  for (std::size_t i = 0; i < params.size(); ++i) {
    Matrix& p = *params[i];
    Matrix g = grads[i];
    if (cfg_.weight_decay != 0.0) g += cfg_.weight_decay * p;
    switch (cfg_.kind) {
      case OptimizerKind::sgd:
        p -= cfg_.lr * g;
        break;
      case OptimizerKind::momentum:
        first_[i] = cfg_.momentum * first_[i] + g;
        p -= cfg_.lr * first_[i];
        break;
      case OptimizerKind::adam: {
        first_[i] = cfg_.beta1 * first_[i] + (1.0 - cfg_.beta1) * g;
        second_[i] = cfg_.beta2 * second_[i] + (1.0 - cfg_.beta2) * g.cwiseProduct(g);
        const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
        p.array() -= cfg_.lr * (first_[i].array() / c1) /
                     ((second_[i].array() / c2).sqrt() + cfg_.epsilon);
        break;
      }
    }
  }
}

}  // namespace selfpro
