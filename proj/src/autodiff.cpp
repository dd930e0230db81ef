#include "sbtk/autodiff.hpp"

#include <cmath>

#include "sbtk/errors.hpp"
#include "sbtk/special.hpp"

namespace sbtk {
namespace ad {

namespace {

Eigen::MatrixXd stable_sigmoid(const Eigen::MatrixXd& x) {
  return x.unaryExpr([](double v) {
    if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
    const double e = std::exp(v);
    return e / (1.0 + e);
  });
}

Eigen::MatrixXd stable_softplus(const Eigen::MatrixXd& x) {
  return x.unaryExpr([](double v) {
    if (v > 30.0) return v;
    if (v < -30.0) return std::exp(v);
    return std::log1p(std::exp(v));
  });
}

}  // namespace

Var Tape::push(Eigen::MatrixXd v, std::function<void(Tape&)> back) {
  Node node;
  node.value = std::move(v);
  node.grad = Eigen::MatrixXd::Zero(node.value.rows(), node.value.cols());
  node.back = std::move(back);
  nodes_.push_back(std::move(node));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Tape::constant(Eigen::MatrixXd v) { return push(std::move(v), nullptr); }
Var Tape::param(Eigen::MatrixXd v) { return push(std::move(v), nullptr); }

Var Tape::add(Var a, Var b) {
  Var out = push(value(a) + value(b), nullptr);
  nodes_[out.id].back = [a, b, out](Tape& t) {
    t.grad_ref(a.id) += t.grad(out);
    t.grad_ref(b.id) += t.grad(out);
  };
  return out;
}

Var Tape::sub(Var a, Var b) {
  Var out = push(value(a) - value(b), nullptr);
  nodes_[out.id].back = [a, b, out](Tape& t) {
    t.grad_ref(a.id) += t.grad(out);
    t.grad_ref(b.id) -= t.grad(out);
  };
  return out;
}

Var Tape::mul(Var a, Var b) {
  Var out = push(value(a).cwiseProduct(value(b)), nullptr);
  nodes_[out.id].back = [a, b, out](Tape& t) {
    t.grad_ref(a.id) += t.grad(out).cwiseProduct(t.value(b));
    t.grad_ref(b.id) += t.grad(out).cwiseProduct(t.value(a));
  };
  return out;
}

Var Tape::matmul(Var a, Var b) {
  Var out = push(value(a) * value(b), nullptr);
  nodes_[out.id].back = [a, b, out](Tape& t) {
    t.grad_ref(a.id).noalias() += t.grad(out) * t.value(b).transpose();
    t.grad_ref(b.id).noalias() += t.value(a).transpose() * t.grad(out);
  };
  return out;
}

Var Tape::scale(Var a, double c) {
  Var out = push(c * value(a), nullptr);
  nodes_[out.id].back = [a, c, out](Tape& t) { t.grad_ref(a.id) += c * t.grad(out); };
  return out;
}

Var Tape::add_scalar(Var a, double c) {
  Var out = push(value(a).array() + c, nullptr);
  nodes_[out.id].back = [a, out](Tape& t) { t.grad_ref(a.id) += t.grad(out); };
  return out;
}

Var Tape::exp_(Var a) {
  Var out = push(value(a).array().exp(), nullptr);
  nodes_[out.id].back = [a, out](Tape& t) {
    t.grad_ref(a.id) += t.grad(out).cwiseProduct(t.value(out));
  };
  return out;
}

Var Tape::log_(Var a) {
  Var out = push(value(a).array().log(), nullptr);
  nodes_[out.id].back = [a, out](Tape& t) {
    t.grad_ref(a.id) += t.grad(out).cwiseQuotient(t.value(a));
  };
  return out;
}

Var Tape::log1m(Var a) {
  Var out = push(value(a).unaryExpr([](double v) { return std::log1p(-v); }), nullptr);
  nodes_[out.id].back = [a, out](Tape& t) {
    t.grad_ref(a.id) -=
        t.grad(out).cwiseQuotient((1.0 - t.value(a).array()).matrix());
  };
  return out;
}

Var Tape::reciprocal(Var a) {
  Var out = push(value(a).cwiseInverse(), nullptr);
  nodes_[out.id].back = [a, out](Tape& t) {
    t.grad_ref(a.id) -= t.grad(out).cwiseProduct(t.value(out).cwiseProduct(t.value(out)));
  };
  return out;
}

Var Tape::sigmoid(Var a) {
  Var out = push(stable_sigmoid(value(a)), nullptr);
  nodes_[out.id].back = [a, out](Tape& t) {
    const auto& s = t.value(out);
    t.grad_ref(a.id) += t.grad(out).cwiseProduct(s.cwiseProduct((1.0 - s.array()).matrix()));
  };
  return out;
}

Var Tape::softplus(Var a) {
  Var out = push(stable_softplus(value(a)), nullptr);
  nodes_[out.id].back = [a, out](Tape& t) {
    t.grad_ref(a.id) += t.grad(out).cwiseProduct(stable_sigmoid(t.value(a)));
  };
  return out;
}

Var Tape::sum(Var a) {
  Eigen::MatrixXd s(1, 1);
  s(0, 0) = value(a).sum();
  Var out = push(std::move(s), nullptr);
  nodes_[out.id].back = [a, out](Tape& t) {
    t.grad_ref(a.id).array() += t.grad(out)(0, 0);
  };
  return out;
}

Var Tape::one_minus(Var a) {
  Var out = push((1.0 - value(a).array()).matrix(), nullptr);
  nodes_[out.id].back = [a, out](Tape& t) { t.grad_ref(a.id) -= t.grad(out); };
  return out;
}

Var Tape::softmax_groups(Var a, int group) {
  const Eigen::MatrixXd& x = value(a);
  if (x.cols() % group != 0) throw DomainError("softmax group size must divide columns");
  Eigen::MatrixXd p(x.rows(), x.cols());
  for (int r = 0; r < x.rows(); ++r) {
    for (int g0 = 0; g0 < x.cols(); g0 += group) {
      const double m = x.row(r).segment(g0, group).maxCoeff();
      Eigen::ArrayXd e = (x.row(r).segment(g0, group).array() - m).exp();
      p.row(r).segment(g0, group) = (e / e.sum()).matrix();
    }
  }
  Var out = push(std::move(p), nullptr);
  nodes_[out.id].back = [a, out, group](Tape& t) {
    const auto& pv = t.value(out);
    const auto& go = t.grad(out);
    auto& ga = t.grad_ref(a.id);
    for (int r = 0; r < pv.rows(); ++r) {
      for (int g0 = 0; g0 < pv.cols(); g0 += group) {
        const auto pseg = pv.row(r).segment(g0, group);
        const auto gseg = go.row(r).segment(g0, group);
        const double dot = pseg.dot(gseg);
        ga.row(r).segment(g0, group) +=
            (pseg.array() * (gseg.array() - dot)).matrix();
      }
    }
  };
  return out;
}

Var Tape::log_softmax_groups(Var a, int group) {
  const Eigen::MatrixXd& x = value(a);
  if (x.cols() % group != 0) throw DomainError("softmax group size must divide columns");
  Eigen::MatrixXd lsm(x.rows(), x.cols());
  for (int r = 0; r < x.rows(); ++r) {
    for (int g0 = 0; g0 < x.cols(); g0 += group) {
      const double m = x.row(r).segment(g0, group).maxCoeff();
      const double lse = m + std::log((x.row(r).segment(g0, group).array() - m).exp().sum());
      lsm.row(r).segment(g0, group) = x.row(r).segment(g0, group).array() - lse;
    }
  }
  Var out = push(std::move(lsm), nullptr);
  nodes_[out.id].back = [a, out, group](Tape& t) {
    const auto& lv = t.value(out);
    const auto& go = t.grad(out);
    auto& ga = t.grad_ref(a.id);
    for (int r = 0; r < lv.rows(); ++r) {
      for (int g0 = 0; g0 < lv.cols(); g0 += group) {
        const Eigen::RowVectorXd p = lv.row(r).segment(g0, group).array().exp().matrix();
        const auto gseg = go.row(r).segment(g0, group);
        const double gsum = gseg.sum();
        ga.row(r).segment(g0, group) += gseg - gsum * p;
      }
    }
  };
  return out;
}

Var Tape::repeat_cols(Var a, int group) {
  const Eigen::MatrixXd& x = value(a);
  Eigen::MatrixXd rep(x.rows(), x.cols() * group);
  for (int c = 0; c < x.cols(); ++c)
    for (int g = 0; g < group; ++g) rep.col(c * group + g) = x.col(c);
  Var out = push(std::move(rep), nullptr);
  nodes_[out.id].back = [a, out, group](Tape& t) {
    const auto& go = t.grad(out);
    auto& ga = t.grad_ref(a.id);
    for (int c = 0; c < ga.cols(); ++c)
      for (int g = 0; g < group; ++g) ga.col(c) += go.col(c * group + g);
  };
  return out;
}

Var Tape::append_ones(Var a) {
  const Eigen::MatrixXd& x = value(a);
  Eigen::MatrixXd ext(x.rows(), x.cols() + 1);
  ext.leftCols(x.cols()) = x;
  ext.col(x.cols()).setOnes();
  Var out = push(std::move(ext), nullptr);
  nodes_[out.id].back = [a, out](Tape& t) {
    t.grad_ref(a.id) += t.grad(out).leftCols(t.value(a).cols());
  };
  return out;
}

Var Tape::append_rows_constant_ones(Var a) {
  const Eigen::MatrixXd& x = value(a);
  Eigen::MatrixXd ext(x.rows() + 1, x.cols());
  ext.topRows(x.rows()) = x;
  ext.row(x.rows()).setOnes();
  Var out = push(std::move(ext), nullptr);
  nodes_[out.id].back = [a, out](Tape& t) {
    t.grad_ref(a.id) += t.grad(out).topRows(t.value(a).rows());
  };
  return out;
}

Var Tape::cumsum_row(Var a) {
  const Eigen::MatrixXd& x = value(a);
  if (x.rows() != 1) throw DomainError("cumsum_row expects a single-row matrix");
  Eigen::MatrixXd c(1, x.cols());
  double run = 0.0;
  for (int j = 0; j < x.cols(); ++j) {
    run += x(0, j);
    c(0, j) = run;
  }
  Var out = push(std::move(c), nullptr);
  nodes_[out.id].back = [a, out](Tape& t) {
    const auto& go = t.grad(out);
    auto& ga = t.grad_ref(a.id);
    double run = 0.0;
    for (int j = static_cast<int>(go.cols()) - 1; j >= 0; --j) {
      run += go(0, j);
      ga(0, j) += run;
    }
  };
  return out;
}

Var Tape::broadcast_rows(Var a, int rows) {
  const Eigen::MatrixXd& x = value(a);
  if (x.rows() != 1) throw DomainError("broadcast_rows expects a single-row matrix");
  Eigen::MatrixXd b = x.replicate(rows, 1);
  Var out = push(std::move(b), nullptr);
  nodes_[out.id].back = [a, out](Tape& t) {
    t.grad_ref(a.id) += t.grad(out).colwise().sum();
  };
  return out;
}

Var Tape::nll(Var logits, const Eigen::VectorXi& labels) {
  const Eigen::MatrixXd& x = value(logits);
  if (x.rows() != labels.size()) throw DomainError("nll label count must match batch size");
  double total = 0.0;
  for (int r = 0; r < x.rows(); ++r) {
    if (labels[r] < 0 || labels[r] >= x.cols()) throw DomainError("nll label out of range");
    const double m = x.row(r).maxCoeff();
    const double lse = m + std::log((x.row(r).array() - m).exp().sum());
    total += lse - x(r, labels[r]);
  }
  Eigen::MatrixXd s(1, 1);
  s(0, 0) = total;
  Var out = push(std::move(s), nullptr);
  Eigen::VectorXi labels_copy = labels;
  nodes_[out.id].back = [logits, out, labels_copy](Tape& t) {
    const auto& x = t.value(logits);
    const double go = t.grad(out)(0, 0);
    auto& g = t.grad_ref(logits.id);
    for (int r = 0; r < x.rows(); ++r) {
      const double m = x.row(r).maxCoeff();
      Eigen::ArrayXd e = (x.row(r).array() - m).exp();
      Eigen::ArrayXd p = e / e.sum();
      g.row(r) += go * p.matrix().transpose();
      g(r, labels_copy[r]) -= go;
    }
  };
  return out;
}

Var Tape::kumaraswamy_kl(Var a, Var b, double alpha, double beta) {
  const Eigen::MatrixXd& av = value(a);
  const Eigen::MatrixXd& bv = value(b);
  if (av.rows() != 1 || bv.rows() != 1 || av.cols() != bv.cols())
    throw DomainError("kumaraswamy_kl expects matching single-row parameters");
  double total = 0.0;
  Eigen::MatrixXd da(1, av.cols()), db(1, av.cols());
  for (int k = 0; k < av.cols(); ++k) {
    const KumaraswamyBetaKl kl = kumaraswamy_beta_kl(av(0, k), bv(0, k), alpha, beta);
    total += kl.value;
    da(0, k) = kl.d_a;
    db(0, k) = kl.d_b;
  }
  Eigen::MatrixXd s(1, 1);
  s(0, 0) = total;
  Var out = push(std::move(s), nullptr);
  nodes_[out.id].back = [a, b, out, da, db](Tape& t) {
    const double go = t.grad(out)(0, 0);
    t.grad_ref(a.id) += go * da;
    t.grad_ref(b.id) += go * db;
  };
  return out;
}

void Tape::backward(Var out) {
  if (value(out).size() != 1) throw DomainError("backward expects a scalar output");
  for (auto& n : nodes_) n.grad.setZero();
  nodes_[out.id].grad(0, 0) = 1.0;
  for (int i = out.id; i >= 0; --i)
    if (nodes_[i].back) nodes_[i].back(*this);
}

}  // namespace ad
}  // namespace sbtk
