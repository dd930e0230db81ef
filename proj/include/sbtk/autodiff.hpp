#ifndef SBTK_AUTODIFF_HPP_
#define SBTK_AUTODIFF_HPP_

#include <Eigen/Dense>
#include <functional>
#include <vector>

namespace sbtk {
namespace ad {

// Minimal reverse-accumulation tape over dense matrices. Covers exactly the
// operations of the stochastic-network ELBO graph: affine maps, elementwise
// nonlinearities, grouped softmax, the relaxation samplers and the KL terms.
// Scalars are 1x1 matrices.

struct Var {
  int id = -1;
};

class Tape {
 public:
  Var constant(Eigen::MatrixXd v);
  Var param(Eigen::MatrixXd v);  // leaf whose gradient is accumulated

  const Eigen::MatrixXd& value(Var v) const { return nodes_[v.id].value; }
  const Eigen::MatrixXd& grad(Var v) const { return nodes_[v.id].grad; }

  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);  // elementwise
  Var matmul(Var a, Var b);
  Var scale(Var a, double c);
  Var add_scalar(Var a, double c);
  Var neg(Var a) { return scale(a, -1.0); }
  Var exp_(Var a);
  Var log_(Var a);
  Var log1m(Var a);       // log(1 - x)
  Var reciprocal(Var a);
  Var sigmoid(Var a);
  Var softplus(Var a);
  Var sum(Var a);  // 1x1
  Var one_minus(Var a);
  // Rowwise softmax over consecutive column blocks of size `group`.
  Var softmax_groups(Var a, int group);
  Var log_softmax_groups(Var a, int group);
  // (L, K) -> (L, K*group), each column repeated `group` times.
  Var repeat_cols(Var a, int group);
  // (B, H) -> (B, H+1) with a trailing ones column.
  Var append_ones(Var a);
  // (L, K) -> (L+1, K) with a trailing ones row.
  Var append_rows_constant_ones(Var a);
  // Running sum along the single row of a (1, K) matrix.
  Var cumsum_row(Var a);
  // (1, K) -> (rows, K)
  Var broadcast_rows(Var a, int rows);
  // Sum over rows b of [logsumexp(logits_b) - logits_b[label_b]].
  Var nll(Var logits, const Eigen::VectorXi& labels);
  // Sum over k of KL(Kumaraswamy(a_k, b_k) || Beta(alpha, beta)); a, b are
  // (1, K); closed-form partials.
  Var kumaraswamy_kl(Var a, Var b, double alpha, double beta);

  void backward(Var out);

 private:
  struct Node {
    Eigen::MatrixXd value;
    Eigen::MatrixXd grad;
    std::function<void(Tape&)> back;  // empty for leaves/constants
  };
  Var push(Eigen::MatrixXd v, std::function<void(Tape&)> back);
  Eigen::MatrixXd& grad_ref(int id) { return nodes_[id].grad; }
  std::vector<Node> nodes_;
};

}  // namespace ad
}  // namespace sbtk

#endif  // SBTK_AUTODIFF_HPP_
