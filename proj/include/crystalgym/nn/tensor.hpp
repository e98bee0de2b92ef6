#pragma once

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace crystalgym::nn {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Reverse-mode autodiff over 2-D matrices. Every op builds a node holding its
// value, its parents and a closure that pushes the node's gradient into the
// parents. Graphs are rebuilt on every forward pass.
struct Node {
  Matrix value;
  Matrix grad;  // allocated lazily, same shape as value
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  Matrix& grad_ref();
};

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  bool defined() const noexcept { return node_ != nullptr; }
  Eigen::Index rows() const { return node_->value.rows(); }
  Eigen::Index cols() const { return node_->value.cols(); }
  const Matrix& value() const { return node_->value; }
  Matrix& mutable_value() { return node_->value; }
  // Zero matrix when no gradient reached this tensor.
  Matrix grad() const;
  double item() const;  // ShapeError unless 1x1
  bool requires_grad() const noexcept { return node_ && node_->requires_grad; }
  const std::shared_ptr<Node>& node() const noexcept { return node_; }
  void zero_grad();

 private:
  std::shared_ptr<Node> node_;
};

// While alive, ops on this thread record no graph (values only).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};
bool grad_enabled() noexcept;

Tensor constant(Matrix value);
Tensor parameter(Matrix value);  // leaf that collects gradients
Tensor detach(const Tensor& t);

// Accumulates d(loss)/d(leaf) into every reachable parameter. Throws
// GraphError for an undefined or non-scalar loss.
void backward(const Tensor& loss);

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);  // x W + b (b: 1 x cols)
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);  // elementwise
Tensor scale(const Tensor& a, double s);
Tensor add_scalar(const Tensor& a, double s);
Tensor add_row(const Tensor& a, const Tensor& row);  // row: 1 x cols, broadcast down
Tensor add_col(const Tensor& a, const Tensor& col);  // col: rows x 1, broadcast across
Tensor mul_col(const Tensor& a, const Tensor& col);
Tensor softplus(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor square(const Tensor& a);
Tensor minimum(const Tensor& a, const Tensor& b);  // ties route the gradient to a
// Values clipped into [lo, hi]; gradient is zero where clipping binds.
Tensor clamp(const Tensor& a, double lo, double hi);
Tensor concat_cols(std::span<const Tensor> parts);
// Row i of the result is row index[i] of a, or zeros when index[i] < 0.
Tensor gather_rows(const Tensor& a, std::span<const int> index);
// Row s of the result is the mean of the rows r with segment[r] == s (zeros
// for empty segments). Sums run in row order.
Tensor segment_mean(const Tensor& a, std::span<const int> segment, Eigen::Index segments);
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
Tensor row_sum(const Tensor& a);   // rows x 1
Tensor row_mean(const Tensor& a);  // rows x 1
Tensor row_max(const Tensor& a);   // rows x 1, gradient to the first maximum
Tensor log_softmax(const Tensor& a);
Tensor softmax(const Tensor& a);
// Entry (i, index[i]) of each row: rows x 1.
Tensor pick(const Tensor& a, std::span<const int> index);

// Named trainable tensors. Copies made by clone() share nothing.
struct NamedParameter {
  std::string name;
  Tensor tensor;
};

class ParameterSet {
 public:
  void add(std::string name, Matrix value);
  std::size_t size() const noexcept { return params_.size(); }
  std::size_t scalar_count() const;
  const NamedParameter& operator[](std::size_t i) const { return params_[i]; }
  NamedParameter& operator[](std::size_t i) { return params_[i]; }
  const Tensor& get(std::string_view name) const;  // LookupError
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  ParameterSet clone() const;
  void copy_from(const ParameterSet& other);                   // ShapeError on mismatch
  void soft_update(const ParameterSet& online, double tau);    // this <- tau*online + (1-tau)*this
  void zero_grad();
  std::vector<double> flatten() const;
  std::vector<double> flatten_grad() const;
  void assign(std::span<const double> flat);                   // ShapeError on size mismatch

 private:
  std::vector<NamedParameter> params_;
};

class Adam {
 public:
  struct Options {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double grad_clip = 0.0;  // global L2 norm clip, 0 = off
  };
  Adam(const ParameterSet& params, Options options);
  // Applies one update from the gradients currently stored in params, then
  // clears them. Throws ShapeError when params do not match the ones the
  // optimiser was built for.
  void step(ParameterSet& params);
  std::size_t steps() const noexcept { return t_; }
  const Options& options() const noexcept { return options_; }
  void set_learning_rate(double lr) noexcept { options_.learning_rate = lr; }

 private:
  Options options_;
  std::vector<Matrix> m_, v_;
  std::size_t t_ = 0;
};

}  // namespace crystalgym::nn
