#include "crystalgym/nn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "crystalgym/core/errors.hpp"

namespace crystalgym::nn {

namespace {

thread_local bool t_grad_enabled = true;

std::string shape(const Matrix& m) { return std::to_string(m.rows()) + "x" + std::to_string(m.cols()); }

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.defined() || !b.defined()) throw GraphError(std::string(op) + ": undefined operand");
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(op) + ": " + shape(a.value()) + " vs " + shape(b.value()));
  }
}

void require_defined(const Tensor& a, const char* op) {
  if (!a.defined()) throw GraphError(std::string(op) + ": undefined operand");
}

// Output node; parents are kept only when a gradient can flow.
Tensor make(Matrix value, std::initializer_list<Tensor> inputs, std::function<void(Node&)> fn) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  if (t_grad_enabled) {
    for (const auto& t : inputs) n->requires_grad = n->requires_grad || t.requires_grad();
  }
  if (n->requires_grad) {
    for (const auto& t : inputs) n->parents.push_back(t.node());
    n->backward = std::move(fn);
  }
  return Tensor(std::move(n));
}

bool wants(const Node& self, std::size_t i) { return self.parents[i]->requires_grad; }
Matrix& g(Node& self, std::size_t i) { return self.parents[i]->grad_ref(); }

}  // namespace

NoGradGuard::NoGradGuard() : previous_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = previous_; }
bool grad_enabled() noexcept { return t_grad_enabled; }

Matrix& Node::grad_ref() {
  if (grad.rows() != value.rows() || grad.cols() != value.cols()) grad = Matrix::Zero(value.rows(), value.cols());
  return grad;
}

Matrix Tensor::grad() const {
  if (!node_) throw GraphError("grad of an undefined tensor");
  if (node_->grad.rows() == node_->value.rows() && node_->grad.cols() == node_->value.cols()) return node_->grad;
  return Matrix::Zero(node_->value.rows(), node_->value.cols());
}

double Tensor::item() const {
  if (!node_) throw GraphError("item of an undefined tensor");
  if (node_->value.size() != 1) throw ShapeError("item() needs a 1x1 tensor, got " + shape(node_->value));
  return node_->value(0, 0);
}

void Tensor::zero_grad() {
  if (node_) node_->grad.resize(0, 0);
}

Tensor constant(Matrix value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  return Tensor(std::move(n));
}

Tensor parameter(Matrix value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->requires_grad = true;
  return Tensor(std::move(n));
}

Tensor detach(const Tensor& t) {
  require_defined(t, "detach");
  return constant(t.value());
}

void backward(const Tensor& loss) {
  if (!loss.defined()) throw GraphError("backward on an undefined tensor (no forward pass recorded)");
  if (loss.value().size() != 1) throw GraphError("backward needs a scalar loss, got " + shape(loss.value()));
  if (!loss.requires_grad()) return;

  // Iterative post-order DFS gives a topological order (parents first).
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack{{loss.node().get(), 0}};
  seen.insert(loss.node().get());
  while (!stack.empty()) {
    auto& [n, i] = stack.back();
    if (i < n->parents.size()) {
      Node* p = n->parents[i++].get();
      if (p->requires_grad && seen.insert(p).second) stack.push_back({p, 0});
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }
  // Interior gradients are per call; leaves accumulate across calls.
  for (Node* n : order) {
    if (!n->parents.empty()) n->grad = Matrix::Zero(n->value.rows(), n->value.cols());
  }
  loss.node()->grad_ref().array() += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward) n->backward(*n);
  }
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_defined(a, "matmul");
  require_defined(b, "matmul");
  if (a.cols() != b.rows()) throw ShapeError("matmul: " + shape(a.value()) + " x " + shape(b.value()));
  Matrix out = a.value() * b.value();
  return make(std::move(out), {a, b}, [](Node& self) {
    const Matrix& A = self.parents[0]->value;
    const Matrix& B = self.parents[1]->value;
    if (wants(self, 0)) g(self, 0).noalias() += self.grad * B.transpose();
    if (wants(self, 1)) g(self, 1).noalias() += A.transpose() * self.grad;
  });
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  require_defined(x, "linear");
  require_defined(w, "linear");
  require_defined(b, "linear");
  if (x.cols() != w.rows() || b.rows() != 1 || b.cols() != w.cols()) {
    throw ShapeError("linear: " + shape(x.value()) + " x " + shape(w.value()) + " + " + shape(b.value()));
  }
  Matrix out(x.rows(), w.cols());
  out.noalias() = x.value() * w.value();
  out.rowwise() += b.value().row(0);
  return make(std::move(out), {x, w, b}, [](Node& self) {
    const Matrix& X = self.parents[0]->value;
    const Matrix& W = self.parents[1]->value;
    if (wants(self, 0)) g(self, 0).noalias() += self.grad * W.transpose();
    if (wants(self, 1)) g(self, 1).noalias() += X.transpose() * self.grad;
    if (wants(self, 2)) g(self, 2) += self.grad.colwise().sum();
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  return make(a.value() + b.value(), {a, b}, [](Node& self) {
    if (wants(self, 0)) g(self, 0) += self.grad;
    if (wants(self, 1)) g(self, 1) += self.grad;
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  return make(a.value() - b.value(), {a, b}, [](Node& self) {
    if (wants(self, 0)) g(self, 0) += self.grad;
    if (wants(self, 1)) g(self, 1) -= self.grad;
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  return make(a.value().cwiseProduct(b.value()), {a, b}, [](Node& self) {
    if (wants(self, 0)) g(self, 0) += self.grad.cwiseProduct(self.parents[1]->value);
    if (wants(self, 1)) g(self, 1) += self.grad.cwiseProduct(self.parents[0]->value);
  });
}

Tensor scale(const Tensor& a, double s) {
  require_defined(a, "scale");
  return make(a.value() * s, {a}, [s](Node& self) { g(self, 0) += self.grad * s; });
}

Tensor add_scalar(const Tensor& a, double s) {
  require_defined(a, "add_scalar");
  return make(a.value().array() + s, {a}, [](Node& self) { g(self, 0) += self.grad; });
}

Tensor add_row(const Tensor& a, const Tensor& row) {
  require_defined(a, "add_row");
  require_defined(row, "add_row");
  if (row.rows() != 1 || row.cols() != a.cols()) throw ShapeError("add_row: " + shape(a.value()) + " + " + shape(row.value()));
  Matrix out = a.value().rowwise() + row.value().row(0);
  return make(std::move(out), {a, row}, [](Node& self) {
    if (wants(self, 0)) g(self, 0) += self.grad;
    if (wants(self, 1)) g(self, 1) += self.grad.colwise().sum();
  });
}

Tensor add_col(const Tensor& a, const Tensor& col) {
  require_defined(a, "add_col");
  require_defined(col, "add_col");
  if (col.cols() != 1 || col.rows() != a.rows()) throw ShapeError("add_col: " + shape(a.value()) + " + " + shape(col.value()));
  Matrix out = a.value().colwise() + col.value().col(0);
  return make(std::move(out), {a, col}, [](Node& self) {
    if (wants(self, 0)) g(self, 0) += self.grad;
    if (wants(self, 1)) g(self, 1) += self.grad.rowwise().sum();
  });
}

Tensor mul_col(const Tensor& a, const Tensor& col) {
  require_defined(a, "mul_col");
  require_defined(col, "mul_col");
  if (col.cols() != 1 || col.rows() != a.rows()) throw ShapeError("mul_col: " + shape(a.value()) + " * " + shape(col.value()));
  Matrix out = a.value().array().colwise() * col.value().col(0).array();
  return make(std::move(out), {a, col}, [](Node& self) {
    const Matrix& A = self.parents[0]->value;
    const Matrix& c = self.parents[1]->value;
    if (wants(self, 0)) g(self, 0).array() += self.grad.array().colwise() * c.col(0).array();
    if (wants(self, 1)) g(self, 1) += self.grad.cwiseProduct(A).rowwise().sum();
  });
}

Tensor softplus(const Tensor& a) {
  require_defined(a, "softplus");
  // softplus(x) = max(x, 0) + log(1 + exp(-|x|)); sigmoid reuses exp(-|x|).
  // Written with array ops so Eigen vectorises exp and log.
  const auto& x = a.value().array();
  using RowArray = Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const RowArray e = (-x.abs()).exp();
  Matrix out = (x.max(0.0) + (1.0 + e).log()).matrix();
  if (!(t_grad_enabled && a.requires_grad())) return constant(std::move(out));
  Matrix sig = (x >= 0.0).select(1.0 / (1.0 + e), e / (1.0 + e)).matrix();
  return make(std::move(out), {a}, [sig = std::move(sig)](Node& self) { g(self, 0) += self.grad.cwiseProduct(sig); });
}

Tensor relu(const Tensor& a) {
  require_defined(a, "relu");
  return make(a.value().cwiseMax(0.0), {a}, [](Node& self) {
    g(self, 0) += self.grad.cwiseProduct(
        self.parents[0]->value.unaryExpr([](double x) { return x > 0.0 ? 1.0 : 0.0; }));
  });
}

Tensor exp(const Tensor& a) {
  require_defined(a, "exp");
  Matrix out = a.value().array().exp();
  return make(std::move(out), {a}, [](Node& self) { g(self, 0) += self.grad.cwiseProduct(self.value); });
}

Tensor log(const Tensor& a) {
  require_defined(a, "log");
  Matrix out = a.value().array().log();
  return make(std::move(out), {a}, [](Node& self) {
    g(self, 0).array() += self.grad.array() / self.parents[0]->value.array();
  });
}

Tensor square(const Tensor& a) {
  require_defined(a, "square");
  return make(a.value().cwiseAbs2(), {a}, [](Node& self) {
    g(self, 0) += 2.0 * self.grad.cwiseProduct(self.parents[0]->value);
  });
}

Tensor minimum(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "minimum");
  return make(a.value().cwiseMin(b.value()), {a, b}, [](Node& self) {
    const Matrix& A = self.parents[0]->value;
    const Matrix& B = self.parents[1]->value;
    const auto pick_a = (A.array() <= B.array()).cast<double>();
    if (wants(self, 0)) g(self, 0).array() += self.grad.array() * pick_a;
    if (wants(self, 1)) g(self, 1).array() += self.grad.array() * (1.0 - pick_a);
  });
}

Tensor clamp(const Tensor& a, double lo, double hi) {
  require_defined(a, "clamp");
  Matrix out = a.value().cwiseMax(lo).cwiseMin(hi);
  return make(std::move(out), {a}, [lo, hi](Node& self) {
    const auto inside = (self.parents[0]->value.array() >= lo && self.parents[0]->value.array() <= hi).cast<double>();
    g(self, 0).array() += self.grad.array() * inside;
  });
}

Tensor concat_cols(std::span<const Tensor> parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  Eigen::Index rows = -1, cols = 0;
  bool grad = false;
  for (const auto& p : parts) {
    require_defined(p, "concat_cols");
    if (rows >= 0 && p.rows() != rows) throw ShapeError("concat_cols: row mismatch");
    rows = p.rows();
    cols += p.cols();
    grad = grad || (t_grad_enabled && p.requires_grad());
  }
  Matrix out(rows, cols);
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    out.middleCols(at, p.cols()) = p.value();
    at += p.cols();
  }
  auto n = std::make_shared<Node>();
  n->value = std::move(out);
  n->requires_grad = grad;
  if (grad) {
    for (const auto& p : parts) n->parents.push_back(p.node());
    n->backward = [](Node& self) {
      Eigen::Index at = 0;
      for (auto& p : self.parents) {
        const Eigen::Index c = p->value.cols();
        if (p->requires_grad) p->grad_ref() += self.grad.middleCols(at, c);
        at += c;
      }
    };
  }
  return Tensor(std::move(n));
}

Tensor gather_rows(const Tensor& a, std::span<const int> index) {
  require_defined(a, "gather_rows");
  const Eigen::Index n = static_cast<Eigen::Index>(index.size());
  Matrix out = Matrix::Zero(n, a.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    const int r = index[i];
    if (r >= a.rows()) throw ShapeError("gather_rows: index " + std::to_string(r) + " out of " + shape(a.value()));
    if (r >= 0) out.row(i) = a.value().row(r);
  }
  std::vector<int> idx(index.begin(), index.end());
  return make(std::move(out), {a}, [idx = std::move(idx)](Node& self) {
    Matrix& ga = g(self, 0);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      if (idx[i] >= 0) ga.row(idx[i]) += self.grad.row(static_cast<Eigen::Index>(i));
    }
  });
}

Tensor segment_mean(const Tensor& a, std::span<const int> segment, Eigen::Index segments) {
  require_defined(a, "segment_mean");
  if (static_cast<Eigen::Index>(segment.size()) != a.rows()) throw ShapeError("segment_mean: segment ids vs rows");
  Matrix out = Matrix::Zero(segments, a.cols());
  std::vector<double> inv(static_cast<std::size_t>(segments), 0.0);
  for (int s : segment) {
    if (s < 0 || s >= segments) throw ShapeError("segment_mean: segment id out of range");
    inv[s] += 1.0;
  }
  for (auto& c : inv) c = c > 0 ? 1.0 / c : 0.0;
  for (Eigen::Index r = 0; r < a.rows(); ++r) out.row(segment[r]) += a.value().row(r);
  for (Eigen::Index s = 0; s < segments; ++s) out.row(s) *= inv[s];
  std::vector<int> seg(segment.begin(), segment.end());
  return make(std::move(out), {a}, [seg = std::move(seg), inv = std::move(inv)](Node& self) {
    Matrix& ga = g(self, 0);
    for (std::size_t r = 0; r < seg.size(); ++r) ga.row(r) += self.grad.row(seg[r]) * inv[seg[r]];
  });
}

Tensor sum(const Tensor& a) {
  require_defined(a, "sum");
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  return make(std::move(out), {a}, [](Node& self) { g(self, 0).array() += self.grad(0, 0); });
}

Tensor mean(const Tensor& a) {
  require_defined(a, "mean");
  if (a.value().size() == 0) throw ShapeError("mean of an empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(a.value().size()));
}

Tensor row_sum(const Tensor& a) {
  require_defined(a, "row_sum");
  Matrix out = a.value().rowwise().sum();
  return make(std::move(out), {a}, [](Node& self) { g(self, 0).colwise() += self.grad.col(0); });
}

Tensor row_mean(const Tensor& a) {
  require_defined(a, "row_mean");
  if (a.cols() == 0) throw ShapeError("row_mean of a tensor without columns");
  return scale(row_sum(a), 1.0 / static_cast<double>(a.cols()));
}

Tensor row_max(const Tensor& a) {
  require_defined(a, "row_max");
  if (a.cols() == 0) throw ShapeError("row_max of a tensor without columns");
  Matrix out(a.rows(), 1);
  std::vector<Eigen::Index> arg(static_cast<std::size_t>(a.rows()));
  for (Eigen::Index r = 0; r < a.rows(); ++r) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < a.cols(); ++c) {
      if (a.value()(r, c) > a.value()(r, best)) best = c;
    }
    arg[r] = best;
    out(r, 0) = a.value()(r, best);
  }
  return make(std::move(out), {a}, [arg = std::move(arg)](Node& self) {
    Matrix& ga = g(self, 0);
    for (std::size_t r = 0; r < arg.size(); ++r) ga(r, arg[r]) += self.grad(r, 0);
  });
}

Tensor log_softmax(const Tensor& a) {
  require_defined(a, "log_softmax");
  Matrix out = a.value();
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    const double m = out.row(r).maxCoeff();
    const double lse = m + std::log((out.row(r).array() - m).exp().sum());
    out.row(r).array() -= lse;
  }
  return make(std::move(out), {a}, [](Node& self) {
    // d/dx_j = g_j - softmax_j * sum(g)
    const Matrix p = self.value.array().exp();
    const Eigen::VectorXd gs = self.grad.rowwise().sum();
    g(self, 0) += self.grad - (p.array().colwise() * gs.array()).matrix();
  });
}

Tensor softmax(const Tensor& a) { return exp(log_softmax(a)); }

Tensor pick(const Tensor& a, std::span<const int> index) {
  require_defined(a, "pick");
  if (static_cast<Eigen::Index>(index.size()) != a.rows()) throw ShapeError("pick: one index per row required");
  Matrix out(a.rows(), 1);
  for (Eigen::Index r = 0; r < a.rows(); ++r) {
    if (index[r] < 0 || index[r] >= a.cols()) throw ShapeError("pick: column index out of range");
    out(r, 0) = a.value()(r, index[r]);
  }
  std::vector<int> idx(index.begin(), index.end());
  return make(std::move(out), {a}, [idx = std::move(idx)](Node& self) {
    Matrix& ga = g(self, 0);
    for (std::size_t r = 0; r < idx.size(); ++r) ga(r, idx[r]) += self.grad(r, 0);
  });
}

// --- parameters -------------------------------------------------------------

void ParameterSet::add(std::string name, Matrix value) {
  for (const auto& p : params_) {
    if (p.name == name) throw ShapeError("duplicate parameter name " + name);
  }
  params_.push_back({std::move(name), parameter(std::move(value))});
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += static_cast<std::size_t>(p.tensor.value().size());
  return n;
}

const Tensor& ParameterSet::get(std::string_view name) const {
  for (const auto& p : params_) {
    if (p.name == name) return p.tensor;
  }
  throw LookupError("no parameter named " + std::string(name));
}

ParameterSet ParameterSet::clone() const {
  ParameterSet out;
  for (const auto& p : params_) out.params_.push_back({p.name, parameter(p.tensor.value())});
  return out;
}

void ParameterSet::copy_from(const ParameterSet& other) {
  if (other.size() != size()) throw ShapeError("parameter sets differ in size");
  for (std::size_t i = 0; i < size(); ++i) {
    auto& dst = params_[i].tensor.mutable_value();
    const auto& src = other.params_[i].tensor.value();
    if (params_[i].name != other.params_[i].name || dst.rows() != src.rows() || dst.cols() != src.cols()) {
      throw ShapeError("parameter " + params_[i].name + " does not match " + other.params_[i].name);
    }
    dst = src;
  }
}

void ParameterSet::soft_update(const ParameterSet& online, double tau) {
  if (online.size() != size()) throw ShapeError("parameter sets differ in size");
  for (std::size_t i = 0; i < size(); ++i) {
    auto& dst = params_[i].tensor.mutable_value();
    const auto& src = online.params_[i].tensor.value();
    if (dst.rows() != src.rows() || dst.cols() != src.cols()) throw ShapeError("soft_update shape mismatch");
    dst = tau * src + (1.0 - tau) * dst;
  }
}

void ParameterSet::zero_grad() {
  for (auto& p : params_) p.tensor.zero_grad();
}

std::vector<double> ParameterSet::flatten() const {
  std::vector<double> out;
  out.reserve(scalar_count());
  for (const auto& p : params_) out.insert(out.end(), p.tensor.value().data(), p.tensor.value().data() + p.tensor.value().size());
  return out;
}

std::vector<double> ParameterSet::flatten_grad() const {
  std::vector<double> out;
  out.reserve(scalar_count());
  for (const auto& p : params_) {
    const Matrix gm = p.tensor.grad();
    out.insert(out.end(), gm.data(), gm.data() + gm.size());
  }
  return out;
}

void ParameterSet::assign(std::span<const double> flat) {
  if (flat.size() != scalar_count()) {
    throw ShapeError("expected " + std::to_string(scalar_count()) + " values, got " + std::to_string(flat.size()));
  }
  std::size_t at = 0;
  for (auto& p : params_) {
    auto& v = p.tensor.mutable_value();
    std::copy_n(flat.data() + at, v.size(), v.data());
    at += static_cast<std::size_t>(v.size());
  }
}

Adam::Adam(const ParameterSet& params, Options options) : options_(options) {
  for (const auto& p : params) {
    m_.push_back(Matrix::Zero(p.tensor.rows(), p.tensor.cols()));
    v_.push_back(Matrix::Zero(p.tensor.rows(), p.tensor.cols()));
  }
}

void Adam::step(ParameterSet& params) {
  if (params.size() != m_.size()) throw ShapeError("optimiser built for a different parameter set");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].tensor.rows() != m_[i].rows() || params[i].tensor.cols() != m_[i].cols()) {
      throw ShapeError("optimiser state does not match parameter " + params[i].name);
    }
  }
  std::vector<Matrix> grads;
  grads.reserve(params.size());
  double norm2 = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    grads.push_back(params[i].tensor.grad());
    norm2 += grads.back().squaredNorm();
  }
  double factor = 1.0;
  if (options_.grad_clip > 0.0 && std::sqrt(norm2) > options_.grad_clip) factor = options_.grad_clip / std::sqrt(norm2);

  ++t_;
  const double b1 = options_.beta1, b2 = options_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Matrix gi = grads[i] * factor;
    m_[i] = b1 * m_[i] + (1.0 - b1) * gi;
    v_[i] = b2 * v_[i] + (1.0 - b2) * gi.cwiseAbs2();
    auto& w = params[i].tensor.mutable_value();
    w.array() -= options_.learning_rate * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + options_.epsilon);
  }
  params.zero_grad();
}

}  // namespace crystalgym::nn
