#include "crystalgym/nn/megnet.hpp"

#include <cmath>
#include <random>

#include "crystalgym/core/errors.hpp"

namespace crystalgym::nn {

void MegnetConfig::validate() const {
  if (layers < 1) throw ConfigError("network needs at least one message-passing layer");
  if (node_input < 1 || global_input < 1 || width < 1 || hidden < 1 || head_hidden < 1 || outputs < 1) {
    throw ConfigError("network widths must be >= 1");
  }
}

GraphBatch make_batch(std::span<const GraphFeatures* const> observations) {
  GraphBatch b;
  b.graphs = observations.size();
  if (observations.empty()) throw ShapeError("empty observation batch");
  const std::size_t width = observations[0]->node_width;
  const std::size_t globals = kGlobalScalarCount;
  std::size_t nodes = 0, edges = 0;
  for (const auto* o : observations) {
    if (o->node_width != width) throw ShapeError("observations disagree on node width");
    if (o->global_features.size() < globals) throw ShapeError("observation lacks global features");
    nodes += o->node_count;
    edges += o->edge_count();
  }
  b.nodes = Matrix::Zero(static_cast<Eigen::Index>(nodes), static_cast<Eigen::Index>(width + 1));
  b.edges = Matrix::Zero(static_cast<Eigen::Index>(edges), 1);
  b.globals = Matrix::Zero(static_cast<Eigen::Index>(b.graphs), static_cast<Eigen::Index>(globals));
  b.src.reserve(edges);
  b.dst.reserve(edges);
  b.edge_graph.reserve(edges);
  b.node_graph.reserve(nodes);
  b.focus_row.assign(b.graphs, -1);

  int node_base = 0;
  Eigen::Index edge_row = 0;
  for (std::size_t gi = 0; gi < observations.size(); ++gi) {
    const auto& o = *observations[gi];
    for (std::size_t r = 0; r < o.node_count; ++r) {
      const Eigen::Index row = node_base + static_cast<Eigen::Index>(r);
      for (std::size_t c = 0; c < width; ++c) b.nodes(row, static_cast<Eigen::Index>(c)) = o.node(r, c);
      b.node_graph.push_back(static_cast<int>(gi));
    }
    if (o.focus) {
      b.focus_row[gi] = node_base + static_cast<int>(*o.focus);
      b.nodes(b.focus_row[gi], static_cast<Eigen::Index>(width)) = 1.0;
    }
    for (std::size_t c = 0; c < globals; ++c) b.globals(static_cast<Eigen::Index>(gi), static_cast<Eigen::Index>(c)) = o.global_features[c];
    if (o.edges) {
      for (std::size_t k = 0; k < o.edges->edges.size(); ++k) {
        const auto& e = o.edges->edges[k];
        b.src.push_back(node_base + static_cast<int>(e.u));
        b.dst.push_back(node_base + static_cast<int>(e.v));
        b.edge_graph.push_back(static_cast<int>(gi));
        b.edges(edge_row++, 0) = o.edges->features[k];
      }
    }
    node_base += static_cast<int>(o.node_count);
  }
  return b;
}

GraphBatch make_batch(const GraphFeatures& observation) {
  const GraphFeatures* one = &observation;
  return make_batch(std::span<const GraphFeatures* const>(&one, 1));
}

namespace {

struct Shape {
  std::string name;
  Eigen::Index rows, cols;
};

std::vector<Shape> layout(const MegnetConfig& c) {
  const auto w = static_cast<Eigen::Index>(c.width), hd = static_cast<Eigen::Index>(c.hidden);
  const auto hh = static_cast<Eigen::Index>(c.head_hidden), out = static_cast<Eigen::Index>(c.outputs);
  std::vector<Shape> s;
  auto linear = [&](const std::string& name, Eigen::Index in, Eigen::Index o) {
    s.push_back({name + ".W", in, o});
    s.push_back({name + ".b", 1, o});
  };
  linear("embed.node", static_cast<Eigen::Index>(c.node_input) + 1, w);
  linear("embed.edge", 1, w);
  linear("embed.global", static_cast<Eigen::Index>(c.global_input), w);
  for (std::size_t k = 0; k < c.layers; ++k) {
    const std::string p = "layer" + std::to_string(k);
    linear(p + ".edge.0", 4 * w, hd);
    linear(p + ".edge.1", hd, w);
    linear(p + ".node.0", 3 * w, hd);
    linear(p + ".node.1", hd, w);
    linear(p + ".global.0", 3 * w, hd);
    linear(p + ".global.1", hd, w);
  }
  linear("head.0", 4 * w, hh);
  if (c.dueling) {
    linear("head.value", hh, 1);
    linear("head.advantage", hh, out);
  } else {
    linear("head.out", hh, out);
  }
  return s;
}

class Cursor {
 public:
  explicit Cursor(const ParameterSet& p) : p_(p) {}
  Tensor linear(const Tensor& x) {
    const Tensor& w = p_[i_++].tensor;
    const Tensor& b = p_[i_++].tensor;
    return nn::linear(x, w, b);
  }
  Tensor mlp(const Tensor& x) { return linear(softplus(linear(x))); }
  std::size_t position() const noexcept { return i_; }

 private:
  const ParameterSet& p_;
  std::size_t i_ = 0;
};

}  // namespace

Megnet::Megnet(MegnetConfig config, std::uint64_t seed) : config_(config) {
  config_.validate();
  std::mt19937_64 rng(seed);
  for (const auto& s : layout(config_)) {
    Matrix m = Matrix::Zero(s.rows, s.cols);
    if (s.name.ends_with(".W")) {
      const double limit = std::sqrt(6.0 / static_cast<double>(s.rows + s.cols));
      std::uniform_real_distribution<double> u(-limit, limit);
      for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
    }
    params_.add(s.name, std::move(m));
  }
}

void Megnet::check_layout(const ParameterSet& params) const {
  const auto shapes = layout(config_);
  if (params.size() != shapes.size()) {
    throw ShapeError("expected " + std::to_string(shapes.size()) + " parameter tensors, got " +
                     std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    const auto& t = params[i].tensor;
    if (!t.defined() || t.rows() != shapes[i].rows || t.cols() != shapes[i].cols) {
      throw ShapeError("parameter " + shapes[i].name + " should be " + std::to_string(shapes[i].rows) + "x" +
                       std::to_string(shapes[i].cols));
    }
  }
}

namespace {

Tensor encode_with(const MegnetConfig& c, const GraphBatch& b, Cursor& p) {
  if (b.nodes.cols() != static_cast<Eigen::Index>(c.node_input) + 1) {
    throw ShapeError("node features have " + std::to_string(b.nodes.cols() - 1) + " columns, network expects " +
                     std::to_string(c.node_input));
  }
  if (b.globals.cols() != static_cast<Eigen::Index>(c.global_input)) throw ShapeError("global feature width mismatch");
  const auto graphs = static_cast<Eigen::Index>(b.graphs);
  const auto nodes = b.nodes.rows();

  Tensor h = p.linear(constant(b.nodes));
  Tensor e = p.linear(constant(b.edges));
  Tensor u = p.linear(constant(b.globals));
  for (std::size_t k = 0; k < c.layers; ++k) {
    const Tensor e_in[] = {gather_rows(h, b.src), gather_rows(h, b.dst), e, gather_rows(u, b.edge_graph)};
    e = add(e, p.mlp(concat_cols(e_in)));
    const Tensor v_in[] = {h, segment_mean(e, b.src, nodes), gather_rows(u, b.node_graph)};
    h = add(h, p.mlp(concat_cols(v_in)));
    const Tensor u_in[] = {segment_mean(h, b.node_graph, graphs), segment_mean(e, b.edge_graph, graphs), u};
    u = add(u, p.mlp(concat_cols(u_in)));
  }
  const Tensor readout[] = {segment_mean(h, b.node_graph, graphs), segment_mean(e, b.edge_graph, graphs), u,
                            gather_rows(h, b.focus_row)};
  return concat_cols(readout);
}

}  // namespace

Tensor Megnet::encode(const GraphBatch& batch, const ParameterSet* params) const {
  const ParameterSet& p = params ? *params : params_;
  if (params) check_layout(*params);
  Cursor cur(p);
  return encode_with(config_, batch, cur);
}

Tensor Megnet::forward(const GraphBatch& batch, const ParameterSet* params) const {
  const ParameterSet& p = params ? *params : params_;
  if (params) check_layout(*params);
  Cursor cur(p);
  const Tensor psi = encode_with(config_, batch, cur);
  const Tensor z = softplus(cur.linear(psi));
  if (!config_.dueling) return cur.linear(z);
  const Tensor value = cur.linear(z);
  const Tensor adv = cur.linear(z);
  return add_col(add_col(adv, scale(row_mean(adv), -1.0)), value);
}

}  // namespace crystalgym::nn
