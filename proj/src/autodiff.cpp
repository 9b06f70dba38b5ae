#include "mhmarl/autodiff.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace mhmarl {

std::string_view op_name(OpKind kind) {
  switch (kind) {
    case OpKind::constant: return "constant";
    case OpKind::parameter: return "parameter";
    case OpKind::matmul: return "matmul";
    case OpKind::affine: return "affine";
    case OpKind::add: return "add";
    case OpKind::sub: return "sub";
    case OpKind::mul: return "mul";
    case OpKind::scalar_mul: return "scalar_mul";
    case OpKind::relu: return "relu";
    case OpKind::tanh: return "tanh";
    case OpKind::concat: return "concat";
    case OpKind::slice: return "slice";
    case OpKind::square: return "square";
    case OpKind::sum: return "sum";
    case OpKind::mean: return "mean";
    case OpKind::abs: return "abs";
    case OpKind::l2_norm: return "l2_norm";
    case OpKind::stop_gradient: return "stop_gradient";
  }
  return "unknown";
}

namespace {

[[noreturn]] void shape_error(OpKind kind, const Shape& a, const Shape& b) {
  throw std::invalid_argument(std::string(op_name(kind)) + ": incompatible shapes " + shape_string(a) +
                              " and " + shape_string(b));
}

void require_finite(const Tensor& t, OpKind kind) {
  if (!t.all_finite()) {
    throw std::domain_error(std::string(op_name(kind)) + ": non-finite value in tensor of shape " +
                            shape_string(t.shape()));
  }
}

Shape with_last(Shape shape, std::size_t last) {
  shape.back() = last;
  return shape;
}

void accumulate(std::vector<Tensor>& grads, std::vector<char>& reached, std::size_t id, const Tensor& shape_of,
                auto&& fn) {
  if (!reached[id]) {
    grads[id] = Tensor(shape_of.shape());
    reached[id] = 1;
  }
  fn(grads[id].matrix());
}

}  // namespace

const Tensor& GradientMap::operator[](Var v) const {
  if (v.id >= grads_.size()) throw std::out_of_range("gradient lookup for unknown node");
  if (reached_[v.id]) return grads_[v.id];
  zeros_.push_back(Tensor(graph_->value(v).shape()));
  return zeros_.back();
}

std::vector<Tensor> GradientMap::for_parameters(std::span<Parameter* const> params) && {
  std::vector<Tensor> out;
  out.reserve(params.size());
  std::unordered_map<std::size_t, std::size_t> taken;  // node id -> index in out
  for (const Parameter* p : params) {
    auto it = graph_->trainable_.find(p);
    if (it == graph_->trainable_.end() || it->second >= grads_.size() || !reached_[it->second]) {
      out.push_back(Tensor::zeros_like(p->value));
    } else if (auto seen = taken.find(it->second); seen != taken.end()) {
      out.push_back(out[seen->second]);
    } else {
      taken.emplace(it->second, out.size());
      out.push_back(std::move(grads_[it->second]));
    }
  }
  return out;
}

std::vector<Tensor> GradientMap::for_parameters(std::span<Parameter* const> params) const& {
  std::vector<Tensor> out;
  out.reserve(params.size());
  for (const Parameter* p : params) {
    auto it = graph_->trainable_.find(p);
    if (it != graph_->trainable_.end() && it->second < grads_.size() && reached_[it->second]) {
      out.push_back(grads_[it->second]);
    } else {
      out.push_back(Tensor::zeros_like(p->value));
    }
  }
  return out;
}

Var Graph::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var{nodes_.size() - 1};
}

Var Graph::constant(Tensor value) {
  require_finite(value, OpKind::constant);
  return push(Node{OpKind::constant, {}, std::move(value)});
}

Var Graph::parameter(const Parameter& param, bool trainable) {
  auto& index = trainable ? trainable_ : frozen_;
  if (auto it = index.find(&param); it != index.end()) return Var{it->second};
  require_finite(param.value, OpKind::parameter);
  Node n{OpKind::parameter, {}, Tensor(), trainable};
  n.ref = &param.value;
  Var v = push(std::move(n));
  index.emplace(&param, v.id);
  return v;
}

Var Graph::matmul(Var a, Var b) {
  const Tensor& av = value(a);
  const Tensor& bv = value(b);
  if (bv.shape().size() != 2 || av.cols() != bv.shape()[0]) shape_error(OpKind::matmul, av.shape(), bv.shape());
  Tensor out = Tensor::uninitialized(with_last(av.shape(), bv.cols()));
  out.matrix().noalias() = av.matrix() * bv.matrix();
  require_finite(out, OpKind::matmul);
  return push(Node{OpKind::matmul, {a.id, b.id}, std::move(out), requires_grad(a) || requires_grad(b)});
}

Var Graph::affine(Var x, Var w, Var b) {
  const Tensor& xv = value(x);
  const Tensor& wv = value(w);
  const Tensor& bv = value(b);
  if (wv.shape().size() != 2 || xv.cols() != wv.shape()[0]) shape_error(OpKind::affine, xv.shape(), wv.shape());
  if (bv.shape() != Shape{wv.cols()}) shape_error(OpKind::affine, wv.shape(), bv.shape());
  Tensor out = Tensor::uninitialized(with_last(xv.shape(), wv.cols()));
  // Accumulating onto the bias skips the zero fill of a plain product.
  out.matrix().rowwise() = bv.matrix().row(0);
  out.matrix().noalias() += xv.matrix() * wv.matrix();
  require_finite(out, OpKind::affine);
  return push(Node{OpKind::affine, {x.id, w.id, b.id}, std::move(out),
                   requires_grad(x) || requires_grad(w) || requires_grad(b)});
}

bool Graph::broadcast_mode(Var a, Var b, OpKind kind) const {
  const Shape& as = shape(a);
  const Shape& bs = shape(b);
  if (as == bs) return false;
  if (bs.size() == 1 && bs[0] == as.back()) return true;
  shape_error(kind, as, bs);
}

Var Graph::add(Var a, Var b) {
  const bool bc = broadcast_mode(a, b, OpKind::add);
  Tensor out = Tensor::uninitialized(shape(a));
  if (bc) {
    out.matrix() = value(a).matrix().rowwise() + value(b).matrix().row(0);
  } else {
    out.matrix() = value(a).matrix() + value(b).matrix();
  }
  require_finite(out, OpKind::add);
  Node n{OpKind::add, {a.id, b.id}, std::move(out), requires_grad(a) || requires_grad(b)};
  n.row_broadcast = bc;
  return push(std::move(n));
}

Var Graph::sub(Var a, Var b) {
  const bool bc = broadcast_mode(a, b, OpKind::sub);
  Tensor out = Tensor::uninitialized(shape(a));
  if (bc) {
    out.matrix() = value(a).matrix().rowwise() - value(b).matrix().row(0);
  } else {
    out.matrix() = value(a).matrix() - value(b).matrix();
  }
  require_finite(out, OpKind::sub);
  Node n{OpKind::sub, {a.id, b.id}, std::move(out), requires_grad(a) || requires_grad(b)};
  n.row_broadcast = bc;
  return push(std::move(n));
}

Var Graph::mul(Var a, Var b) {
  const bool bc = broadcast_mode(a, b, OpKind::mul);
  Tensor out = value(a);
  if (bc) {
    out.matrix().array().rowwise() *= value(b).matrix().row(0).array();
  } else {
    out.matrix().array() *= value(b).matrix().array();
  }
  require_finite(out, OpKind::mul);
  Node n{OpKind::mul, {a.id, b.id}, std::move(out), requires_grad(a) || requires_grad(b)};
  n.row_broadcast = bc;
  return push(std::move(n));
}

Var Graph::scale(Var a, double factor) {
  if (!std::isfinite(factor)) throw std::domain_error("scalar_mul: non-finite factor");
  Tensor out = value(a);
  out.matrix() *= factor;
  require_finite(out, OpKind::scalar_mul);
  Node n{OpKind::scalar_mul, {a.id}, std::move(out), requires_grad(a)};
  n.factor = factor;
  return push(std::move(n));
}

Var Graph::relu(Var a) {
  Tensor out = Tensor::uninitialized(shape(a));
  out.matrix() = value(a).matrix().cwiseMax(0.0);
  return push(Node{OpKind::relu, {a.id}, std::move(out), requires_grad(a)});
}

Var Graph::tanh(Var a) {
  Tensor out = value(a);
  for (double& x : out.data()) x = std::tanh(x);
  return push(Node{OpKind::tanh, {a.id}, std::move(out), requires_grad(a)});
}

Var Graph::concat(std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("concat: no inputs");
  const Shape& first = shape(parts[0]);
  std::size_t total = 0;
  bool grad = false;
  std::vector<std::size_t> ids;
  for (Var p : parts) {
    const Shape& s = shape(p);
    if (s.size() != first.size() || !std::equal(s.begin(), s.end() - 1, first.begin())) {
      shape_error(OpKind::concat, first, s);
    }
    total += s.back();
    grad = grad || requires_grad(p);
    ids.push_back(p.id);
  }
  Tensor out = Tensor::uninitialized(with_last(first, total));
  auto om = out.matrix();
  Eigen::Index col = 0;
  for (Var p : parts) {
    auto pm = value(p).matrix();
    om.middleCols(col, pm.cols()) = pm;
    col += pm.cols();
  }
  return push(Node{OpKind::concat, std::move(ids), std::move(out), grad});
}

Var Graph::slice(Var a, std::size_t begin, std::size_t end) {
  const Tensor& av = value(a);
  if (begin >= end || end > av.cols()) {
    throw std::invalid_argument("slice: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                                ") outside last axis of " + shape_string(av.shape()));
  }
  Tensor out = Tensor::uninitialized(with_last(av.shape(), end - begin));
  out.matrix() = av.matrix().middleCols(static_cast<Eigen::Index>(begin), static_cast<Eigen::Index>(end - begin));
  Node n{OpKind::slice, {a.id}, std::move(out), requires_grad(a)};
  n.begin = begin;
  n.end = end;
  return push(std::move(n));
}

Var Graph::square(Var a) {
  Tensor out = value(a);
  out.matrix().array() = out.matrix().array().square();
  require_finite(out, OpKind::square);
  return push(Node{OpKind::square, {a.id}, std::move(out), requires_grad(a)});
}

Var Graph::sum(Var a) {
  Tensor out = Tensor::scalar(value(a).matrix().sum());
  require_finite(out, OpKind::sum);
  return push(Node{OpKind::sum, {a.id}, std::move(out), requires_grad(a)});
}

Var Graph::mean(Var a) {
  const Tensor& av = value(a);
  Tensor out = Tensor::scalar(av.matrix().sum() / static_cast<double>(av.size()));
  require_finite(out, OpKind::mean);
  return push(Node{OpKind::mean, {a.id}, std::move(out), requires_grad(a)});
}

Var Graph::abs(Var a) {
  Tensor out = value(a);
  out.matrix() = out.matrix().cwiseAbs();
  return push(Node{OpKind::abs, {a.id}, std::move(out), requires_grad(a)});
}

Var Graph::l2_norm(Var a) {
  const Tensor& av = value(a);
  Tensor out = Tensor::uninitialized(with_last(av.shape(), 1));
  out.matrix() = av.matrix().rowwise().norm();
  require_finite(out, OpKind::l2_norm);
  return push(Node{OpKind::l2_norm, {a.id}, std::move(out), requires_grad(a)});
}

Var Graph::stop_gradient(Var a) {
  return push(Node{OpKind::stop_gradient, {a.id}, value(a), false});
}

std::vector<bool> Graph::relu_pattern() const {
  std::vector<bool> pattern;
  for (const Node& n : nodes_) {
    if (n.kind != OpKind::relu) continue;
    for (double x : nodes_[n.inputs[0]].val().data()) pattern.push_back(x > 0.0);
  }
  return pattern;
}

GradientMap Graph::backward(Var root) const {
  const Tensor& rv = value(root);
  if (rv.size() != 1) {
    throw std::invalid_argument("backward: root must be a scalar, got shape " + shape_string(rv.shape()));
  }
  std::vector<Tensor> grads(nodes_.size());
  std::vector<char> reached(nodes_.size(), 0);
  if (node(root).requires_grad) {
    grads[root.id] = Tensor(rv.shape(), 1.0);
    reached[root.id] = 1;
  }
  for (std::size_t id = root.id + 1; id-- > 0;) {
    if (!reached[id]) continue;
    const Node& n = nodes_[id];
    if (!n.requires_grad) continue;
    propagate(n, grads[id], grads, reached);
  }
  return GradientMap(this, std::move(grads), std::move(reached));
}

void Graph::propagate(const Node& n, const Tensor& g, std::vector<Tensor>& grads,
                      std::vector<char>& reached) const {
  auto gm = g.matrix();
  auto wants = [&](std::size_t k) { return nodes_[n.inputs[k]].requires_grad; };
  auto into = [&](std::size_t k, auto&& fn) {
    const std::size_t id = n.inputs[k];
    accumulate(grads, reached, id, nodes_[id].val(), fn);
  };
  auto in = [&](std::size_t k) -> const Tensor& { return nodes_[n.inputs[k]].val(); };
  // Full-shape contributions: the first one overwrites instead of adding into
  // a zero-filled buffer.
  auto assign_into = [&](std::size_t k, auto&& expr) {
    const std::size_t id = n.inputs[k];
    if (!reached[id]) {
      grads[id] = Tensor::uninitialized(nodes_[id].val().shape());
      reached[id] = 1;
      grads[id].matrix().noalias() = expr();
    } else {
      grads[id].matrix().noalias() += expr();
    }
  };

  switch (n.kind) {
    case OpKind::constant:
    case OpKind::parameter:
    case OpKind::stop_gradient:
      break;
    case OpKind::matmul:
      if (wants(0)) assign_into(0, [&] { return gm * in(1).matrix().transpose(); });
      if (wants(1)) assign_into(1, [&] { return in(0).matrix().transpose() * gm; });
      break;
    case OpKind::affine:
      if (wants(0)) assign_into(0, [&] { return gm * in(1).matrix().transpose(); });
      if (wants(1)) assign_into(1, [&] { return in(0).matrix().transpose() * gm; });
      if (wants(2)) into(2, [&](auto m) { m.row(0) += gm.colwise().sum(); });
      break;
    case OpKind::add:
    case OpKind::sub: {
      const double sign = n.kind == OpKind::add ? 1.0 : -1.0;
      if (wants(0)) assign_into(0, [&] { return gm; });
      if (wants(1)) {
        if (n.row_broadcast) {
          into(1, [&](auto m) { m.row(0) += sign * gm.colwise().sum(); });
        } else {
          assign_into(1, [&] { return sign * gm; });
        }
      }
      break;
    }
    case OpKind::mul:
      if (wants(0)) {
        if (n.row_broadcast) {
          into(0, [&](auto m) { m.array() += gm.array().rowwise() * in(1).matrix().row(0).array(); });
        } else {
          assign_into(0, [&] { return (gm.array() * in(1).matrix().array()).matrix(); });
        }
      }
      if (wants(1)) {
        if (n.row_broadcast) {
          into(1, [&](auto m) { m.row(0) += (gm.array() * in(0).matrix().array()).matrix().colwise().sum(); });
        } else {
          assign_into(1, [&] { return (gm.array() * in(0).matrix().array()).matrix(); });
        }
      }
      break;
    case OpKind::scalar_mul:
      assign_into(0, [&] { return n.factor * gm; });
      break;
    case OpKind::relu:
      assign_into(0, [&] { return (in(0).matrix().array() > 0.0).select(gm.array(), 0.0).matrix(); });
      break;
    case OpKind::tanh: {
      auto y = n.value.matrix().array();
      if (fault_ == PlantedFault::tanh_derivative) {
        assign_into(0, [&] { return (gm.array() * (1.0 - y)).matrix(); });
      } else {
        assign_into(0, [&] { return (gm.array() * (1.0 - y.square())).matrix(); });
      }
      break;
    }
    case OpKind::concat: {
      Eigen::Index col = 0;
      for (std::size_t k = 0; k < n.inputs.size(); ++k) {
        const auto width = static_cast<Eigen::Index>(in(k).cols());
        if (wants(k)) into(k, [&](auto m) { m += gm.middleCols(col, width); });
        col += width;
      }
      break;
    }
    case OpKind::slice:
      into(0, [&](auto m) {
        m.middleCols(static_cast<Eigen::Index>(n.begin), static_cast<Eigen::Index>(n.end - n.begin)) += gm;
      });
      break;
    case OpKind::square:
      assign_into(0, [&] { return (2.0 * in(0).matrix().array() * gm.array()).matrix(); });
      break;
    case OpKind::sum: {
      const double s = g.item();
      into(0, [&](auto m) { m.array() += s; });
      break;
    }
    case OpKind::mean: {
      const double s = g.item() / static_cast<double>(in(0).size());
      into(0, [&](auto m) { m.array() += s; });
      break;
    }
    case OpKind::abs:
      // Subgradient 0 at the kink.
      assign_into(0, [&] {
        auto x = in(0).matrix().array();
        return (gm.array() * ((x > 0.0).cast<double>() - (x < 0.0).cast<double>())).matrix();
      });
      break;
    case OpKind::l2_norm:
      into(0, [&](auto m) {
        auto x = in(0).matrix();
        auto norms = n.value.matrix();
        for (Eigen::Index r = 0; r < x.rows(); ++r) {
          const double len = norms(r, 0);
          if (len > 0.0) m.row(r) += (gm(r, 0) * x.row(r)) / len;
        }
      });
      break;
  }
}

}  // namespace mhmarl
