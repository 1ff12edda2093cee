#include "advaudit/graph.hpp"

#include <cmath>
#include <stdexcept>

#include "advaudit/softhist.hpp"

namespace advaudit::ad {

namespace {

inline double sigmoid_stable(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// max(z,0) - z*y + log1p(exp(-|z|)) -- the usual overflow-safe BCE form
inline double bce_logit(double z, double y) {
  return std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
}

[[noreturn]] void fail(int id, Op op, const std::string& msg) {
  throw std::invalid_argument(std::string(op_name(op)) + " (node " + std::to_string(id) +
                              "): " + msg);
}

}  // namespace

const char* op_name(Op op) {
  switch (op) {
    case Op::kLeaf: return "leaf";
    case Op::kConst: return "const";
    case Op::kMatmul: return "matmul";
    case Op::kAdd: return "add";
    case Op::kBiasAdd: return "bias_add";
    case Op::kMul: return "mul";
    case Op::kRelu: return "relu";
    case Op::kSigmoid: return "sigmoid";
    case Op::kTanh: return "tanh";
    case Op::kExp: return "exp";
    case Op::kSquare: return "square";
    case Op::kMean: return "mean";
    case Op::kSum: return "sum";
    case Op::kMaskedMeanPool: return "masked_mean_pool";
    case Op::kBceWithLogits: return "bce_with_logits";
    case Op::kSoftChi2: return "soft_chi2";
  }
  return "?";
}

int Graph::push(Node n) {
  if (n.op != Op::kLeaf && n.op != Op::kConst) {
    bool grad = false;
    if (n.a >= 0) grad = grad || nodes_[static_cast<std::size_t>(n.a)].requires_grad;
    if (n.b >= 0) grad = grad || nodes_[static_cast<std::size_t>(n.b)].requires_grad;
    n.requires_grad = grad;
  }
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

int Graph::check(int id, const char* ctx) const {
  if (id < 0 || id >= static_cast<int>(nodes_.size()))
    throw std::invalid_argument(std::string(ctx) + ": invalid node id " + std::to_string(id));
  return id;
}

int Graph::leaf(std::string name, bool requires_grad) {
  if (leaves_.count(name)) throw std::invalid_argument("leaf: duplicate name '" + name + "'");
  Node n;
  n.op = Op::kLeaf;
  n.name = name;
  n.requires_grad = requires_grad;
  const int id = push(std::move(n));
  leaves_.emplace(std::move(name), id);
  return id;
}

int Graph::constant(Tensor value) {
  Node n;
  n.op = Op::kConst;
  n.value = std::move(value);
  return push(std::move(n));
}

int Graph::matmul(int a, int b) {
  Node n;
  n.op = Op::kMatmul;
  n.a = check(a, "matmul");
  n.b = check(b, "matmul");
  return push(std::move(n));
}

int Graph::add(int a, int b) {
  Node n;
  n.op = Op::kAdd;
  n.a = check(a, "add");
  n.b = check(b, "add");
  return push(std::move(n));
}

int Graph::bias_add(int matrix, int row) {
  Node n;
  n.op = Op::kBiasAdd;
  n.a = check(matrix, "bias_add");
  n.b = check(row, "bias_add");
  return push(std::move(n));
}

int Graph::mul(int a, int b) {
  Node n;
  n.op = Op::kMul;
  n.a = check(a, "mul");
  n.b = check(b, "mul");
  return push(std::move(n));
}

#define ADVAUDIT_UNARY(fn, kind)            \
  int Graph::fn(int a) {                    \
    Node n;                                 \
    n.op = kind;                            \
    n.a = check(a, #fn);                    \
    return push(std::move(n));              \
  }

ADVAUDIT_UNARY(relu, Op::kRelu)
ADVAUDIT_UNARY(sigmoid, Op::kSigmoid)
ADVAUDIT_UNARY(tanh, Op::kTanh)
ADVAUDIT_UNARY(exp, Op::kExp)
ADVAUDIT_UNARY(square, Op::kSquare)
ADVAUDIT_UNARY(mean, Op::kMean)
ADVAUDIT_UNARY(sum, Op::kSum)
#undef ADVAUDIT_UNARY

int Graph::masked_mean_pool(int values, int mask, std::size_t group_size) {
  if (group_size == 0) throw std::invalid_argument("masked_mean_pool: group size must be positive");
  if (nodes_[static_cast<std::size_t>(check(mask, "masked_mean_pool"))].requires_grad)
    throw std::invalid_argument("masked_mean_pool: mask input must not require gradients");
  Node n;
  n.op = Op::kMaskedMeanPool;
  n.a = check(values, "masked_mean_pool");
  n.b = mask;
  n.group = group_size;
  return push(std::move(n));
}

int Graph::bce_with_logits(int logits, int targets) {
  Node n;
  n.op = Op::kBceWithLogits;
  n.a = check(logits, "bce_with_logits");
  n.b = check(targets, "bce_with_logits");
  return push(std::move(n));
}

int Graph::soft_chi2(int x, SoftChi2Spec spec) {
  for (const auto& f : spec.features) {
    check_edges(f.edges, f.bandwidth);
    if (f.nominal_mass.size() != f.edges.size() + 1)
      throw std::invalid_argument("soft_chi2: nominal mass size mismatch");
  }
  if (spec.features.empty()) throw std::invalid_argument("soft_chi2: no features");
  Node n;
  n.op = Op::kSoftChi2;
  n.a = check(x, "soft_chi2");
  n.chi2 = std::make_shared<const SoftChi2Spec>(std::move(spec));
  return push(std::move(n));
}

int Graph::leaf_id(std::string_view name) const {
  auto it = leaves_.find(name);
  return it == leaves_.end() ? -1 : it->second;
}

Evaluation::Evaluation(const Graph& g) : graph_(&g) {}

const Tensor& Evaluation::value(int id) const {
  if (forward_root_ < 0 || id > forward_root_)
    throw std::logic_error("Evaluation::value: node not covered by the last forward pass");
  return values_[static_cast<std::size_t>(id)];
}

const Tensor& Evaluation::grad(int id) {
  if (!backward_done_) throw std::logic_error("Evaluation::grad: backward has not run");
  auto& g = grads_[static_cast<std::size_t>(id)];
  if (g.empty() && !values_[static_cast<std::size_t>(id)].empty())
    g = Tensor(values_[static_cast<std::size_t>(id)].shape());
  return g;
}

const Tensor& Evaluation::forward(const Bindings& bindings, int root) {
  const int n = static_cast<int>(graph_->size());
  if (root < 0 || root >= n) throw std::invalid_argument("forward: invalid root id");
  values_.assign(graph_->size(), Tensor());
  grads_.assign(graph_->size(), Tensor());
  scratch_.assign(graph_->size(), {});
  backward_done_ = false;
  forward_root_ = -1;
  for (int id = 0; id <= root; ++id) compute(id, bindings);
  forward_root_ = root;
  return values_[static_cast<std::size_t>(root)];
}

void Evaluation::compute(int id, const Bindings& bindings) {
  const Node& nd = graph_->node(id);
  Tensor& out = values_[static_cast<std::size_t>(id)];
  const auto in = [&](int i) -> const Tensor& { return values_[static_cast<std::size_t>(i)]; };

  switch (nd.op) {
    case Op::kLeaf: {
      auto it = bindings.find(nd.name);
      if (it == bindings.end()) fail(id, nd.op, "unbound leaf '" + nd.name + "'");
      out = it->second;
      return;
    }
    case Op::kConst:
      out = nd.value;
      return;
    case Op::kMatmul: {
      const Tensor& a = in(nd.a);
      const Tensor& b = in(nd.b);
      if (a.rank() != 2 || b.rank() != 2)
        fail(id, nd.op, "rank-2 operands required, got " + shape_str(a.shape()) + " and " +
                            shape_str(b.shape()));
      if (a.cols() != b.rows())
        fail(id, nd.op, "inner dimensions disagree: " + shape_str(a.shape()) + " vs " +
                            shape_str(b.shape()));
      out = Tensor({a.rows(), b.cols()});
      matmul(a, b, out);
      return;
    }
    case Op::kAdd:
    case Op::kMul: {
      const Tensor& a = in(nd.a);
      const Tensor& b = in(nd.b);
      if (!a.same_shape(b))
        fail(id, nd.op, "shape mismatch: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
      out = Tensor(a.shape());
      const std::size_t m = a.size();
      if (nd.op == Op::kAdd)
        for (std::size_t i = 0; i < m; ++i) out[i] = a[i] + b[i];
      else
        for (std::size_t i = 0; i < m; ++i) out[i] = a[i] * b[i];
      return;
    }
    case Op::kBiasAdd: {
      const Tensor& a = in(nd.a);
      const Tensor& b = in(nd.b);
      if (a.rank() != 2) fail(id, nd.op, "matrix operand required, got " + shape_str(a.shape()));
      const std::size_t width = a.cols();
      const bool row_ok = (b.rank() == 1 && b.shape()[0] == width) ||
                          (b.rank() == 2 && b.rows() == 1 && b.cols() == width);
      if (!row_ok)
        fail(id, nd.op, "bias shape " + shape_str(b.shape()) + " does not broadcast over " +
                            shape_str(a.shape()));
      out = Tensor(a.shape());
      for (std::size_t r = 0; r < a.rows(); ++r)
        for (std::size_t c = 0; c < width; ++c) out.at(r, c) = a.at(r, c) + b[c];
      return;
    }
    case Op::kRelu:
    case Op::kSigmoid:
    case Op::kTanh:
    case Op::kExp:
    case Op::kSquare: {
      const Tensor& a = in(nd.a);
      out = Tensor(a.shape());
      const std::size_t m = a.size();
      switch (nd.op) {
        case Op::kRelu:
          for (std::size_t i = 0; i < m; ++i) out[i] = a[i] > 0.0 ? a[i] : 0.0;
          break;
        case Op::kSigmoid:
          for (std::size_t i = 0; i < m; ++i) out[i] = sigmoid_stable(a[i]);
          break;
        case Op::kTanh:
          for (std::size_t i = 0; i < m; ++i) out[i] = std::tanh(a[i]);
          break;
        case Op::kExp:
          for (std::size_t i = 0; i < m; ++i) out[i] = std::exp(a[i]);
          break;
        default:
          for (std::size_t i = 0; i < m; ++i) out[i] = a[i] * a[i];
          break;
      }
      return;
    }
    case Op::kMean:
    case Op::kSum: {
      const Tensor& a = in(nd.a);
      if (a.size() == 0) fail(id, nd.op, "empty operand");
      double acc = 0.0;
      for (std::size_t i = 0; i < a.size(); ++i) acc += a[i];
      out = Tensor::scalar(nd.op == Op::kMean ? acc / static_cast<double>(a.size()) : acc);
      return;
    }
    case Op::kMaskedMeanPool: {
      const Tensor& v = in(nd.a);
      const Tensor& m = in(nd.b);
      if (v.rank() != 2) fail(id, nd.op, "rank-2 values required, got " + shape_str(v.shape()));
      if (m.size() != v.rows())
        fail(id, nd.op, "mask length " + std::to_string(m.size()) + " != rows " +
                            std::to_string(v.rows()));
      if (v.rows() % nd.group != 0)
        fail(id, nd.op, "rows " + std::to_string(v.rows()) + " not divisible by group " +
                            std::to_string(nd.group));
      const std::size_t groups = v.rows() / nd.group;
      const std::size_t width = v.cols();
      out = Tensor({groups, width});
      for (std::size_t g = 0; g < groups; ++g) {
        double denom = 0.0;
        for (std::size_t t = 0; t < nd.group; ++t) denom += m[g * nd.group + t];
        denom = std::max(denom, 1.0);  // divisor floor
        for (std::size_t c = 0; c < width; ++c) {
          double acc = 0.0;
          for (std::size_t t = 0; t < nd.group; ++t) {
            const std::size_t r = g * nd.group + t;
            acc += m[r] * v.at(r, c);
          }
          out.at(g, c) = acc / denom;
        }
      }
      return;
    }
    case Op::kBceWithLogits: {
      const Tensor& z = in(nd.a);
      const Tensor& y = in(nd.b);
      if (!z.same_shape(y))
        fail(id, nd.op, "shape mismatch: " + shape_str(z.shape()) + " vs " + shape_str(y.shape()));
      out = Tensor(z.shape());
      for (std::size_t i = 0; i < z.size(); ++i) out[i] = bce_logit(z[i], y[i]);
      return;
    }
    case Op::kSoftChi2: {
      const Tensor& x = in(nd.a);
      if (x.rank() != 2) fail(id, nd.op, "rank-2 input required, got " + shape_str(x.shape()));
      const SoftChi2Spec& spec = *nd.chi2;
      if (!spec.row_weight.empty() && spec.row_weight.size() != x.rows())
        fail(id, nd.op, "row weight length mismatch");
      const std::size_t rows = x.rows();
      std::vector<double> column(rows);
      auto& masses = scratch_[static_cast<std::size_t>(id)];
      masses.clear();
      double total = 0.0;
      for (const auto& f : spec.features) {
        if (f.column >= x.cols()) fail(id, nd.op, "feature column out of range");
        for (std::size_t r = 0; r < rows; ++r) column[r] = x.at(r, f.column);
        const auto m = soft_histogram_weighted(column, spec.row_weight, f.edges, f.bandwidth);
        double chi = 0.0;
        for (std::size_t b = 0; b < m.size(); ++b) {
          const double d = m[b] - f.nominal_mass[b];
          chi += d * d / (f.nominal_mass[b] + 1.0);
        }
        total += chi;
        masses.insert(masses.end(), m.begin(), m.end());
      }
      out = Tensor::scalar(total / static_cast<double>(spec.features.size()));
      return;
    }
  }
  fail(id, nd.op, "unhandled op");
}

void Evaluation::backward(int root) {
  if (forward_root_ < 0) throw std::logic_error("backward: forward has not run");
  if (root < 0 || root > forward_root_)
    throw std::invalid_argument("backward: root not covered by the last forward pass");
  const Tensor& rv = values_[static_cast<std::size_t>(root)];
  if (rv.size() != 1)
    throw std::invalid_argument("backward: root must be scalar, got " + shape_str(rv.shape()));

  grads_.assign(graph_->size(), Tensor());
  grads_[static_cast<std::size_t>(root)] = Tensor(rv.shape(), {1.0});

  const auto ensure = [&](int id) -> Tensor& {
    auto& g = grads_[static_cast<std::size_t>(id)];
    if (g.empty()) g = Tensor(values_[static_cast<std::size_t>(id)].shape());
    return g;
  };
  const auto wants = [&](int id) { return graph_->node(id).requires_grad; };

  for (int id = root; id >= 0; --id) {
    const Node& nd = graph_->node(id);
    if (!nd.requires_grad || nd.op == Op::kLeaf || nd.op == Op::kConst) continue;
    const Tensor& go = grads_[static_cast<std::size_t>(id)];
    if (go.empty()) continue;  // not on a path to the root
    const Tensor& out = values_[static_cast<std::size_t>(id)];
    const auto in = [&](int i) -> const Tensor& { return values_[static_cast<std::size_t>(i)]; };

    switch (nd.op) {
      case Op::kMatmul: {
        const Tensor& a = in(nd.a);
        const Tensor& b = in(nd.b);
        if (wants(nd.a)) {
          Tensor da({a.rows(), a.cols()});
          matmul_nt(go, b, da);
          Tensor& ga = ensure(nd.a);
          for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += da[i];
        }
        if (wants(nd.b)) {
          Tensor db({b.rows(), b.cols()});
          matmul_tn(a, go, db);
          Tensor& gb = ensure(nd.b);
          for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += db[i];
        }
        break;
      }
      case Op::kAdd: {
        if (wants(nd.a)) {
          Tensor& ga = ensure(nd.a);
          for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += go[i];
        }
        if (wants(nd.b)) {
          Tensor& gb = ensure(nd.b);
          for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += go[i];
        }
        break;
      }
      case Op::kBiasAdd: {
        const Tensor& a = in(nd.a);
        if (wants(nd.a)) {
          Tensor& ga = ensure(nd.a);
          for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += go[i];
        }
        if (wants(nd.b)) {
          Tensor& gb = ensure(nd.b);
          for (std::size_t r = 0; r < a.rows(); ++r)
            for (std::size_t c = 0; c < a.cols(); ++c) gb[c] += go.at(r, c);
        }
        break;
      }
      case Op::kMul: {
        const Tensor& a = in(nd.a);
        const Tensor& b = in(nd.b);
        if (wants(nd.a)) {
          Tensor& ga = ensure(nd.a);
          for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += go[i] * b[i];
        }
        if (wants(nd.b)) {
          Tensor& gb = ensure(nd.b);
          for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += go[i] * a[i];
        }
        break;
      }
      case Op::kRelu: {
        const Tensor& a = in(nd.a);
        if (wants(nd.a)) {
          Tensor& ga = ensure(nd.a);
          for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += a[i] > 0.0 ? go[i] : 0.0;
        }
        break;
      }
      case Op::kSigmoid: {
        if (wants(nd.a)) {
          Tensor& ga = ensure(nd.a);
          for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += go[i] * out[i] * (1.0 - out[i]);
        }
        break;
      }
      case Op::kTanh: {
        if (wants(nd.a)) {
          Tensor& ga = ensure(nd.a);
          for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += go[i] * (1.0 - out[i] * out[i]);
        }
        break;
      }
      case Op::kExp: {
        if (wants(nd.a)) {
          Tensor& ga = ensure(nd.a);
          for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += go[i] * out[i];
        }
        break;
      }
      case Op::kSquare: {
        const Tensor& a = in(nd.a);
        if (wants(nd.a)) {
          Tensor& ga = ensure(nd.a);
          for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += 2.0 * a[i] * go[i];
        }
        break;
      }
      case Op::kMean:
      case Op::kSum: {
        if (wants(nd.a)) {
          const Tensor& a = in(nd.a);
          const double scale =
              nd.op == Op::kMean ? go.item() / static_cast<double>(a.size()) : go.item();
          Tensor& ga = ensure(nd.a);
          for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += scale;
        }
        break;
      }
      case Op::kMaskedMeanPool: {
        if (wants(nd.a)) {
          const Tensor& v = in(nd.a);
          const Tensor& m = in(nd.b);
          const std::size_t groups = v.rows() / nd.group;
          Tensor& ga = ensure(nd.a);
          for (std::size_t g = 0; g < groups; ++g) {
            double denom = 0.0;
            for (std::size_t t = 0; t < nd.group; ++t) denom += m[g * nd.group + t];
            denom = std::max(denom, 1.0);
            for (std::size_t t = 0; t < nd.group; ++t) {
              const std::size_t r = g * nd.group + t;
              if (m[r] == 0.0) continue;  // padded rows get exactly zero gradient
              for (std::size_t c = 0; c < v.cols(); ++c)
                ga.at(r, c) += m[r] / denom * go.at(g, c);
            }
          }
        }
        break;
      }
      case Op::kBceWithLogits: {
        const Tensor& z = in(nd.a);
        const Tensor& y = in(nd.b);
        if (wants(nd.a)) {
          Tensor& ga = ensure(nd.a);
          for (std::size_t i = 0; i < ga.size(); ++i)
            ga[i] += go[i] * (sigmoid_stable(z[i]) - y[i]);
        }
        if (wants(nd.b)) {
          Tensor& gb = ensure(nd.b);
          for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += go[i] * (-z[i]);
        }
        break;
      }
      case Op::kSoftChi2: {
        if (wants(nd.a)) {
          const Tensor& x = in(nd.a);
          const SoftChi2Spec& spec = *nd.chi2;
          const auto& masses = scratch_[static_cast<std::size_t>(id)];
          const double gscale = go.item() / static_cast<double>(spec.features.size());
          const std::size_t rows = x.rows();
          std::vector<double> column(rows), coef, dcol(rows);
          Tensor& ga = ensure(nd.a);
          std::size_t offset = 0;
          for (const auto& f : spec.features) {
            const std::size_t nb = f.edges.size() + 1;
            coef.assign(nb, 0.0);
            for (std::size_t b = 0; b < nb; ++b)
              coef[b] = 2.0 * (masses[offset + b] - f.nominal_mass[b]) / (f.nominal_mass[b] + 1.0);
            offset += nb;
            for (std::size_t r = 0; r < rows; ++r) column[r] = x.at(r, f.column);
            soft_histogram_value_grad(column, spec.row_weight, f.edges, f.bandwidth, coef, dcol);
            for (std::size_t r = 0; r < rows; ++r) ga.at(r, f.column) += gscale * dcol[r];
          }
        }
        break;
      }
      default:
        break;
    }
  }
  backward_done_ = true;
}

}  // namespace advaudit::ad
