#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "advaudit/graph.hpp"
#include "advaudit/rng.hpp"

namespace advaudit::testing {

/// Central finite differences of the scalar at `root` with respect to every
/// element of `leaf`. The independent oracle for every gradient check.
inline ad::Tensor fd_gradient(const ad::Graph& g, ad::Bindings bindings, const std::string& leaf,
                              int root, double h = 1e-5) {
  ad::Evaluation eval(g);
  const ad::Tensor base = bindings.at(leaf);
  ad::Tensor out(base.shape());
  for (std::size_t i = 0; i < base.size(); ++i) {
    ad::Tensor plus = base, minus = base;
    plus[i] += h;
    minus[i] -= h;
    bindings[leaf] = plus;
    const double fp = eval.forward(bindings, root).item();
    bindings[leaf] = minus;
    const double fm = eval.forward(bindings, root).item();
    out[i] = (fp - fm) / (2.0 * h);
  }
  return out;
}

/// relative error < 1e-4, absolute < 1e-7 near zero
inline bool grad_close(double analytic, double fd, double rel_tol = 1e-4,
                       double abs_tol = 1e-7) {
  const double scale = std::max(std::abs(analytic), std::abs(fd));
  return std::abs(analytic - fd) <= std::max(rel_tol * scale, abs_tol);
}

inline bool grads_close(const ad::Tensor& analytic, const ad::Tensor& fd, double rel_tol = 1e-4,
                        double abs_tol = 1e-7) {
  if (!analytic.same_shape(fd)) return false;
  for (std::size_t i = 0; i < analytic.size(); ++i)
    if (!grad_close(analytic[i], fd[i], rel_tol, abs_tol)) return false;
  return true;
}

struct RandomGraphCase {
  ad::Graph graph;
  ad::Bindings bindings;
  int root = -1;
  std::vector<std::string> grad_leaves;
};

/// Random composite network (<= 4 layers, <= 16 units) over a leaf input and
/// one leaf weight matrix. Inputs are nudged until every relu sits away from
/// its kink so the finite-difference oracle is well defined.
inline RandomGraphCase make_random_graph(std::uint64_t seed) {
  RandomStream rng(derive_seed(seed, "fd-graph"));
  RandomGraphCase c;

  const std::size_t rows = 2 + rng.index(3);
  std::size_t width = 2 + rng.index(7);
  const int x = c.graph.leaf("x", true);
  c.grad_leaves = {"x"};

  ad::Tensor xv({rows, width});
  for (std::size_t i = 0; i < xv.size(); ++i) xv[i] = rng.uniform(-1.5, 1.5);

  std::vector<int> relu_inputs;
  int h = x;
  const std::size_t layers = 1 + rng.index(4);
  for (std::size_t l = 0; l < layers; ++l) {
    const std::size_t next = 2 + rng.index(15);
    ad::Tensor wv({width, next}), bv({next});
    const double scale = 1.0 / std::sqrt(static_cast<double>(width));
    for (std::size_t i = 0; i < wv.size(); ++i) wv[i] = rng.uniform(-scale, scale);
    for (std::size_t i = 0; i < bv.size(); ++i) bv[i] = rng.uniform(-0.3, 0.3);

    int w;
    if (l == 0) {
      w = c.graph.leaf("w", true);
      c.grad_leaves.push_back("w");
      c.bindings["w"] = wv;
    } else {
      w = c.graph.constant(wv);
    }
    const int pre = c.graph.bias_add(c.graph.matmul(h, w), c.graph.constant(bv));
    switch (rng.index(5)) {
      case 0:
        relu_inputs.push_back(pre);
        h = c.graph.relu(pre);
        break;
      case 1: h = c.graph.sigmoid(pre); break;
      case 2: h = c.graph.tanh(pre); break;
      case 3: h = c.graph.square(pre); break;
      default: h = c.graph.exp(c.graph.mul(pre, c.graph.constant(
                       ad::Tensor::full({rows, next}, 0.5))));
    }
    width = next;
  }

  switch (rng.index(3)) {
    case 0: c.root = c.graph.mean(h); break;
    case 1: c.root = c.graph.sum(c.graph.square(h)); break;
    default: {
      ad::Tensor wv({width, 1});
      for (std::size_t i = 0; i < wv.size(); ++i)
        wv[i] = rng.uniform(-1.0, 1.0) / std::sqrt(static_cast<double>(width));
      const int logit = c.graph.matmul(h, c.graph.constant(wv));
      ad::Tensor targets({rows, 1});
      for (std::size_t i = 0; i < rows; ++i) targets[i] = rng.index(2) ? 1.0 : 0.0;
      c.root = c.graph.mean(c.graph.bce_with_logits(logit, c.graph.constant(targets)));
    }
  }

  // keep relu pre-activations away from the kink
  for (int attempt = 0; attempt < 50; ++attempt) {
    c.bindings["x"] = xv;
    ad::Evaluation eval(c.graph);
    eval.forward(c.bindings, c.root);
    bool ok = true;
    for (int id : relu_inputs) {
      const ad::Tensor& v = eval.value(id);
      for (std::size_t i = 0; i < v.size(); ++i)
        if (std::abs(v[i]) < 5e-4) ok = false;
    }
    if (ok) break;
    for (std::size_t i = 0; i < xv.size(); ++i) xv[i] = xv[i] * 1.03 + 0.011;
  }
  c.bindings["x"] = xv;
  return c;
}

}  // namespace advaudit::testing
