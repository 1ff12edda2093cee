#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "advaudit/tensor.hpp"

namespace advaudit::ad {

enum class Op {
  kLeaf,
  kConst,
  kMatmul,
  kAdd,
  kBiasAdd,
  kMul,
  kRelu,
  kSigmoid,
  kTanh,
  kExp,
  kSquare,
  kMean,
  kSum,
  kMaskedMeanPool,
  kBceWithLogits,
  kSoftChi2,
};

const char* op_name(Op op);

/// Frozen soft-chi2 comparison against a non-differentiated nominal batch.
/// One entry per audited feature column; guard-bin masses are included.
struct SoftChi2Spec {
  struct Feature {
    std::size_t column = 0;
    std::vector<double> edges;         // ascending, >= 2
    double bandwidth = 0.0;
    std::vector<double> nominal_mass;  // edges.size() + 1 entries
  };
  std::vector<Feature> features;
  std::vector<double> row_weight;  // 0/1 per row; empty = all rows count
};

struct Node {
  Op op = Op::kLeaf;
  int a = -1;
  int b = -1;
  std::string name;      // leaves
  Tensor value;          // constants
  std::size_t group = 0; // masked_mean_pool rows per example
  std::shared_ptr<const SoftChi2Spec> chi2;
  bool requires_grad = false;
};

using Bindings = std::map<std::string, Tensor, std::less<>>;

/// Program for the reverse-mode engine. Nodes are appended in topological
/// order by construction and the graph is immutable once built; any number
/// of Evaluations may run against it concurrently.
class Graph {
 public:
  int leaf(std::string name, bool requires_grad = true);
  int constant(Tensor value);
  int matmul(int a, int b);
  int add(int a, int b);
  int bias_add(int matrix, int row);
  int mul(int a, int b);
  int relu(int a);
  int sigmoid(int a);
  int tanh(int a);
  int exp(int a);
  int square(int a);
  int mean(int a);
  int sum(int a);
  int masked_mean_pool(int values, int mask, std::size_t group_size);
  int bce_with_logits(int logits, int targets);
  int soft_chi2(int x, SoftChi2Spec spec);

  std::size_t size() const { return nodes_.size(); }
  const Node& node(int id) const { return nodes_[static_cast<std::size_t>(id)]; }
  int leaf_id(std::string_view name) const;

 private:
  int push(Node n);
  int check(int id, const char* ctx) const;

  std::vector<Node> nodes_;
  std::map<std::string, int, std::less<>> leaves_;
};

/// Per-run forward/backward state for one Graph.
class Evaluation {
 public:
  explicit Evaluation(const Graph& g);

  /// Evaluates nodes [0, root] and returns the root value. Caches every
  /// intermediate for a later backward pass. Leaves are read from bindings.
  const Tensor& forward(const Bindings& bindings, int root);

  /// Accumulates d root / d node for every node that requires gradients.
  /// root must be scalar and already covered by the last forward call.
  void backward(int root);

  const Tensor& value(int id) const;
  /// Zero tensor when the node is not connected to the differentiated root.
  const Tensor& grad(int id);
  bool has_forward() const { return forward_root_ >= 0; }

 private:
  void compute(int id, const Bindings& bindings);

  const Graph* graph_;
  std::vector<Tensor> values_;
  std::vector<Tensor> grads_;
  std::vector<std::vector<double>> scratch_;  // soft-chi2 masses
  int forward_root_ = -1;
  bool backward_done_ = false;
};

}  // namespace advaudit::ad
