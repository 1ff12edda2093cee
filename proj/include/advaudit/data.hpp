#pragma once

#include <span>
#include <string>
#include <vector>

#include "advaudit/tensor.hpp"

namespace advaudit {

enum class Split { kTrain, kVal, kTest };

const char* split_name(Split s);
Split split_from_name(const std::string& s);

/// Feature-matrix carrier for both benchmark layouts.
///  - event tables: x is [events, features], group == 1, mask empty
///  - track sets:   x is [events * group, features] with `group` rows per
///    event, mask holds one 0/1 entry per row and padded rows are exactly zero
struct Dataset {
  std::vector<std::string> feature_names;
  ad::Tensor x;
  std::vector<double> mask;
  std::size_t group = 1;
  std::vector<int> labels;
  std::vector<Split> split;

  std::size_t examples() const { return labels.size(); }
  std::size_t features() const { return feature_names.size(); }
  bool has_mask() const { return !mask.empty(); }

  /// Examples picked by index, preserving order.
  Dataset select(std::span<const std::size_t> example_ids) const;
  Dataset subset(Split tag) const;
  std::vector<std::size_t> indices_of(Split tag) const;

  bool schema_equals(const Dataset& o) const;
  void check_consistent() const;
};

int feature_index(const std::vector<std::string>& names, const std::string& name);

/// Stacks two schema-compatible datasets, a's examples first.
Dataset concat_datasets(const Dataset& a, const Dataset& b);

}  // namespace advaudit
