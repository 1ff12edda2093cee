#include "advaudit/data.hpp"

#include <algorithm>
#include <stdexcept>

namespace advaudit {

const char* split_name(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "?";
}

Split split_from_name(const std::string& s) {
  if (s == "train") return Split::kTrain;
  if (s == "val") return Split::kVal;
  if (s == "test") return Split::kTest;
  throw std::invalid_argument("unknown split tag '" + s + "'");
}

int feature_index(const std::vector<std::string>& names, const std::string& name) {
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return static_cast<int>(i);
  throw std::invalid_argument("unknown feature name '" + name + "'");
}

Dataset Dataset::select(std::span<const std::size_t> example_ids) const {
  Dataset out;
  out.feature_names = feature_names;
  out.group = group;
  const std::size_t cols = x.cols();
  out.x = ad::Tensor({example_ids.size() * group, cols});
  if (has_mask()) out.mask.resize(example_ids.size() * group);
  out.labels.reserve(example_ids.size());
  out.split.reserve(example_ids.size());
  for (std::size_t k = 0; k < example_ids.size(); ++k) {
    const std::size_t e = example_ids[k];
    if (e >= examples()) throw std::out_of_range("Dataset::select: example index out of range");
    for (std::size_t t = 0; t < group; ++t) {
      const std::size_t src = e * group + t;
      const std::size_t dst = k * group + t;
      for (std::size_t c = 0; c < cols; ++c) out.x.at(dst, c) = x.at(src, c);
      if (has_mask()) out.mask[dst] = mask[src];
    }
    out.labels.push_back(labels[e]);
    out.split.push_back(split[e]);
  }
  return out;
}

std::vector<std::size_t> Dataset::indices_of(Split tag) const {
  std::vector<std::size_t> idx;
  for (std::size_t e = 0; e < examples(); ++e)
    if (split[e] == tag) idx.push_back(e);
  return idx;
}

Dataset Dataset::subset(Split tag) const {
  const auto idx = indices_of(tag);
  return select(idx);
}

bool Dataset::schema_equals(const Dataset& o) const {
  return feature_names == o.feature_names && group == o.group;
}

Dataset concat_datasets(const Dataset& a, const Dataset& b) {
  if (!a.schema_equals(b)) throw std::invalid_argument("concat_datasets: schema mismatch");
  Dataset out;
  out.feature_names = a.feature_names;
  out.group = a.group;
  out.x = ad::Tensor({a.x.rows() + b.x.rows(), a.x.cols()});
  std::copy(a.x.data().begin(), a.x.data().end(), out.x.data().begin());
  std::copy(b.x.data().begin(), b.x.data().end(),
            out.x.data().begin() + static_cast<std::ptrdiff_t>(a.x.size()));
  if (a.has_mask() || b.has_mask()) {
    out.mask = a.mask;
    out.mask.insert(out.mask.end(), b.mask.begin(), b.mask.end());
  }
  out.labels = a.labels;
  out.labels.insert(out.labels.end(), b.labels.begin(), b.labels.end());
  out.split = a.split;
  out.split.insert(out.split.end(), b.split.begin(), b.split.end());
  return out;
}

void Dataset::check_consistent() const {
  const std::size_t n = examples();
  if (x.rank() != 2) throw std::invalid_argument("Dataset: feature matrix must be rank 2");
  if (x.cols() != feature_names.size())
    throw std::invalid_argument("Dataset: feature name count does not match columns");
  if (x.rows() != n * group) throw std::invalid_argument("Dataset: row count mismatch");
  if (split.size() != n) throw std::invalid_argument("Dataset: split tag count mismatch");
  if (has_mask() && mask.size() != x.rows())
    throw std::invalid_argument("Dataset: mask length mismatch");
}

}  // namespace advaudit
