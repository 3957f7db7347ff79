#pragma once

#include "fvad/error.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace fvad::nn {

using Index = Eigen::Index;

template <typename S>
using Matrix = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Shape = std::vector<Index>;

inline Index shape_size(const Shape& shape) {
  Index n = 1;
  for (Index d : shape) n *= d;
  return n;
}

// Matrix view of a shape: 1-D tensors are a single row, 2-D tensors map directly.
inline std::pair<Index, Index> matrix_dims(const Shape& shape) {
  if (shape.size() == 1) return {1, shape[0]};
  if (shape.size() == 2) return {shape[0], shape[1]};
  throw ShapeError("only 1-D and 2-D tensors are supported");
}

std::string shape_string(const Shape& shape);

// Named trainable tensors in insertion order, with the Adam moments that
// belong to each one. The order is the checkpoint order.
template <typename S>
class ParamStore {
 public:
  struct Entry {
    std::string name;
    Shape shape;
    Matrix<S> value;
    Matrix<S> adam_m;
    Matrix<S> adam_v;
  };

  std::size_t add(std::string name, Shape shape, Matrix<S> value) {
    if (index_.count(name) != 0) throw InvalidConfig("duplicate parameter name: " + name);
    const auto [rows, cols] = matrix_dims(shape);
    if (value.rows() != rows || value.cols() != cols) {
      throw ShapeError("parameter " + name + ": value does not match shape " +
                       shape_string(shape));
    }
    index_.emplace(name, entries_.size());
    Entry e{std::move(name), std::move(shape), std::move(value), {}, {}};
    e.adam_m = Matrix<S>::Zero(rows, cols);
    e.adam_v = Matrix<S>::Zero(rows, cols);
    entries_.push_back(std::move(e));
    return entries_.size() - 1;
  }

  std::size_t size() const { return entries_.size(); }
  bool contains(std::string_view name) const { return index_.count(std::string(name)) != 0; }

  std::size_t index_of(std::string_view name) const {
    const auto it = index_.find(std::string(name));
    if (it == index_.end()) throw InvalidConfig("unknown parameter: " + std::string(name));
    return it->second;
  }

  Entry& entry(std::size_t i) { return entries_.at(i); }
  const Entry& entry(std::size_t i) const { return entries_.at(i); }
  Matrix<S>& value(std::string_view name) { return entries_[index_of(name)].value; }
  const Matrix<S>& value(std::string_view name) const { return entries_[index_of(name)].value; }

  const std::vector<Entry>& entries() const { return entries_; }

  std::int64_t scalar_count() const {
    std::int64_t n = 0;
    for (const auto& e : entries_) n += shape_size(e.shape);
    return n;
  }

  std::int64_t adam_steps() const { return adam_steps_; }
  void set_adam_steps(std::int64_t n) { adam_steps_ = n; }

  // Values converted to another scalar type; optimizer state is reset.
  template <typename T>
  ParamStore<T> cast() const {
    ParamStore<T> out;
    for (const auto& e : entries_) out.add(e.name, e.shape, e.value.template cast<T>());
    return out;
  }

 private:
  std::vector<Entry> entries_;
  std::map<std::string, std::size_t, std::less<>> index_;
  std::int64_t adam_steps_ = 0;
};

// Gradients aligned index-for-index with a ParamStore.
template <typename S>
using Grads = std::vector<Matrix<S>>;

template <typename S>
Grads<S> zero_grads(const ParamStore<S>& store) {
  Grads<S> g;
  g.reserve(store.size());
  for (const auto& e : store.entries()) g.push_back(Matrix<S>::Zero(e.value.rows(), e.value.cols()));
  return g;
}

}  // namespace fvad::nn
