// Copyright 2026 The mossformer-cpp Authors
// SPDX-License-Identifier: Apache-2.0

// Define-by-run reverse-mode differentiation.
//
// A Tape records every primitive executed while it is recording; each result
// is a Node holding its value, a lazily allocated gradient and a closure that
// pushes that gradient into the node's inputs. Tapes are rebuilt for every
// forward pass and are confined to one thread.

#pragma once

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "mossformer/ndarray.hpp"

namespace mossformer {

using Rng = std::mt19937_64;

template <typename T>
class Tape;

template <typename T>
struct Node {
  NdArray<T> value;
  NdArray<T> grad;
  std::function<void(const NdArray<T>&)> backward;
  bool requires_grad = false;
  const char* op = "leaf";
  NdArray<T>* grad_sink = nullptr;

  NdArray<T>& grad_buffer() {
    if (grad.empty()) grad = NdArray<T>(value.shape());
    return grad;
  }
};

/// Handle to a value produced on a Tape.
template <typename T>
class Var {
 public:
  Var() = default;
  Var(Tape<T>* tape, std::shared_ptr<Node<T>> node) : tape_(tape), node_(std::move(node)) {}

  bool valid() const { return node_ != nullptr; }
  const NdArray<T>& value() const { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  std::size_t dim(std::size_t axis) const { return node_->value.dim(axis); }
  std::size_t rank() const { return node_->value.rank(); }
  bool requires_grad() const { return node_->requires_grad; }
  Tape<T>* tape() const { return tape_; }
  const std::shared_ptr<Node<T>>& node() const { return node_; }

  /// Accumulated gradient; zeros if no gradient reached this value.
  NdArray<T> grad() const {
    return node_->grad.empty() ? NdArray<T>(node_->value.shape()) : node_->grad;
  }

  /// Gradient buffer of this value, allocated on first use. For backward closures.
  NdArray<T>& grad_buffer() const { return node_->grad_buffer(); }

 private:
  Tape<T>* tape_ = nullptr;
  std::shared_ptr<Node<T>> node_;
};

/// Named trainable tensors with paired gradient slots, kept in name order.
template <typename T>
class ParamStore {
 public:
  struct Entry {
    NdArray<T> value;
    NdArray<T> grad;
    bool trainable = true;
  };

  Entry& add(const std::string& name, NdArray<T> value, bool trainable = true) {
    if (entries_.count(name)) throw ConfigError("ParamStore: duplicate parameter '" + name + "'");
    Entry e;
    e.grad = NdArray<T>(value.shape());
    e.value = std::move(value);
    e.trainable = trainable;
    return entries_.emplace(name, std::move(e)).first->second;
  }

  bool contains(const std::string& name) const { return entries_.count(name) != 0; }

  Entry& at(const std::string& name) {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw ConfigError("ParamStore: no parameter '" + name + "'");
    return it->second;
  }
  const Entry& at(const std::string& name) const {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw ConfigError("ParamStore: no parameter '" + name + "'");
    return it->second;
  }

  std::map<std::string, Entry>& entries() { return entries_; }
  const std::map<std::string, Entry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

  void zero_grad() {
    for (auto& [name, e] : entries_) e.grad.fill(T{0});
  }

  /// Total scalar count, optionally restricted to names starting with `prefix`.
  std::size_t scalar_count(const std::string& prefix = "", bool trainable_only = true) const {
    std::size_t n = 0;
    for (const auto& [name, e] : entries_) {
      if (trainable_only && !e.trainable) continue;
      if (name.compare(0, prefix.size(), prefix) == 0) n += e.value.size();
    }
    return n;
  }

  template <typename U>
  ParamStore<U> cast() const {
    ParamStore<U> out;
    for (const auto& [name, e] : entries_) out.add(name, e.value.template cast<U>(), e.trainable);
    return out;
  }

 private:
  std::map<std::string, Entry> entries_;
};

template <typename T>
class Tape {
 public:
  explicit Tape(bool record = true) : record_(record) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return record_; }
  std::size_t size() const { return nodes_.size(); }

  /// Value that never receives a gradient.
  Var<T> constant(NdArray<T> value) {
    auto node = std::make_shared<Node<T>>();
    node->value = std::move(value);
    node->op = "constant";
    return Var<T>(this, std::move(node));
  }

  /// Free input whose gradient is wanted (tests, adjoint checks).
  Var<T> leaf(NdArray<T> value) {
    auto node = std::make_shared<Node<T>>();
    node->value = std::move(value);
    node->requires_grad = record_;
    if (record_) nodes_.push_back(node);
    return Var<T>(this, std::move(node));
  }

  /// Parameter `name` of `store`; its gradient is added to the store's slot by backward().
  Var<T> param(ParamStore<T>& store, const std::string& name) {
    auto& entry = store.at(name);
    auto node = std::make_shared<Node<T>>();
    node->value = entry.value;
    node->op = "param";
    node->requires_grad = record_ && entry.trainable;
    if (node->requires_grad) {
      node->grad_sink = &entry.grad;
      nodes_.push_back(node);
    }
    return Var<T>(this, std::move(node));
  }

  /// Records the result of a primitive. `backward` receives the gradient of
  /// the result and accumulates into the parents that require it.
  Var<T> record(const char* op, NdArray<T> value, std::initializer_list<Var<T>> parents,
                std::function<void(const NdArray<T>&)> backward) {
    auto node = std::make_shared<Node<T>>();
    node->value = std::move(value);
    node->op = op;
    bool needs = false;
    for (const auto& p : parents) {
      if (p.tape() != this) throw DimensionError(std::string(op) + ": operands from another tape");
      needs = needs || p.requires_grad();
    }
    if (record_ && needs) {
      node->requires_grad = true;
      node->backward = std::move(backward);
      nodes_.push_back(node);
    }
    return Var<T>(this, std::move(node));
  }

  /// Reverse sweep from a scalar result.
  void backward(const Var<T>& result) {
    if (result.value().size() != 1) {
      throw DimensionError("backward: result must be a scalar, got " +
                           shape_string(result.shape()));
    }
    backward(result, NdArray<T>(result.shape(), T{1}));
  }

  /// Reverse sweep seeded with an explicit output gradient.
  void backward(const Var<T>& result, const NdArray<T>& seed) {
    if (seed.shape() != result.shape()) throw DimensionError("backward: seed shape mismatch");
    if (!result.requires_grad()) return;
    auto& g = result.node()->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += seed[i];
    trace_.clear();
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
      Node<T>& n = **it;
      if (n.grad.empty()) continue;
      if (n.backward) {
        trace_.push_back(n.op);
        n.backward(n.grad);
      }
      if (n.grad_sink) {
        auto& sink = *n.grad_sink;
        for (std::size_t i = 0; i < sink.size(); ++i) sink[i] += n.grad[i];
      }
    }
  }

  /// Op names in the order the last backward() visited them.
  const std::vector<const char*>& backward_trace() const { return trace_; }

  /// Op names of the recorded non-leaf nodes in execution order.
  std::vector<const char*> forward_trace() const {
    std::vector<const char*> ops;
    for (const auto& n : nodes_)
      if (n->backward) ops.push_back(n->op);
    return ops;
  }

 private:
  bool record_;
  std::vector<std::shared_ptr<Node<T>>> nodes_;
  std::vector<const char*> trace_;
};

/// Counters filled in by instrumented forward passes.
struct ForwardStats {
  std::size_t chunk_score_blocks = 0;
};

/// Everything a module needs to run forward.
template <typename T>
struct ForwardContext {
  Tape<T>& tape;
  ParamStore<T>& params;
  bool train = false;
  Rng* rng = nullptr;
  ForwardStats* stats = nullptr;

  Var<T> param(const std::string& name) const { return tape.param(params, name); }
};

}  // namespace mossformer
