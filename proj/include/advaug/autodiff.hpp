// Copyright 2026 The advaug Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "advaug/tensor.hpp"

/// Minimal reverse-mode automatic differentiation over Tensor values.
///
/// A Var is a shared handle to a graph node. Operations build new nodes that
/// keep their inputs alive; `backward(root)` walks the graph once in reverse
/// topological order and accumulates into `grad()` of every node that
/// requires a gradient. Leaf gradients accumulate across calls until
/// `zero_grad()`.
namespace advaug::ad {

struct Node {
  Tensor value;
  Tensor grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward;

  /// Gradient buffer, zero-filled to the value's shape on first use.
  Tensor& grad_ref();
};

class Var {
 public:
  Var() = default;
  explicit Var(Tensor value, bool requires_grad = false);
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  bool defined() const { return static_cast<bool>(node_); }
  const Tensor& value() const { return node_->value; }
  /// Direct access for optimizers and finite-difference probes.
  Tensor& mutable_value() { return node_->value; }
  const Tensor& grad() const { return node_->grad; }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  const Shape& shape() const { return node_->value.shape(); }
  std::size_t dim(std::size_t i) const { return node_->value.dim(i); }
  void zero_grad();

  const std::shared_ptr<Node>& node() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

/// Creates the result node of an operation. The backward closure is only
/// retained when at least one input requires a gradient.
Var make_op(Tensor value, const std::vector<Var>& inputs,
            std::function<void(Node&)> backward);

/// Gradient buffer of input `i` of `self`, or nullptr when that input does
/// not take part in differentiation.
inline Tensor* input_grad(Node& self, std::size_t i) {
  Node& in = *self.inputs[i];
  return in.requires_grad ? &in.grad_ref() : nullptr;
}

/// Seeds d(root)/d(root) = 1 and back-propagates. `root` must be a scalar.
void backward(const Var& root);

/// Number of `backward` invocations made from the calling thread.
std::uint64_t backward_calls();

/// Same value, no gradient path.
Var detach(const Var& v);

/// A trainable leaf.
inline Var parameter(Tensor value) { return Var(std::move(value), true); }

}  // namespace advaug::ad
