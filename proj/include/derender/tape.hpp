// Copyright 2026 The Derender Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <any>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "derender/tensor.hpp"

namespace derender::ad {

class Tape;

// Handle to a value recorded on a tape. Cheap to copy; valid as long as the
// tape is alive.
class Var {
 public:
  Var() = default;
  bool valid() const { return tape_ != nullptr; }
  int id() const { return id_; }
  Tape& tape() const { return *tape_; }
  const Tensor& value() const;
  const Shape& shape() const { return value().shape; }

 private:
  friend class Tape;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}
  Tape* tape_ = nullptr;
  int id_ = -1;
};

// Straight-line tape of tensor operations with reverse-mode differentiation.
// Nodes are recorded in execution order, which is already a topological
// order; backward() walks it once in reverse. A tape is single-threaded;
// data parallelism happens across independent tapes.
struct TapeOptions {
  bool check_finite = true;  // NaN/Inf after a forward op is an error state
};

class Tape {
 public:
  using Options = TapeOptions;

  explicit Tape(Options opt = Options()) : opt_(opt) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // upstream gradient of the node's output -> accumulate into inputs
  using BackwardFn = std::function<void(Tape&, const Tensor& upstream, int out_id)>;

  Var leaf(Tensor t, bool requires_grad = false) {
    if (opt_.check_finite)
      require(t.all_finite(), "leaf: non-finite values in tensor of shape ",
              shape_str(t.shape));
    return push(std::move(t), requires_grad);
  }

  Var constant(Tensor t) { return leaf(std::move(t), false); }

  Var record(const char* op, std::span<const Var> inputs, Tensor out, BackwardFn bw) {
    bool needs = false;
    for (const Var& v : inputs) {
      require(v.valid() && &v.tape() == this, op, ": input from a different tape");
      needs = needs || needs_grad_[static_cast<size_t>(v.id())];
    }
    if (opt_.check_finite)
      require(out.all_finite(), op, ": non-finite values in output of shape ",
              shape_str(out.shape));
    Var v = push(std::move(out), needs);
    if (needs) {
      Node n;
      n.op = op;
      n.output = v.id();
      n.backward = std::move(bw);
      nodes_.push_back(std::move(n));
    }
    return v;
  }

  Var record(const char* op, std::initializer_list<Var> inputs, Tensor out, BackwardFn bw) {
    return record(op, std::span<const Var>(inputs.begin(), inputs.size()),
                  std::move(out), std::move(bw));
  }

  // Reverse pass from a scalar loss. The tape is consumed: a second call is
  // an error. Gradients accumulate additively across fan-out.
  void backward(const Var& loss) {
    require(!consumed_, "backward: tape already consumed by a previous backward");
    require(loss.valid() && &loss.tape() == this, "backward: loss from a different tape");
    require(loss.value().numel() == 1, "backward: loss must be scalar, got shape ",
            shape_str(loss.value().shape));
    require(!nodes_.empty() || needs_grad_[static_cast<size_t>(loss.id())],
            "backward: tape is empty");
    consumed_ = true;
    grads_.assign(values_.size(), std::nullopt);
    Tensor seed(loss.value().shape, 1);
    grads_[static_cast<size_t>(loss.id())] = std::move(seed);
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
      auto& g = grads_[static_cast<size_t>(it->output)];
      if (!g.has_value()) continue;
      it->backward(*this, *g, it->output);
    }
  }

  bool has_grad(const Var& v) const {
    return consumed_ && grads_[static_cast<size_t>(v.id())].has_value();
  }

  const Tensor& grad(const Var& v) const {
    require(consumed_, "grad: backward has not run");
    const auto& g = grads_[static_cast<size_t>(v.id())];
    require(g.has_value(), "grad: no gradient reached value ", v.id());
    return *g;
  }

  // Used by backward rules to push gradient into an input.
  void accumulate_grad(int id, const Tensor& g) {
    if (!needs_grad_[static_cast<size_t>(id)]) return;
    const Tensor& v = values_[static_cast<size_t>(id)];
    require(g.shape == v.shape, "accumulate_grad: gradient shape ", shape_str(g.shape),
            " does not match value shape ", shape_str(v.shape));
    auto& slot = grads_[static_cast<size_t>(id)];
    if (!slot.has_value()) {
      slot = g;
    } else {
      real* a = slot->data.data();
      const real* b = g.data.data();
      for (int64_t i = 0, n = g.numel(); i < n; ++i) a[i] += b[i];
    }
  }

  const Tensor& value(int id) const { return values_[static_cast<size_t>(id)]; }
  bool needs_grad(int id) const { return needs_grad_[static_cast<size_t>(id)]; }
  bool needs_grad(const Var& v) const { return needs_grad(v.id()); }
  bool consumed() const { return consumed_; }
  size_t num_values() const { return values_.size(); }
  const Options& options() const { return opt_; }

 private:
  struct Node {
    const char* op;
    int output;
    BackwardFn backward;
  };

  Var push(Tensor t, bool needs) {
    values_.push_back(std::move(t));
    needs_grad_.push_back(needs ? 1 : 0);
    return Var(this, static_cast<int>(values_.size()) - 1);
  }

  Options opt_;
  std::vector<Tensor> values_;
  std::vector<char> needs_grad_;
  std::vector<std::optional<Tensor>> grads_;
  std::vector<Node> nodes_;
  bool consumed_ = false;
};

inline const Tensor& Var::value() const { return tape_->value(id_); }

// User-defined operation participating in backward like the built-ins.
// forward receives input values and may stash state for backward; backward
// returns one gradient per differentiable input (nullopt = no gradient).
struct CustomOp {
  std::string name;
  int num_inputs = 0;
  int num_grads = 0;
  std::function<Tensor(std::span<const Tensor* const>, std::any& saved)> forward;
  std::function<std::vector<std::optional<Tensor>>(
      const std::any& saved, std::span<const Tensor* const>, const Tensor& upstream)>
      backward;
};

class OpHandle {
 public:
  OpHandle() = default;
  const CustomOp& op() const { return *op_; }
  std::shared_ptr<const CustomOp> ptr() const { return op_; }
  bool valid() const { return op_ != nullptr; }

 private:
  friend OpHandle register_custom(CustomOp op);
  std::shared_ptr<const CustomOp> op_;
};

inline OpHandle register_custom(CustomOp op) {
  require(!op.name.empty(), "register_custom: op needs a name");
  require(op.num_inputs > 0, "register_custom: ", op.name, ": num_inputs must be positive");
  require(op.num_grads == op.num_inputs, "register_custom: ", op.name,
          ": backward must produce one gradient per input (declared ", op.num_grads,
          " gradients for ", op.num_inputs, " inputs)");
  require(bool(op.forward) && bool(op.backward), "register_custom: ", op.name,
          ": forward and backward are both required");
  OpHandle h;
  h.op_ = std::make_shared<const CustomOp>(std::move(op));
  return h;
}

inline Var apply_custom(Tape& tape, const OpHandle& handle, std::span<const Var> inputs) {
  require(handle.valid(), "apply_custom: invalid op handle");
  const CustomOp& op = handle.op();
  require(static_cast<int>(inputs.size()) == op.num_inputs, op.name, ": expected ",
          op.num_inputs, " inputs, got ", inputs.size());
  std::vector<const Tensor*> vals;
  vals.reserve(inputs.size());
  for (const Var& v : inputs) vals.push_back(&v.value());
  auto saved = std::make_shared<std::any>();
  Tensor out = op.forward(vals, *saved);
  std::vector<int> in_ids;
  in_ids.reserve(inputs.size());
  for (const Var& v : inputs) in_ids.push_back(v.id());
  auto op_ptr = handle.ptr();
  return tape.record(
      op.name.c_str(), inputs, std::move(out),
      [op_ptr = std::move(op_ptr), saved = std::move(saved), in_ids](Tape& t, const Tensor& g,
                                                                     int) {
        std::vector<const Tensor*> ins;
        ins.reserve(in_ids.size());
        for (int id : in_ids) ins.push_back(&t.value(id));
        auto grads = op_ptr->backward(*saved, ins, g);
        require(grads.size() == in_ids.size(), op_ptr->name,
                ": backward returned ", grads.size(), " gradients for ",
                in_ids.size(), " inputs");
        for (size_t i = 0; i < in_ids.size(); ++i)
          if (grads[i].has_value()) t.accumulate_grad(in_ids[i], *grads[i]);
      });
}

inline Var apply_custom(Tape& tape, const OpHandle& handle, std::initializer_list<Var> inputs) {
  return apply_custom(tape, handle, std::span<const Var>(inputs.begin(), inputs.size()));
}

}  // namespace derender::ad
