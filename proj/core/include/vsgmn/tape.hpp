#pragma once

#include <functional>
#include <string>
#include <vector>

#include "vsgmn/tensor.hpp"

namespace vsgmn {

class Tape;

// Handle to a node on a Tape. Cheap to copy; the value lives on the tape.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const std::vector<std::size_t>& shape() const { return value().shape(); }
  std::size_t id() const { return id_; }
  Tape* tape() const { return tape_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

// Adjoint of every tape node after a backward sweep. Nodes the root does not
// depend on have no stored adjoint and read back as zeros.
class GradientMap {
 public:
  // Adjoint of `v`, shaped like its value; zeros if the root is detached.
  Tensor grad(const Var& v) const;

  // Accumulation buffer for node `id`, allocated as zeros of `shape` on
  // first touch. Exposed so that custom kernels can take part in backward.
  Tensor& buffer(std::size_t id, const std::vector<std::size_t>& shape);

  bool has(std::size_t id) const;
  const Tensor& at(std::size_t id) const;

 private:
  friend class Tape;
  std::vector<Tensor> adjoints_;  // empty Tensor <=> not yet touched
};

// Append-only record of a differentiable computation. Every node's operands
// precede it on the tape, so walking ids in reverse is a valid topological
// order for the backward sweep. Recording is single-threaded per tape;
// independent tapes can live on separate threads.
class Tape {
 public:
  using Backprop =
      std::function<void(const Tape&, std::size_t self_id,
                         const Tensor& adjoint, GradientMap& grads)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Records an input node. Leaves have no backprop step; their adjoints are
  // where gradients are read from.
  Var leaf(Tensor value);

  // Records an operation result. `kernel` names the op for diagnostics and
  // fault injection; `backprop` scatters this node's adjoint to its operands.
  Var record(const char* kernel, Tensor value, Backprop backprop);

  std::size_t size() const { return nodes_.size(); }
  const Tensor& value(std::size_t id) const { return nodes_[id].value; }

  // Reverse-mode sweep seeding the single-element `root` with adjoint 1.
  // Does not mutate recorded values, so repeated sweeps over the same tape
  // produce bit-identical gradients.
  GradientMap backward(const Var& root) const;

 private:
  struct Node {
    Tensor value;
    std::string kernel;  // empty for leaves
    Backprop backprop;   // empty for leaves
  };
  std::vector<Node> nodes_;
};

namespace testing {
// Makes every subsequent backward step of the named kernel scale its incoming
// adjoint by 1.5, deliberately corrupting analytic gradients. Test hook for
// exercising gradient-check failure paths; never enabled in production code.
void set_backward_fault(const std::string& kernel);
void clear_backward_fault();
}  // namespace testing

// --- differentiable kernels -------------------------------------------------
// All kernels validate operand shapes (DimensionError naming both shapes) and
// that operands live on the same tape (ContractError).

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);  // elementwise
Var scalar_mul(const Var& a, double c);
Var add_row_broadcast(const Var& a, const Var& row);  // (m x n) + (n)
Var matmul(const Var& a, const Var& b);
Var transpose(const Var& a);
Var relu(const Var& a);
Var exp(const Var& a);
Var log(const Var& a);
Var sum(const Var& a);   // scalar {1}
Var mean(const Var& a);  // scalar {1}

// Row-wise softmax. The masked overload treats zero entries of `keep` as
// excluded: they get probability exactly 0 and contribute nothing to the
// normalization. A row with no kept entries throws DegenerateRowError.
Var row_softmax(const Var& a);
Var row_softmax(const Var& a, const Tensor& keep);
Var row_log_softmax(const Var& a);

// Rows with norm < 1e-12 pass through unscaled (and backprop as identity).
Var l2_normalize_rows(const Var& a);

// Per-row layer normalization with learned gain/bias; variance is the
// population variance and is stabilized with eps = 1e-5.
Var layer_norm_rows(const Var& x, const Var& gain, const Var& bias);

Var concat_cols(const std::vector<Var>& parts);
Var concat_rows(const std::vector<Var>& parts);
Var gather_rows(const Var& a, std::vector<std::size_t> indices);
Var slice_rows(const Var& a, std::size_t begin, std::size_t end);
Var reshape(const Var& a, std::vector<std::size_t> shape);

// Elementwise product with a constant 0/1 mask (no gradient into the mask).
Var apply_mask(const Var& a, const Tensor& mask);

}  // namespace vsgmn
