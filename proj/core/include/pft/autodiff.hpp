#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <initializer_list>
#include <span>
#include <unordered_map>
#include <vector>

#include "pft/tensor.hpp"

namespace pft::ad {

class Tape;

// Handle to a node on a Tape. Cheap to copy; valid while its tape lives.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  Tape& tape() const { return *tape_; }
  std::size_t id() const noexcept { return id_; }
  bool valid() const noexcept { return tape_ != nullptr; }

 private:
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
  friend class Tape;
};

// Reverse-mode differentiation tape. Nodes are appended in evaluation order,
// so creation order is a topological order and backward() is a plain reverse
// replay. A tape is confined to one thread.
class Tape {
 public:
  // Receives the op's own output value and its accumulated gradient.
  using Backward = std::function<void(Tape&, const Tensor& out, std::span<const double> out_grad)>;

  enum class Mode { record, inference };

  explicit Tape(Mode mode = Mode::record) : mode_(mode) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const noexcept { return mode_ == Mode::record; }

  Var constant(Tensor value);
  // Differentiable leaf owned by the tape; read its gradient with grad().
  Var input(Tensor value);
  // Leaf aliasing an external parameter. The parameter must outlive the tape.
  // Binding the same tensor twice returns the same node. backward()
  // accumulates into parameter.grad().
  Var param(Tensor& parameter);

  // Appends an op result. `backward` is dropped unless some input needs a
  // gradient and the tape is recording.
  Var push(Tensor value, std::span<const Var> inputs, Backward backward);
  Var push(Tensor value, std::initializer_list<Var> inputs, Backward backward) {
    return push(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()), std::move(backward));
  }

  const Tensor& value(Var v) const;
  bool needs_grad(Var v) const { return nodes_[v.id()].needs_grad; }
  // Gradient buffer of a node, zero-allocated on first access.
  std::span<double> grad(Var v);
  // Copy of the gradient (zeros when nothing flowed into the node).
  Tensor grad_tensor(Var v) const;

  // Seeds d(root)/d(root) = 1 for a single-element root and replays.
  void backward(Var root);

  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor* external = nullptr;
    std::vector<double> grad;
    Backward backward;
    bool needs_grad = false;
  };

  void check_owned(Var v) const;

  Mode mode_;
  std::deque<Node> nodes_;
  std::unordered_map<const Tensor*, std::size_t> params_;
};

enum class ElementwiseKind { add, sub, mul, scale };

// Tensor-tensor form requires equal shapes; `scale` is the mul kind.
Var elementwise(ElementwiseKind kind, Var a, Var b);
Var elementwise(ElementwiseKind kind, Var a, double b);

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double factor);

// x[r×c] + row[1×c] broadcast over rows.
Var add_row(Var x, Var row);

Var matmul(Var a, Var b);
Var transpose(Var a);

Var softmax(Var x, std::size_t axis);
// Normalizes each row of x[r×c]; gain and bias are [1×c].
Var layer_norm(Var x, Var gain, Var bias, double eps = 1e-5);
// Normalizes each column of x[r×c] with the batch statistics of that column,
// then scales by gain [1×c]. No shift. Needs r >= 2.
Var batch_norm(Var x, Var gain, double eps = 1e-5);
// Exact (erf) form.
Var gelu(Var x);

Var slice(Var x, std::size_t axis, std::size_t begin, std::size_t end);
Var concat(std::span<const Var> parts, std::size_t axis);
inline Var concat(std::initializer_list<Var> parts, std::size_t axis) {
  return concat(std::span<const Var>(parts.begin(), parts.size()), axis);
}
Var reshape(Var x, Shape shape);
// Rows of a matrix in the given order (repeats allowed).
Var gather_rows(Var x, std::span<const std::size_t> rows);

Var sum(Var x);
Var mean(Var x);

}  // namespace pft::ad
