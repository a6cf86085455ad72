#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace pnerf {

struct ShapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ContractError : std::logic_error {
  using std::logic_error::logic_error;
};

// Raised when an op produces NaN/Inf, or an optimizer sees a non-finite gradient.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace pnerf

namespace pnerf::num {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

struct Node;

// Reads the op's output (value and gradient) and accumulates into its inputs.
using BackwardFn = std::function<void(const Node& out)>;

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until something flows into it
  bool requires_grad = false;
  const char* op = "leaf";
  BackwardFn backward;
};

// Cheap reference-counted handle on a node. Values are immutable once an op
// has consumed them; only parameters are mutated, and only by the optimizer.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double fill, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor scalar(double v, bool requires_grad = false);
  static Tensor row(std::span<const double> values);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t numel() const { return node_->value.size(); }
  // Rank-2 view; rank-1 tensors read as a single row, scalars as 1x1.
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<const double> values() const { return node_->value; }
  std::span<double> mutable_values() { return node_->value; }
  double item() const;
  double at(std::size_t i) const { return node_->value[i]; }
  double at(std::size_t r, std::size_t c) const { return node_->value[r * cols() + c]; }

  bool requires_grad() const { return node_ && node_->requires_grad; }
  Tensor& set_requires_grad(bool on);

  bool has_grad() const { return !node_->grad.empty(); }
  // Gradient slot; zeros when nothing has flowed in yet.
  std::vector<double> grad() const;
  std::span<const double> grad_view() const { return node_->grad; }
  // Allocates the gradient slot if needed and returns it for accumulation.
  std::span<double> grad_accumulator();
  void zero_grad();

  const char* op_name() const { return node_->op; }
  const Node* node() const { return node_.get(); }
  bool same_node(const Tensor& other) const { return node_ == other.node_; }

  // Detached copy of the values with no graph history.
  Tensor detach() const;

 private:
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}
  std::shared_ptr<Node> node_;

  friend Tensor make_op(const char*, Shape, std::vector<double>, bool, BackwardFn);
  friend class Tape;
};

// Records nodes in creation order. Ops only record while a tape is active on
// the calling thread; without one they run in inference mode.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  ~Tape() { clear(); }

  static Tape* active();

  class Scope {
   public:
    explicit Scope(Tape& tape);
    ~Scope();
    Scope(const Scope&) = delete;
    Scope& operator=(const Scope&) = delete;

   private:
    Tape* previous_;
  };

  // Suspends recording on this thread (inference inside a training step).
  class Pause {
   public:
    Pause();
    ~Pause();
    Pause(const Pause&) = delete;
    Pause& operator=(const Pause&) = delete;

   private:
    Tape* previous_;
  };

  void record(const std::shared_ptr<Node>& node) { nodes_.push_back(node); }
  std::size_t size() const { return nodes_.size(); }

  // Seeds d(output)/d(output) = 1, replays the tape in reverse, then frees it.
  void backward(const Tensor& output);
  // Drops recorded history without running it.
  void clear();

 private:
  std::vector<std::shared_ptr<Node>> nodes_;
};

// Builds an op result. When a tape is active and any input requires grad, the
// result records `backward` on the tape. Throws NumericError on non-finite
// values, naming the op.
Tensor make_op(const char* name, Shape shape, std::vector<double> value,
               std::initializer_list<const Tensor*> inputs, BackwardFn backward);
// Same, with the "does any input require grad" decision made by the caller.
Tensor make_op(const char* name, Shape shape, std::vector<double> value, bool inputs_require_grad,
               BackwardFn backward);

// Returns the gradient accumulator of `t` if it participates in autodiff,
// otherwise an empty span. For use inside BackwardFn bodies.
std::span<double> grad_sink(const Tensor& t);

void check_finite(std::span<const double> values, const char* what);

// Keeps freed tensor buffers in the process heap instead of returning them to
// the OS after every op (large glibc allocations are mmap-backed by default).
// A no-op on other C libraries.
void tune_allocator();

}  // namespace pnerf::num
