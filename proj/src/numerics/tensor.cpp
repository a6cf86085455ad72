#include "pnerf/numerics/tensor.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <sstream>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace pnerf::num {

namespace {
thread_local Tape* g_active_tape = nullptr;
}

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto e : shape) n *= e;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

void check_finite(std::span<const double> values, const char* what) {
  // Branch-free exponent test first so the common all-finite case vectorises.
  constexpr std::uint64_t kExponent = 0x7ff0000000000000ULL;
  std::uint64_t bad = 0;
  for (const double v : values) bad |= static_cast<std::uint64_t>((std::bit_cast<std::uint64_t>(v) & kExponent) == kExponent);
  if (bad == 0) return;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      std::ostringstream os;
      os << "non-finite value " << values[i] << " at element " << i << " of '" << what << "'";
      throw NumericError(os.str());
    }
  }
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double fill, bool requires_grad) {
  auto node = std::make_shared<Node>();
  node->value.assign(shape_numel(shape), fill);
  node->shape = std::move(shape);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
  if (shape_numel(shape) != values.size()) {
    throw ShapeError("Tensor::from: shape " + shape_str(shape) + " does not hold " +
                     std::to_string(values.size()) + " values");
  }
  check_finite(values, "Tensor::from");
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::scalar(double v, bool requires_grad) { return from({}, {v}, requires_grad); }

Tensor Tensor::row(std::span<const double> values) {
  return from({1, values.size()}, std::vector<double>(values.begin(), values.end()));
}

std::size_t Tensor::rows() const {
  const auto& s = node_->shape;
  if (s.size() <= 1) return 1;
  std::size_t r = 1;
  for (std::size_t i = 0; i + 1 < s.size(); ++i) r *= s[i];
  return r;
}

std::size_t Tensor::cols() const {
  const auto& s = node_->shape;
  return s.empty() ? 1 : s.back();
}

double Tensor::item() const {
  if (numel() != 1) throw ContractError("item() on tensor of shape " + shape_str(shape()));
  return node_->value[0];
}

Tensor& Tensor::set_requires_grad(bool on) {
  node_->requires_grad = on;
  return *this;
}

std::vector<double> Tensor::grad() const {
  if (node_->grad.empty()) return std::vector<double>(numel(), 0.0);
  return node_->grad;
}

std::span<double> Tensor::grad_accumulator() {
  if (node_->grad.empty()) node_->grad.assign(node_->value.size(), 0.0);
  return node_->grad;
}

void Tensor::zero_grad() { node_->grad.clear(); }

Tensor Tensor::detach() const { return from(shape(), node_->value); }

Tape* Tape::active() { return g_active_tape; }

Tape::Scope::Scope(Tape& tape) : previous_(g_active_tape) { g_active_tape = &tape; }

Tape::Scope::~Scope() { g_active_tape = previous_; }

Tape::Pause::Pause() : previous_(g_active_tape) { g_active_tape = nullptr; }

Tape::Pause::~Pause() { g_active_tape = previous_; }

void Tape::backward(const Tensor& output) {
  if (!output.defined() || output.numel() != 1) {
    throw ContractError("backward() requires a scalar output, got shape " +
                        (output.defined() ? shape_str(output.shape()) : std::string("<undefined>")));
  }
  if (!output.requires_grad()) {
    clear();
    return;
  }
  auto* out = output.node_.get();
  out->grad.assign(1, 1.0);
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    Node& n = **it;
    if (n.backward && !n.grad.empty()) n.backward(n);
  }
  clear();
}

void Tape::clear() {
  // Interior gradients are only needed during the sweep.
  for (auto& n : nodes_) {
    n->backward = nullptr;
    n->grad = {};
  }
  nodes_.clear();
}

Tensor make_op(const char* name, Shape shape, std::vector<double> value,
               std::initializer_list<const Tensor*> inputs, BackwardFn backward) {
  bool any = false;
  for (const Tensor* in : inputs) any = any || (in != nullptr && in->requires_grad());
  return make_op(name, std::move(shape), std::move(value), any, std::move(backward));
}

Tensor make_op(const char* name, Shape shape, std::vector<double> value, bool inputs_require_grad,
               BackwardFn backward) {
  if (shape_numel(shape) != value.size()) {
    throw ShapeError(std::string(name) + ": produced " + std::to_string(value.size()) +
                     " values for shape " + shape_str(shape));
  }
  check_finite(value, name);
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  node->op = name;
  Tape* tape = Tape::active();
  if (tape != nullptr && backward && inputs_require_grad) {
    node->requires_grad = true;
    node->backward = std::move(backward);
    tape->record(node);
  }
  return Tensor(std::move(node));
}

std::span<double> grad_sink(const Tensor& t) {
  if (!t.defined() || !t.requires_grad()) return {};
  auto* n = const_cast<Node*>(t.node());
  if (n->grad.empty()) n->grad.assign(n->value.size(), 0.0);
  return n->grad;
}

void tune_allocator() {
#if defined(__GLIBC__)
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
  mallopt(M_TOP_PAD, 256 << 20);
#endif
}

}  // namespace pnerf::num
