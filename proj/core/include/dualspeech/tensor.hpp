#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace dualspeech {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string shape_string(const Shape& shape);

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> value;
  // Leaves that require grad hold a zero-filled buffer from construction;
  // interior nodes allocate theirs on first accumulation during backward.
  std::vector<double> grad;
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> inputs;
  // Reads self.grad and accumulates into the grads of self.inputs.
  std::function<void(Node& self)> backward_fn;

  std::vector<double>& ensure_grad();
};

}  // namespace detail

/// Handle to a dense row-major array of doubles that may take part in a
/// reverse-mode gradient graph. Copies share the underlying node.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(const Shape& shape, bool requires_grad = false);
  static Tensor full(const Shape& shape, double value, bool requires_grad = false);
  static Tensor from(const Shape& shape, std::vector<double> data, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t dim(std::size_t axis) const;
  std::size_t rank() const { return shape().size(); }
  std::size_t size() const;

  std::span<const double> data() const;
  // Writing through this bypasses the graph; use for parameters and inputs only.
  std::span<double> mutable_data();
  double item() const;

  bool requires_grad() const;
  bool has_grad() const;
  std::span<const double> grad() const;
  std::span<double> mutable_grad();
  void zero_grad();

  // A copy of the value with no graph history.
  Tensor detach() const;
  // New shape with equal element count; gradient flows back unchanged.
  Tensor reshape(const Shape& shape) const;

  const void* storage_id() const { return node_.get(); }
  detail::Node* node() const { return node_.get(); }
  const std::shared_ptr<detail::Node>& node_ptr() const { return node_; }

  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<detail::Node> node_;
};

/// Disables graph recording on this thread while alive.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_mode_enabled();

/// Nodes reachable from a root, in topological order (inputs before users).
class GradGraph {
 public:
  static GradGraph build(const Tensor& root);

  const std::vector<detail::Node*>& nodes() const { return order_; }
  std::size_t size() const { return order_.size(); }

 private:
  std::vector<detail::Node*> order_;
};

/// Reverse-mode accumulation of d(loss)/d(t) into every reachable tensor that
/// requires grad. Leaf gradients accumulate across calls until zero_grad().
void backward(const Tensor& loss);

/// Build an interior node. Used by kernel implementations.
Tensor make_result(const char* op, Shape shape, std::vector<double> value,
                   std::vector<Tensor> inputs,
                   std::function<void(detail::Node&)> backward_fn);

}  // namespace dualspeech
