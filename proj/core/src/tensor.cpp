#include "dualspeech/tensor.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "dualspeech/error.hpp"

namespace dualspeech {

namespace {
thread_local bool g_grad_enabled = true;
}

std::size_t numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

std::vector<double>& detail::Node::ensure_grad() {
  if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
  return grad;
}

namespace {

std::shared_ptr<detail::Node> make_leaf(const Shape& shape, std::vector<double> data,
                                        bool requires_grad) {
  for (std::size_t d : shape) DUALSPEECH_EXPECT(d > 0, "tensor dimensions must be positive");
  DUALSPEECH_EXPECT(numel(shape) == data.size(),
                    "data size does not match shape " + shape_string(shape));
  auto node = std::make_shared<detail::Node>();
  node->shape = shape;
  node->value = std::move(data);
  node->requires_grad = requires_grad;
  if (requires_grad) node->grad.assign(node->value.size(), 0.0);
  return node;
}

}  // namespace

Tensor Tensor::zeros(const Shape& shape, bool requires_grad) {
  return Tensor(make_leaf(shape, std::vector<double>(numel(shape), 0.0), requires_grad));
}

Tensor Tensor::full(const Shape& shape, double value, bool requires_grad) {
  return Tensor(make_leaf(shape, std::vector<double>(numel(shape), value), requires_grad));
}

Tensor Tensor::from(const Shape& shape, std::vector<double> data, bool requires_grad) {
  return Tensor(make_leaf(shape, std::move(data), requires_grad));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return Tensor(make_leaf({1}, {value}, requires_grad));
}

const Shape& Tensor::shape() const {
  DUALSPEECH_EXPECT(node_, "undefined tensor");
  return node_->shape;
}

std::size_t Tensor::dim(std::size_t axis) const {
  DUALSPEECH_EXPECT(axis < shape().size(), "axis out of range");
  return node_->shape[axis];
}

std::size_t Tensor::size() const { return defined() ? node_->value.size() : 0; }

std::span<const double> Tensor::data() const {
  DUALSPEECH_EXPECT(node_, "undefined tensor");
  return node_->value;
}

std::span<double> Tensor::mutable_data() {
  DUALSPEECH_EXPECT(node_, "undefined tensor");
  return node_->value;
}

double Tensor::item() const {
  DUALSPEECH_EXPECT(size() == 1, "item() requires a single-element tensor");
  return node_->value[0];
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

bool Tensor::has_grad() const { return node_ && node_->grad.size() == node_->value.size(); }

std::span<const double> Tensor::grad() const {
  DUALSPEECH_EXPECT(node_, "undefined tensor");
  return node_->ensure_grad();
}

std::span<double> Tensor::mutable_grad() {
  DUALSPEECH_EXPECT(node_, "undefined tensor");
  return node_->ensure_grad();
}

void Tensor::zero_grad() {
  if (node_) std::fill(node_->ensure_grad().begin(), node_->grad.end(), 0.0);
}

Tensor Tensor::detach() const { return Tensor::from(shape(), node_->value, false); }

Tensor Tensor::reshape(const Shape& new_shape) const {
  DUALSPEECH_EXPECT(numel(new_shape) == size(), "reshape must preserve element count");
  return make_result("reshape", new_shape, node_->value, {*this}, [](detail::Node& self) {
    auto& g = self.inputs[0]->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
  });
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

bool grad_mode_enabled() { return g_grad_enabled; }

Tensor make_result(const char* op, Shape shape, std::vector<double> value,
                   std::vector<Tensor> inputs, std::function<void(detail::Node&)> backward_fn) {
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  node->op = op;
  const bool track =
      g_grad_enabled && std::any_of(inputs.begin(), inputs.end(),
                                    [](const Tensor& t) { return t.requires_grad(); });
  if (track) {
    node->requires_grad = true;
    node->inputs.reserve(inputs.size());
    for (auto& t : inputs) node->inputs.push_back(t.node_ptr());
    node->backward_fn = std::move(backward_fn);
  }
  return Tensor(std::move(node));
}

GradGraph GradGraph::build(const Tensor& root) {
  DUALSPEECH_EXPECT(root.defined(), "cannot build a graph from an undefined tensor");
  GradGraph graph;
  enum class Mark : unsigned char { Visiting, Done };
  std::unordered_map<detail::Node*, Mark> marks;
  // Iterative post-order DFS; input order fixes the traversal order.
  std::vector<std::pair<detail::Node*, std::size_t>> stack;
  stack.emplace_back(root.node(), 0);
  marks[root.node()] = Mark::Visiting;
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      detail::Node* child = node->inputs[next++].get();
      if (!child->requires_grad) continue;
      auto it = marks.find(child);
      if (it == marks.end()) {
        marks[child] = Mark::Visiting;
        stack.emplace_back(child, 0);
      } else if (it->second == Mark::Visiting) {
        throw InternalError("cycle detected in gradient graph");
      }
    } else {
      marks[node] = Mark::Done;
      graph.order_.push_back(node);
      stack.pop_back();
    }
  }
  return graph;
}

void backward(const Tensor& loss) {
  DUALSPEECH_EXPECT(loss.defined() && loss.size() == 1, "backward requires a scalar loss");
  if (!loss.requires_grad()) return;
  const GradGraph graph = GradGraph::build(loss);
  auto& seed = loss.node()->ensure_grad();
  seed[0] += 1.0;
  const auto& order = graph.nodes();
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node* node = *it;
    if (node->backward_fn && node->grad.size() == node->value.size()) node->backward_fn(*node);
  }
}

}  // namespace dualspeech
