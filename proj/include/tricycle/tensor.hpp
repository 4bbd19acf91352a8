#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "tricycle/errors.hpp"

namespace tricycle {

using Index = Eigen::Index;

template <typename Scalar>
using ArrayX = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Extents of a tensor, at most four (batch x channels x height x width).
class Shape {
 public:
  Shape() = default;
  Shape(std::initializer_list<Index> dims) : Shape(std::vector<Index>(dims)) {}
  explicit Shape(std::vector<Index> dims) : dims_(std::move(dims)) {
    if (dims_.empty() || dims_.size() > 4) throw ShapeError("tensor rank must be 1..4");
    for (Index d : dims_)
      if (d < 0) throw ShapeError("negative tensor extent");
  }

  int rank() const { return static_cast<int>(dims_.size()); }
  Index operator[](int axis) const { return dims_.at(static_cast<std::size_t>(axis)); }
  const std::vector<Index>& dims() const { return dims_; }

  Index numel() const {
    Index n = dims_.empty() ? 0 : 1;
    for (Index d : dims_) n *= d;
    return n;
  }

  // NCHW accessors; only meaningful for rank-4 shapes.
  Index batch() const { return dims_.at(0); }
  Index channels() const { return dims_.at(1); }
  Index height() const { return dims_.at(2); }
  Index width() const { return dims_.at(3); }
  Index spatial() const { return height() * width(); }

  bool operator==(const Shape&) const = default;

  std::string str() const {
    std::ostringstream out;
    for (std::size_t i = 0; i < dims_.size(); ++i) out << (i ? "x" : "") << dims_[i];
    return out.str();
  }

 private:
  std::vector<Index> dims_;
};

inline Shape nchw(Index n, Index c, Index h, Index w) { return Shape{n, c, h, w}; }

/// Handle to a node of the differentiation graph.
///
/// Copies share the underlying storage. A gradient buffer of size zero means
/// "no gradient reached this tensor".
template <typename Scalar>
class Tensor {
 public:
  using Array = ArrayX<Scalar>;

  Tensor() = default;

  static Tensor make(Shape shape, Array values, bool requires_grad) {
    if (values.size() != shape.numel())
      throw ShapeError("tensor data length " + std::to_string(values.size()) +
                       " does not match shape " + shape.str());
    Tensor t;
    t.node_ = std::make_shared<Node>();
    t.node_->shape = std::move(shape);
    t.node_->value = std::move(values);
    t.node_->requires_grad = requires_grad;
    return t;
  }
  static Tensor constant(Shape shape, Array values) {
    return make(std::move(shape), std::move(values), false);
  }
  static Tensor parameter(Shape shape, Array values) {
    return make(std::move(shape), std::move(values), true);
  }
  static Tensor zeros(Shape shape, bool requires_grad = false) {
    const Index n = shape.numel();
    return make(std::move(shape), Array::Zero(n), requires_grad);
  }
  static Tensor scalar(Scalar v) { return constant(Shape{1}, Array::Constant(1, v)); }

  bool defined() const { return static_cast<bool>(node_); }
  const Shape& shape() const { return node_->shape; }
  Index numel() const { return node_->value.size(); }

  const Array& value() const { return node_->value; }
  /// Direct write access, for optimizers and finite-difference probes.
  Array& mutable_value() const { return node_->value; }
  Scalar item() const {
    if (numel() != 1) throw ShapeError("item() on tensor of shape " + shape().str());
    return node_->value[0];
  }

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool on) const { node_->requires_grad = on; }

  bool has_grad() const { return node_->grad.size() != 0; }
  const Array& grad() const { return node_->grad; }
  /// Gradient accumulator, allocated as zeros on first use.
  Array& grad_buffer() const {
    if (node_->grad.size() == 0) node_->grad = Array::Zero(node_->value.size());
    return node_->grad;
  }
  void zero_grad() const { node_->grad.resize(0); }

  /// Copy of the value outside any graph.
  Tensor detach() const { return constant(shape(), value()); }

  bool same_node(const Tensor& other) const { return node_ == other.node_; }

 private:
  struct Node {
    Shape shape;
    Array value;
    Array grad;
    bool requires_grad = false;
  };
  std::shared_ptr<Node> node_;
};

enum class OpKind {
  Conv2d,
  LeakyRelu,
  InstanceNorm,
  UpsampleNearest,
  ConcatChannels,
  L1Masked,
  MeanSquaredTo,
  WeightedSum,
  Scale,
  Sum,
  Custom,
};

inline std::string_view op_name(OpKind kind) {
  switch (kind) {
    case OpKind::Conv2d: return "conv2d";
    case OpKind::LeakyRelu: return "leaky_relu";
    case OpKind::InstanceNorm: return "instance_norm";
    case OpKind::UpsampleNearest: return "upsample_nn";
    case OpKind::ConcatChannels: return "concat_channels";
    case OpKind::L1Masked: return "l1_masked";
    case OpKind::MeanSquaredTo: return "mean_squared_to";
    case OpKind::WeightedSum: return "weighted_sum";
    case OpKind::Scale: return "scale";
    case OpKind::Sum: return "sum";
    case OpKind::Custom: return "custom";
  }
  return "unknown";
}

/// Tape of recorded operations for reverse-mode differentiation.
///
/// Records are appended in execution order, so every input precedes its
/// consumer. backward() walks the tape once in reverse. A graph constructed
/// with recording disabled evaluates ops without keeping any backward state.
template <typename Scalar>
class Graph {
 public:
  using Array = ArrayX<Scalar>;
  using BackwardFn = std::function<void(const Array& grad_out)>;

  explicit Graph(bool recording = true) : recording_(recording) {}

  bool recording() const { return recording_; }
  std::size_t size() const { return records_.size(); }
  OpKind kind(std::size_t i) const { return records_.at(i).kind; }

  /// Registers `output` as produced from `inputs`. Every op goes through here.
  Tensor<Scalar> record(OpKind kind, Tensor<Scalar> output, std::vector<Tensor<Scalar>> inputs,
                        BackwardFn backward) {
    if (!output.value().allFinite()) {
      throw NumericalError("non-finite output from " + std::string(op_name(kind)) +
                           " (record " + std::to_string(records_.size()) + ")");
    }
    bool needs_grad = false;
    for (const auto& in : inputs) needs_grad = needs_grad || in.requires_grad();
    if (!recording_ || !needs_grad) return output;
    output.set_requires_grad(true);
    records_.push_back(Record{kind, std::move(inputs), output, std::move(backward)});
    return output;
  }

  /// Accumulates d(loss)/d(t) into every reachable tensor that requires grad.
  void backward(const Tensor<Scalar>& loss) {
    if (loss.numel() != 1) throw ShapeError("backward: loss must be a scalar, got " + loss.shape().str());
    if (!loss.requires_grad()) return;
    loss.grad_buffer().setConstant(Scalar(1));
    for (std::size_t i = records_.size(); i-- > 0;) {
      Record& rec = records_[i];
      if (!rec.output.has_grad()) continue;
      rec.backward(rec.output.grad());
      for (const auto& in : rec.inputs) {
        if (in.requires_grad() && in.has_grad() && !in.grad().allFinite()) {
          throw NumericalError("non-finite gradient in backward of " +
                               std::string(op_name(rec.kind)) + " (record " + std::to_string(i) + ")");
        }
      }
    }
  }

 private:
  struct Record {
    OpKind kind;
    std::vector<Tensor<Scalar>> inputs;
    Tensor<Scalar> output;
    BackwardFn backward;
  };

  bool recording_;
  std::vector<Record> records_;
};

}  // namespace tricycle
