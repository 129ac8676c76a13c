// Copyright 2026 The advopt Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef ADVOPT_TAPE_H_
#define ADVOPT_TAPE_H_

// Reverse-mode differentiation over a recorded forward computation.
//
// A Tape is an append-only list of nodes. Every value is a dense matrix;
// vectors are single columns and a batch of samples is several columns, so
// the same recording differentiates a single (x, s) pair or a mini-batch.
// Scalars (losses, thresholds, step sizes) are 1x1.

#include <cstdint>
#include <map>
#include <span>
#include <string_view>
#include <vector>

#include "advopt/numerics.h"

namespace advopt {

struct NodeId {
  int32_t index = -1;
  friend bool operator==(NodeId, NodeId) = default;
  friend auto operator<=>(NodeId, NodeId) = default;
};

enum class Primitive : uint8_t {
  kLeaf,         // differentiable input
  kConstant,     // non-differentiable input
  kMatVec,       // A v
  kMatTVec,      // A^T v
  kAdd,          // a + b
  kSub,          // a - b
  kScale,        // c * v, c a recorded double
  kScaleBy,      // s * v, s a 1x1 node
  kProxL1,       // soft-threshold(u, tau), tau a 1x1 node
  kSquaredNorm,  // sum of squared entries -> 1x1
  kDot,          // sum of element-wise products -> 1x1
  kClipInf,      // clip(v, eps), eps a recorded double
};

std::string_view PrimitiveName(Primitive p);

class GradResult {
 public:
  // Gradient for a leaf, shaped like the leaf. Throws for non-leaf ids.
  const DenseMatrix& at(NodeId leaf) const;
  bool contains(NodeId leaf) const { return grads_.count(leaf.index) != 0; }

 private:
  friend class Tape;
  std::map<int32_t, DenseMatrix> grads_;
};

class Tape {
 public:
  NodeId Leaf(DenseMatrix value);
  NodeId Constant(DenseMatrix value);
  NodeId Scalar(double value, bool differentiable);
  // Record `value` by reference instead of copying it. The matrix must stay
  // alive and unchanged for the lifetime of the tape.
  NodeId BorrowedLeaf(const DenseMatrix& value);
  NodeId BorrowedConstant(const DenseMatrix& value);

  // Generic entry point. `param` is the recorded double for kScale and
  // kClipInf and is ignored otherwise. Throws ShapeError naming the
  // primitive and operand shapes.
  NodeId Record(Primitive op, std::span<const NodeId> inputs,
                double param = 0.0);

  NodeId MatVec(NodeId a, NodeId v) { return Record2(Primitive::kMatVec, a, v); }
  NodeId MatTVec(NodeId a, NodeId v) {
    return Record2(Primitive::kMatTVec, a, v);
  }
  NodeId Add(NodeId a, NodeId b) { return Record2(Primitive::kAdd, a, b); }
  NodeId Sub(NodeId a, NodeId b) { return Record2(Primitive::kSub, a, b); }
  NodeId Scale(NodeId v, double c) { return Record1(Primitive::kScale, v, c); }
  NodeId ScaleBy(NodeId s, NodeId v) {
    return Record2(Primitive::kScaleBy, s, v);
  }
  NodeId ProxL1(NodeId u, NodeId tau) {
    return Record2(Primitive::kProxL1, u, tau);
  }
  NodeId SquaredNorm(NodeId v) {
    return Record1(Primitive::kSquaredNorm, v, 0.0);
  }
  NodeId Dot(NodeId a, NodeId b) { return Record2(Primitive::kDot, a, b); }
  NodeId ClipInf(NodeId v, double eps) {
    return Record1(Primitive::kClipInf, v, eps);
  }

  const DenseMatrix& value(NodeId id) const { return node(id).value(); }
  double scalar(NodeId id) const;
  Primitive primitive(NodeId id) const { return node(id).op; }
  bool requires_grad(NodeId id) const { return node(id).requires_grad; }
  size_t size() const { return nodes_.size(); }

  // Overwrites a leaf or constant (same shape) and recomputes every
  // dependent node. Used by finite-difference checks.
  void SetValue(NodeId input, DenseMatrix value);
  void Replay();

  // Reverse sweep from a 1x1 output. Returns gradients for every leaf;
  // leaves the output does not depend on get exact zeros.
  // Soft-threshold kinks (|u| == tau) and clip boundaries get derivative 0.
  GradResult Backward(NodeId output) const;

 private:
  struct Node {
    explicit Node(Primitive p) : op(p) {}
    Primitive op;
    int32_t in0 = -1;
    int32_t in1 = -1;
    double param = 0.0;
    bool requires_grad = false;
    DenseMatrix own;
    const DenseMatrix* borrowed = nullptr;
    const DenseMatrix& value() const { return borrowed ? *borrowed : own; }
  };

  NodeId Record1(Primitive op, NodeId a, double param);
  NodeId Record2(Primitive op, NodeId a, NodeId b);
  const Node& node(NodeId id) const;
  DenseMatrix Evaluate(const Node& n) const;
  void CheckShapes(Primitive op, const Node& a, const Node* b) const;

  std::vector<Node> nodes_;
};

// Central-difference check of Backward() for every coordinate of `leaf`.
// Returns the max relative error |g - fd| / max(|g|, |fd|), falling back to
// the absolute error when both magnitudes are below 1e-8. The tape is
// restored before returning.
double GradCheck(Tape& tape, NodeId output, NodeId leaf, double h);

}  // namespace advopt

#endif  // ADVOPT_TAPE_H_
