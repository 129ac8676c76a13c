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

#include "advopt/tape.h"

#include <cmath>
#include <string>
#include <utility>

namespace advopt {

namespace {

void Accumulate(DenseMatrix& slot, const DenseMatrix& g) {
  if (slot.size() == 0) {
    slot = g;
  } else {
    slot += g;
  }
}

// Derivative mask of soft-thresholding: 1 where |u| > tau, else 0.
DenseMatrix ProxMask(const DenseMatrix& u, double tau) {
  return (u.array().abs() > tau).cast<double>().matrix();
}

}  // namespace

std::string_view PrimitiveName(Primitive p) {
  switch (p) {
    case Primitive::kLeaf: return "leaf";
    case Primitive::kConstant: return "constant";
    case Primitive::kMatVec: return "matvec";
    case Primitive::kMatTVec: return "mat-transpose-vec";
    case Primitive::kAdd: return "vec-add";
    case Primitive::kSub: return "vec-sub";
    case Primitive::kScale: return "scalar-scale";
    case Primitive::kScaleBy: return "scale-by-node";
    case Primitive::kProxL1: return "prox_l1";
    case Primitive::kSquaredNorm: return "squared-l2-norm";
    case Primitive::kDot: return "dot";
    case Primitive::kClipInf: return "clip_inf";
  }
  return "unknown";
}

const DenseMatrix& GradResult::at(NodeId leaf) const {
  auto it = grads_.find(leaf.index);
  if (it == grads_.end()) {
    throw InvalidArgument("GradResult: node " + std::to_string(leaf.index) +
                          " is not a differentiable leaf");
  }
  return it->second;
}

NodeId Tape::Leaf(DenseMatrix value) {
  Node n(Primitive::kLeaf);
  n.requires_grad = true;
  n.own = std::move(value);
  nodes_.push_back(std::move(n));
  return NodeId{static_cast<int32_t>(nodes_.size() - 1)};
}

NodeId Tape::Constant(DenseMatrix value) {
  Node n(Primitive::kConstant);
  n.own = std::move(value);
  nodes_.push_back(std::move(n));
  return NodeId{static_cast<int32_t>(nodes_.size() - 1)};
}

NodeId Tape::BorrowedLeaf(const DenseMatrix& value) {
  Node n(Primitive::kLeaf);
  n.requires_grad = true;
  n.borrowed = &value;
  nodes_.push_back(std::move(n));
  return NodeId{static_cast<int32_t>(nodes_.size() - 1)};
}

NodeId Tape::BorrowedConstant(const DenseMatrix& value) {
  Node n(Primitive::kConstant);
  n.borrowed = &value;
  nodes_.push_back(std::move(n));
  return NodeId{static_cast<int32_t>(nodes_.size() - 1)};
}

NodeId Tape::Scalar(double value, bool differentiable) {
  DenseMatrix m(1, 1);
  m(0, 0) = value;
  return differentiable ? Leaf(std::move(m)) : Constant(std::move(m));
}

double Tape::scalar(NodeId id) const {
  const DenseMatrix& v = value(id);
  if (v.rows() != 1 || v.cols() != 1) {
    throw InvalidArgument("tape: node " + std::to_string(id.index) +
                          " is " + ShapeString(v) + ", not a scalar");
  }
  return v(0, 0);
}

const Tape::Node& Tape::node(NodeId id) const {
  if (id.index < 0 || static_cast<size_t>(id.index) >= nodes_.size()) {
    throw InvalidArgument("tape: unknown node id " +
                          std::to_string(id.index));
  }
  return nodes_[id.index];
}

NodeId Tape::Record1(Primitive op, NodeId a, double param) {
  const NodeId ins[] = {a};
  return Record(op, ins, param);
}

NodeId Tape::Record2(Primitive op, NodeId a, NodeId b) {
  const NodeId ins[] = {a, b};
  return Record(op, ins);
}

void Tape::CheckShapes(Primitive op, const Node& a, const Node* b) const {
  auto fail = [&]() {
    std::string msg = "tape: shape mismatch in " +
                      std::string(PrimitiveName(op)) + ": " +
                      ShapeString(a.value());
    if (b) msg += " and " + ShapeString(b->value());
    throw ShapeError(msg);
  };
  const DenseMatrix& x = a.value();
  switch (op) {
    case Primitive::kMatVec:
      if (x.cols() != b->value().rows()) fail();
      break;
    case Primitive::kMatTVec:
      if (x.rows() != b->value().rows()) fail();
      break;
    case Primitive::kAdd:
    case Primitive::kSub:
    case Primitive::kDot:
      if (x.rows() != b->value().rows() || x.cols() != b->value().cols()) fail();
      break;
    case Primitive::kScaleBy:
      if (x.rows() != 1 || x.cols() != 1) fail();
      break;
    case Primitive::kProxL1:
      if (b->value().rows() != 1 || b->value().cols() != 1) fail();
      break;
    default:
      break;
  }
}

NodeId Tape::Record(Primitive op, std::span<const NodeId> inputs,
                    double param) {
  size_t arity = 0;
  switch (op) {
    case Primitive::kLeaf:
    case Primitive::kConstant:
      throw InvalidArgument("tape: use Leaf()/Constant() for inputs");
    case Primitive::kScale:
    case Primitive::kSquaredNorm:
    case Primitive::kClipInf:
      arity = 1;
      break;
    default:
      arity = 2;
  }
  if (inputs.size() != arity) {
    throw InvalidArgument("tape: " + std::string(PrimitiveName(op)) +
                          " takes " + std::to_string(arity) + " inputs");
  }
  if (op == Primitive::kClipInf && !(param >= 0.0)) {
    throw InvalidArgument("tape: clip_inf eps must be >= 0");
  }
  Node n(op);
  n.param = param;
  n.in0 = inputs[0].index;
  const Node& a = node(inputs[0]);
  const Node* b = nullptr;
  if (arity == 2) {
    n.in1 = inputs[1].index;
    b = &node(inputs[1]);
  }
  CheckShapes(op, a, b);
  n.requires_grad = a.requires_grad || (b && b->requires_grad);
  n.own = Evaluate(n);
  nodes_.push_back(std::move(n));
  return NodeId{static_cast<int32_t>(nodes_.size() - 1)};
}

DenseMatrix Tape::Evaluate(const Node& n) const {
  const DenseMatrix& a = nodes_[n.in0].value();
  auto b = [&]() -> const DenseMatrix& { return nodes_[n.in1].value(); };
  switch (n.op) {
    case Primitive::kMatVec: return Apply(a, b());
    case Primitive::kMatTVec: return ApplyTransposed(a, b());
    case Primitive::kAdd: return a + b();
    case Primitive::kSub: return a - b();
    case Primitive::kScale: return n.param * a;
    case Primitive::kScaleBy: return a(0, 0) * b();
    case Primitive::kProxL1: return advopt::ProxL1(a, b()(0, 0));
    case Primitive::kSquaredNorm: {
      DenseMatrix out(1, 1);
      out(0, 0) = a.squaredNorm();
      return out;
    }
    case Primitive::kDot: {
      DenseMatrix out(1, 1);
      out(0, 0) = a.cwiseProduct(b()).sum();
      return out;
    }
    case Primitive::kClipInf: return advopt::ClipInf(a, n.param);
    case Primitive::kLeaf:
    case Primitive::kConstant:
      break;
  }
  return n.value();
}

void Tape::SetValue(NodeId input, DenseMatrix value) {
  node(input);
  Node& n = nodes_[input.index];
  if (n.op != Primitive::kLeaf && n.op != Primitive::kConstant) {
    throw InvalidArgument("tape: SetValue on a computed node");
  }
  if (value.rows() != n.value().rows() || value.cols() != n.value().cols()) {
    throw ShapeError("tape: SetValue shape " + ShapeString(value) +
                     " does not match " + ShapeString(n.value()));
  }
  n.own = std::move(value);
  n.borrowed = nullptr;
  Replay();
}

void Tape::Replay() {
  for (Node& n : nodes_) {
    if (n.op == Primitive::kLeaf || n.op == Primitive::kConstant) continue;
    n.own = Evaluate(n);
  }
}

GradResult Tape::Backward(NodeId output) const {
  const Node& out = node(output);
  if (out.value().rows() != 1 || out.value().cols() != 1) {
    throw InvalidArgument("backward: output node is " +
                          ShapeString(out.value()) + ", expected a scalar");
  }
  std::vector<DenseMatrix> adj(output.index + 1);
  adj[output.index] = DenseMatrix::Ones(1, 1);

  for (int32_t i = output.index; i >= 0; --i) {
    const Node& n = nodes_[i];
    if (!n.requires_grad || adj[i].size() == 0) continue;
    if (n.op == Primitive::kLeaf || n.op == Primitive::kConstant) continue;
    const DenseMatrix& g = adj[i];
    const Node& a = nodes_[n.in0];
    const Node* b = n.in1 >= 0 ? &nodes_[n.in1] : nullptr;
    const bool ga = a.requires_grad;
    const bool gb = b && b->requires_grad;
    switch (n.op) {
      case Primitive::kMatVec:
        if (ga) Accumulate(adj[n.in0], g * b->value().transpose());
        if (gb) Accumulate(adj[n.in1], ApplyTransposed(a.value(), g));
        break;
      case Primitive::kMatTVec:
        if (ga) Accumulate(adj[n.in0], b->value() * g.transpose());
        if (gb) Accumulate(adj[n.in1], Apply(a.value(), g));
        break;
      case Primitive::kAdd:
        if (ga) Accumulate(adj[n.in0], g);
        if (gb) Accumulate(adj[n.in1], g);
        break;
      case Primitive::kSub:
        if (ga) Accumulate(adj[n.in0], g);
        if (gb) Accumulate(adj[n.in1], -g);
        break;
      case Primitive::kScale:
        if (ga) Accumulate(adj[n.in0], n.param * g);
        break;
      case Primitive::kScaleBy: {
        if (ga) {
          DenseMatrix s(1, 1);
          s(0, 0) = g.cwiseProduct(b->value()).sum();
          Accumulate(adj[n.in0], s);
        }
        if (gb) Accumulate(adj[n.in1], a.value()(0, 0) * g);
        break;
      }
      case Primitive::kProxL1: {
        const double tau = b->value()(0, 0);
        const DenseMatrix masked = g.cwiseProduct(ProxMask(a.value(), tau));
        if (ga) Accumulate(adj[n.in0], masked);
        if (gb) {
          // d/dtau soft(u, tau) = -sign(u) on the active set.
          DenseMatrix s(1, 1);
          s(0, 0) = -masked.cwiseProduct(SignVec(a.value())).sum();
          Accumulate(adj[n.in1], s);
        }
        break;
      }
      case Primitive::kSquaredNorm:
        if (ga) Accumulate(adj[n.in0], (2.0 * g(0, 0)) * a.value());
        break;
      case Primitive::kDot:
        if (ga) Accumulate(adj[n.in0], g(0, 0) * b->value());
        if (gb) Accumulate(adj[n.in1], g(0, 0) * a.value());
        break;
      case Primitive::kClipInf: {
        const DenseMatrix inside =
            (a.value().array().abs() < n.param).cast<double>().matrix();
        if (ga) Accumulate(adj[n.in0], g.cwiseProduct(inside));
        break;
      }
      case Primitive::kLeaf:
      case Primitive::kConstant:
        break;
    }
  }

  GradResult result;
  for (size_t i = 0; i < nodes_.size(); ++i) {
    const Node& n = nodes_[i];
    if (n.op != Primitive::kLeaf) continue;
    if (i < adj.size() && adj[i].size() != 0) {
      result.grads_.emplace(static_cast<int32_t>(i), std::move(adj[i]));
    } else {
      result.grads_.emplace(
          static_cast<int32_t>(i),
          DenseMatrix::Zero(n.value().rows(), n.value().cols()));
    }
  }
  return result;
}

double GradCheck(Tape& tape, NodeId output, NodeId leaf, double h) {
  if (!(h > 0.0)) throw InvalidArgument("grad_check: h must be > 0");
  const DenseMatrix grad = tape.Backward(output).at(leaf);
  const DenseMatrix base = tape.value(leaf);
  DenseMatrix probe = base;
  double worst = 0.0;
  for (Eigen::Index j = 0; j < base.cols(); ++j) {
    for (Eigen::Index i = 0; i < base.rows(); ++i) {
      probe(i, j) = base(i, j) + h;
      tape.SetValue(leaf, probe);
      const double up = tape.scalar(output);
      probe(i, j) = base(i, j) - h;
      tape.SetValue(leaf, probe);
      const double down = tape.scalar(output);
      probe(i, j) = base(i, j);
      const double fd = (up - down) / (2.0 * h);
      const double g = grad(i, j);
      const double scale = std::max(std::abs(g), std::abs(fd));
      const double err =
          scale < 1e-8 ? std::abs(g - fd) : std::abs(g - fd) / scale;
      worst = std::max(worst, err);
    }
  }
  tape.SetValue(leaf, base);
  return worst;
}

}  // namespace advopt
