// SPDX-License-Identifier: Apache-2.0
//
// Copyright (C) 2026 The pilotmae authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#pragma once

#include "pilotmae/tensorcore/tensor.hpp"

#include <deque>
#include <functional>
#include <initializer_list>
#include <memory>
#include <vector>

namespace pilotmae::tc {

template <typename T>
class Graph;

/// Handle to a value recorded in a Graph.
template <typename T>
struct Var
{
    Graph<T> *graph = nullptr;
    int id = -1;

    bool valid() const { return graph != nullptr && id >= 0; }
    const Tensor<T> &value() const { return graph->value(*this); }
    const Shape &shape() const { return value().shape(); }
    int rows() const { return value().rows(); }
    int cols() const { return value().cols(); }
};

/// Tape of op records for reverse-mode differentiation.
///
/// Values live in nodes; an op whose inputs all lack requires_grad is evaluated
/// but not recorded. Parameters are referenced, not copied, and their node
/// gradients are added to Parameter::grad by flush_param_grads().
/// A Graph is confined to one thread.
template <typename T>
class Graph
{
public:
    /// Backward callback: receives the output gradient and the graph for
    /// reading saved input values and accumulating input gradients.
    using Backward = std::function<void(Graph &, const Tensor<T> &)>;

    explicit Graph(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}

    Graph(const Graph &) = delete;
    Graph &operator=(const Graph &) = delete;

    bool grad_enabled() const { return grad_enabled_; }

    Var<T> constant(Tensor<T> value) { return add_node(std::move(value), nullptr, false, nullptr); }

    Var<T> input(Tensor<T> value, bool requires_grad)
    {
        return add_node(std::move(value), nullptr, requires_grad && grad_enabled_, nullptr);
    }

    /// Frozen parameters (trainable == false) enter as constants.
    Var<T> param(Parameter<T> &p)
    {
        const bool rg = grad_enabled_ && p.trainable;
        return add_node(Tensor<T>(), &p.value, rg, rg ? &p : nullptr);
    }

    const Tensor<T> &value(Var<T> v) const
    {
        const Node &n = nodes_[static_cast<std::size_t>(v.id)];
        return n.external ? *n.external : n.own;
    }

    bool requires_grad(Var<T> v) const { return nodes_[static_cast<std::size_t>(v.id)].requires_grad; }

    /// Gradient of a node; empty tensor if nothing flowed into it.
    const Tensor<T> &grad(Var<T> v) const { return nodes_[static_cast<std::size_t>(v.id)].grad; }

    /// Mutable gradient slot for an input during backward, or nullptr when the
    /// node does not need a gradient. Lazily zero-initialized.
    Tensor<T> *grad_slot(Var<T> v)
    {
        Node &n = nodes_[static_cast<std::size_t>(v.id)];
        if (!n.requires_grad)
            return nullptr;
        if (n.grad.empty())
            n.grad = Tensor<T>(value(v).shape(), T(0));
        return &n.grad;
    }

    /// Appends an op result. Records it for backward if any input requires grad.
    Var<T> emit(Tensor<T> out, std::initializer_list<Var<T>> inputs, Backward backward)
    {
        if (!out.all_finite())
            throw NonFiniteError("non-finite value produced by op #" + std::to_string(records_.size()));
        bool rg = false;
        if (grad_enabled_)
            for (const auto &in : inputs)
                rg = rg || requires_grad(in);
        Var<T> v = add_node(std::move(out), nullptr, rg, nullptr);
        if (rg)
            records_.push_back(Record{v.id, std::move(backward)});
        return v;
    }

    std::size_t num_records() const { return records_.size(); }
    std::size_t num_nodes() const { return nodes_.size(); }

    /// Reverse sweep from a scalar loss. Each record is visited exactly once.
    void backward(Var<T> loss, T seed = T(1))
    {
        if (value(loss).size() != 1)
            throw ShapeError("backward() needs a scalar loss, got " + shape_str(value(loss).shape()));
        if (!std::isfinite(value(loss)[0]))
            throw NonFiniteError("non-finite loss");
        Tensor<T> *g = grad_slot(loss);
        if (!g)
            return;
        (*g)[0] += seed;
        for (auto it = records_.rbegin(); it != records_.rend(); ++it)
        {
            const Node &n = nodes_[static_cast<std::size_t>(it->output)];
            if (n.grad.empty())
                continue;
            it->backward(*this, n.grad);
        }
    }

    /// Adds accumulated node gradients into the bound Parameter::grad tensors.
    void flush_param_grads(T scale = T(1))
    {
        for (auto &n : nodes_)
        {
            if (!n.param || n.grad.empty())
                continue;
            auto dst = n.param->grad.values();
            auto src = n.grad.values();
            for (std::size_t i = 0; i < dst.size(); ++i)
                dst[i] += scale * src[i];
        }
    }

    /// Visits (parameter, accumulated node gradient) pairs without touching
    /// Parameter::grad; used to reduce per-thread gradient buffers.
    template <typename Fn>
    void for_each_param_grad(Fn &&fn) const
    {
        for (const auto &n : nodes_)
            if (n.param && !n.grad.empty())
                fn(*n.param, n.grad);
    }

private:
    struct Node
    {
        Tensor<T> own;
        const Tensor<T> *external = nullptr;
        Parameter<T> *param = nullptr;
        bool requires_grad = false;
        Tensor<T> grad;
    };

    struct Record
    {
        int output;
        Backward backward;
    };

    Var<T> add_node(Tensor<T> own, const Tensor<T> *external, bool rg, Parameter<T> *param)
    {
        Node n;
        n.own = std::move(own);
        n.external = external;
        n.param = param;
        n.requires_grad = rg;
        nodes_.push_back(std::move(n));
        return Var<T>{this, static_cast<int>(nodes_.size()) - 1};
    }

    bool grad_enabled_;
    std::deque<Node> nodes_;
    std::vector<Record> records_;
};

} // namespace pilotmae::tc
