#pragma once

#include <algorithm>
#include <functional>
#include <memory>
#include <unordered_set>
#include <utility>
#include <vector>

#include "diffdepth/tensor.hpp"

namespace diffdepth {

// Reverse-mode autodiff over eagerly evaluated tensor expressions.
// Each op creates a Node holding the forward value and a closure that
// scatters the node's gradient into its parents.

template <class S>
struct Node;

template <class S>
using Var = std::shared_ptr<Node<S>>;

template <class S>
struct Node {
    Tensor<S> value;
    Tensor<S> grad;
    bool requires_grad = false;
    bool grad_alloc = false;
    std::vector<Var<S>> parents;
    std::function<void(Node<S>&)> backward_fn;
    const char* op = "leaf";

    Tensor<S>& grad_buf() {
        if (!grad_alloc) {
            grad = Tensor<S>::zeros(value.shape);
            grad_alloc = true;
        }
        return grad;
    }
};

template <class S>
Var<S> make_leaf(Tensor<S> value, bool requires_grad = false) {
    auto n = std::make_shared<Node<S>>();
    n->value = std::move(value);
    n->requires_grad = requires_grad;
    return n;
}

template <class S>
Var<S> make_const(Tensor<S> value) {
    return make_leaf<S>(std::move(value), false);
}

namespace detail {

template <class S>
Var<S> make_op(const char* name, Tensor<S> value, std::vector<Var<S>> parents,
               std::function<void(Node<S>&)> backward_fn) {
    auto n = std::make_shared<Node<S>>();
    n->value = std::move(value);
    n->op = name;
    for (auto& p : parents) n->requires_grad = n->requires_grad || p->requires_grad;
    n->parents = std::move(parents);
    if (n->requires_grad) n->backward_fn = std::move(backward_fn);
    return n;
}

}  // namespace detail

struct BackwardStats {
    int64_t nodes_visited = 0;
    int64_t backward_calls = 0;
};

// Reverse topological order (root first). Iterative DFS; each node appears
// exactly once.
template <class S>
std::vector<Node<S>*> topo_order(const Var<S>& root) {
    std::vector<Node<S>*> order;
    std::unordered_set<Node<S>*> seen;
    // stack of (node, next parent index)
    std::vector<std::pair<Node<S>*, size_t>> stack;
    if (!root) return order;
    stack.push_back({root.get(), 0});
    seen.insert(root.get());
    while (!stack.empty()) {
        auto& [n, idx] = stack.back();
        if (idx < n->parents.size()) {
            Node<S>* p = n->parents[idx].get();
            ++idx;
            if (p->requires_grad && !seen.count(p)) {
                seen.insert(p);
                stack.push_back({p, 0});
            }
        } else {
            order.push_back(n);
            stack.pop_back();
        }
    }
    // order is currently children-after-parents (post-order); reverse so the
    // root comes first and every node precedes its parents.
    std::reverse(order.begin(), order.end());
    return order;
}

// Backpropagate from a scalar loss. Gradients accumulate into each
// requires_grad node's grad buffer; call zero_grads on parameter nodes
// between steps.
template <class S>
BackwardStats backward(const Var<S>& loss) {
    if (!loss) throw ContractError("backward: null loss");
    if (loss->value.numel() != 1)
        throw ContractError("backward: loss must be scalar, got shape " +
                            shape_str(loss->value.shape));
    BackwardStats stats;
    if (!loss->requires_grad) return stats;
    auto order = topo_order(loss);
    loss->grad_buf()[0] = S(1);
    for (Node<S>* n : order) {
        ++stats.nodes_visited;
        if (n->backward_fn && n->grad_alloc) {
            n->backward_fn(*n);
            ++stats.backward_calls;
        }
    }
    return stats;
}

}  // namespace diffdepth
