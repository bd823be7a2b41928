#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "diffdepth/unet.hpp"

namespace diffdepth {

// AdamW with decoupled weight decay. Parameters whose name matches a
// no-decay entry (the gate bias) skip the decay term.
template <class S>
struct AdamW {
    double lr = 3e-5;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;
    int64_t step_count = 0;
    std::vector<Tensor<S>> m, v;
    std::vector<uint8_t> decay;

    void attach(const ParamStore<S>& ps, const std::vector<std::string>& no_decay = {}) {
        m.clear();
        v.clear();
        decay.clear();
        for (auto& [name, p] : ps.items) {
            m.push_back(Tensor<S>::zeros(p->value.shape));
            v.push_back(Tensor<S>::zeros(p->value.shape));
            bool d = true;
            for (const auto& nd : no_decay)
                if (name == nd) d = false;
            decay.push_back(d ? 1 : 0);
        }
    }

    // Global-norm gradient clipping; returns the pre-clip norm.
    double clip_grad_norm(ParamStore<S>& ps, double max_norm) {
        double sq = 0.0;
        for (auto& [_, p] : ps.items) {
            if (!p->grad_alloc) continue;
            for (int64_t i = 0; i < p->grad.numel(); ++i) sq += (double)p->grad[i] * (double)p->grad[i];
        }
        double norm = std::sqrt(sq);
        if (max_norm > 0.0 && norm > max_norm) {
            S scale = (S)(max_norm / norm);
            for (auto& [_, p] : ps.items) {
                if (!p->grad_alloc) continue;
                for (int64_t i = 0; i < p->grad.numel(); ++i) p->grad[i] *= scale;
            }
        }
        return norm;
    }

    void step(ParamStore<S>& ps) {
        if (m.size() != ps.items.size()) throw ContractError("AdamW: attach() before step()");
        ++step_count;
        double bc1 = 1.0 - std::pow(beta1, (double)step_count);
        double bc2 = 1.0 - std::pow(beta2, (double)step_count);
        for (size_t k = 0; k < ps.items.size(); ++k) {
            Var<S>& p = ps.items[k].second;
            Tensor<S>& mk = m[k];
            Tensor<S>& vk = v[k];
            bool has_grad = p->grad_alloc;
            for (int64_t i = 0; i < p->value.numel(); ++i) {
                double g = has_grad ? (double)p->grad[i] : 0.0;
                double mi = beta1 * (double)mk[i] + (1.0 - beta1) * g;
                double vi = beta2 * (double)vk[i] + (1.0 - beta2) * g * g;
                mk[i] = (S)mi;
                vk[i] = (S)vi;
                double update = (mi / bc1) / (std::sqrt(vi / bc2) + eps);
                if (decay[k]) update += weight_decay * (double)p->value[i];
                p->value[i] = (S)((double)p->value[i] - lr * update);
            }
        }
    }
};

}  // namespace diffdepth
