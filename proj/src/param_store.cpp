#include "kga/param_store.hpp"

#include <cmath>

#include "kga/errors.hpp"

namespace kga {

void ParamStore::add(const std::string& name, Tensor tensor, bool frozen) {
    if (entries_.count(name)) {
        throw InvalidArgument("parameter already present: " + name);
    }
    order_.push_back(name);
    entries_.emplace(name, std::move(tensor));
    frozen_[name] = frozen;
}

bool ParamStore::has(const std::string& name) const { return entries_.count(name) > 0; }

Tensor& ParamStore::get(const std::string& name) {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw NotFound("no parameter named " + name);
    return it->second;
}

const Tensor& ParamStore::get(const std::string& name) const {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw NotFound("no parameter named " + name);
    return it->second;
}

bool ParamStore::is_frozen(const std::string& name) const {
    auto it = frozen_.find(name);
    if (it == frozen_.end()) throw NotFound("no parameter named " + name);
    return it->second;
}

void ParamStore::set_frozen(const std::string& name, bool frozen) {
    if (!entries_.count(name)) throw NotFound("no parameter named " + name);
    frozen_[name] = frozen;
}

void ParamStore::freeze_all() {
    for (const auto& name : order_) frozen_[name] = true;
}

double global_norm(const ParamStore& grads) {
    double sum_sq = 0.0;
    for (const auto& name : grads.names()) {
        for (double v : grads.get(name).values) sum_sq += v * v;
    }
    return std::sqrt(sum_sq);
}

void clip_global_norm(ParamStore& grads, double max_norm) {
    if (!(max_norm > 0.0)) throw InvalidArgument("clip_global_norm: max_norm must be positive");
    for (const auto& name : grads.names()) check_finite(grads.get(name), "gradient " + name);
    const double norm = global_norm(grads);
    if (norm <= max_norm * (1.0 + 1e-12)) return;
    for (const auto& name : grads.names()) {
        for (double& v : grads.get(name).values) v = v * max_norm / norm;
    }
}

void adam_step(ParamStore& params, const ParamStore& grads, AdamState& state) {
    // grads must cover exactly the non-frozen entries
    for (const auto& name : grads.names()) {
        if (!params.has(name)) throw InvalidArgument("gradient for unknown parameter " + name);
        if (params.is_frozen(name)) {
            throw InvalidArgument("gradient supplied for frozen parameter " + name);
        }
        if (!grads.get(name).same_shape(params.get(name))) {
            throw InvalidArgument("gradient shape mismatch for " + name);
        }
    }
    for (const auto& name : params.names()) {
        if (!params.is_frozen(name) && !grads.has(name)) {
            throw InvalidArgument("missing gradient for parameter " + name);
        }
    }

    state.step_count += 1;
    const AdamConfig& h = state.hyper;
    const double bias1 = 1.0 - std::pow(h.beta1, static_cast<double>(state.step_count));
    const double bias2 = 1.0 - std::pow(h.beta2, static_cast<double>(state.step_count));

    for (const auto& name : params.names()) {
        if (params.is_frozen(name)) continue;
        Tensor& theta = params.get(name);
        const Tensor& g = grads.get(name);
        auto m_it = state.first_moment.find(name);
        if (m_it == state.first_moment.end()) {
            m_it = state.first_moment.emplace(name, Tensor::zeros(theta.shape)).first;
            state.second_moment.emplace(name, Tensor::zeros(theta.shape));
        }
        Tensor& m = m_it->second;
        Tensor& v = state.second_moment.at(name);
        if (!m.same_shape(theta)) throw InvalidArgument("adam moment shape mismatch for " + name);

        for (std::size_t i = 0; i < theta.values.size(); ++i) {
            const double gi = g.values[i];
            m.values[i] = h.beta1 * m.values[i] + (1.0 - h.beta1) * gi;
            v.values[i] = h.beta2 * v.values[i] + (1.0 - h.beta2) * gi * gi;
            const double m_hat = m.values[i] / bias1;
            const double v_hat = v.values[i] / bias2;
            theta.values[i] -= h.learning_rate * m_hat / (std::sqrt(v_hat) + h.epsilon);
        }
        check_finite(theta, "parameter " + name + " after adam step");
    }
}

}  // namespace kga
