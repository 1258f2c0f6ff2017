#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "kga/tensor.hpp"

namespace kga {

// Named parameter tensors in insertion order, with per-tensor freeze flags.
// Frozen entries are never touched by the optimizer; the language model is
// stored frozen while the caption model trains.
class ParamStore {
  public:
    void add(const std::string& name, Tensor tensor, bool frozen = false);
    bool has(const std::string& name) const;
    Tensor& get(const std::string& name);
    const Tensor& get(const std::string& name) const;

    bool is_frozen(const std::string& name) const;
    void set_frozen(const std::string& name, bool frozen);
    void freeze_all();

    const std::vector<std::string>& names() const { return order_; }
    std::size_t size() const { return order_.size(); }
    bool empty() const { return order_.empty(); }

  private:
    std::vector<std::string> order_;
    std::unordered_map<std::string, Tensor> entries_;
    std::unordered_map<std::string, bool> frozen_;
};

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct AdamState {
    AdamConfig hyper;
    std::uint64_t step_count = 0;
    std::map<std::string, Tensor> first_moment;
    std::map<std::string, Tensor> second_moment;
};

double global_norm(const ParamStore& grads);

// Scales every gradient by max_norm / norm when the global L2 norm exceeds
// max_norm; otherwise leaves them bitwise unchanged. Norms within a 1e-12
// relative band of the threshold count as within it, which makes the op
// idempotent at double precision.
void clip_global_norm(ParamStore& grads, double max_norm);

// One bias-corrected Adam update. `grads` must hold exactly the non-frozen
// entries of `params`; a gradient for a frozen entry is an error.
void adam_step(ParamStore& params, const ParamStore& grads, AdamState& state);

}  // namespace kga
