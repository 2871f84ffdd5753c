#pragma once

#include <random>
#include <string>
#include <utility>
#include <vector>

#include "dmn/encoders.hpp"
#include "dmn/params.hpp"
#include "dmn/tensor.hpp"

namespace dmn {

// Episodic memory over input facts: per-episode attention gates select facts,
// an attention-gated GRU traverses them, and an affine+relu update refreshes
// the memory vector. Gate distributions are retained for the entropy penalty
// and for inspection.

struct GateParams {
    Tensor w_hidden; // [a x 2h], consumes [f .* q ; f .* m_prev]
    Tensor b_hidden; // [a]
    Tensor w_out;    // [1 x a]
    Tensor b_out;    // [1]
};

// GRU with the update gate replaced by the scalar attention gate; the reset
// gate and candidate follow the standard GRU equations.
struct AttentionGruParams {
    Tensor w_reset; // [h x h] input projection
    Tensor u_reset; // [h x h] state projection
    Tensor b_reset; // [h]
    Tensor w_cand;  // [h x h]
    Tensor u_cand;  // [h x h]
    Tensor b_cand;  // [h]
};

struct EpisodicParams {
    GateParams gate;
    AttentionGruParams gru;
    Tensor w_memory; // [h x 3h], consumes [q ; h ; m_prev]
    Tensor b_memory; // [h]
    Tensor w_init;   // [h x h], maps q to the initial memory
    Tensor b_init;   // [h]
};

EpisodicParams make_episodic_params(ParamSet& ps, const std::string& prefix, std::size_t hidden,
                                    std::size_t attn, std::mt19937_64& rng);

struct AttentionGates {
    int episode = 0; // 1-based episode index
    Tensor g;        // [N], entries in [0,1], sums to 1
};

struct EpisodicState {
    Tensor memory; // [h]
    std::vector<AttentionGates> gates_history;
    int episodes = 0;
};

// Gate logits: z_i = [f_i .* q ; f_i .* m_prev], Z_i = w_out . tanh(w_hidden
// z_i + b_hidden) + b_out, softmaxed over facts.
AttentionGates compute_gates(const InputFacts& facts, const Tensor& q, const Tensor& m_prev,
                             const GateParams& p, int episode);

// Standard GRU candidate h' for one fact.
Tensor gru_candidate(const Tensor& f_i, const Tensor& h_prev, const AttentionGruParams& p);

// h_out = g * h' + (1-g) * h_prev; gate must lie in [0,1] (ContractError).
Tensor attention_gru_step(const Tensor& f_i, const Tensor& h_prev, const Tensor& gate,
                          const AttentionGruParams& p);

// Full traversal of the facts plus the contextual state c = [q ; h ; m_prev].
std::pair<Tensor, AttentionGates> run_episode(const InputFacts& facts, const Tensor& q,
                                              const Tensor& m_prev, const EpisodicParams& p,
                                              int episode);

// m_t = relu(W c + b).
Tensor update_memory(const Tensor& c, const Tensor& w_memory, const Tensor& b_memory);

// M episodes starting from m_0 = affine(q); episodes < 1 -> ConfigError.
EpisodicState run_dmn(const InputFacts& facts, const Tensor& q, int episodes,
                      const EpisodicParams& p);

} // namespace dmn
