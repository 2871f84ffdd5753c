#include "dmn/episodic.hpp"

#include "dmn/error.hpp"

namespace dmn {

EpisodicParams make_episodic_params(ParamSet& ps, const std::string& prefix, std::size_t hidden,
                                    std::size_t attn, std::mt19937_64& rng) {
    EpisodicParams p;
    p.gate.w_hidden = ps.create(prefix + ".gate.w_hidden", {attn, 2 * hidden}, 2 * hidden, rng);
    p.gate.b_hidden = ps.create(prefix + ".gate.b_hidden", {attn}, 2 * hidden, rng);
    p.gate.w_out = ps.create(prefix + ".gate.w_out", {1, attn}, attn, rng);
    p.gate.b_out = ps.create(prefix + ".gate.b_out", {1}, attn, rng);
    p.gru.w_reset = ps.create(prefix + ".gru.w_reset", {hidden, hidden}, hidden, rng);
    p.gru.u_reset = ps.create(prefix + ".gru.u_reset", {hidden, hidden}, hidden, rng);
    p.gru.b_reset = ps.create(prefix + ".gru.b_reset", {hidden}, hidden, rng);
    p.gru.w_cand = ps.create(prefix + ".gru.w_cand", {hidden, hidden}, hidden, rng);
    p.gru.u_cand = ps.create(prefix + ".gru.u_cand", {hidden, hidden}, hidden, rng);
    p.gru.b_cand = ps.create(prefix + ".gru.b_cand", {hidden}, hidden, rng);
    p.w_memory = ps.create(prefix + ".w_memory", {hidden, 3 * hidden}, 3 * hidden, rng);
    p.b_memory = ps.create(prefix + ".b_memory", {hidden}, 3 * hidden, rng);
    p.w_init = ps.create(prefix + ".w_init", {hidden, hidden}, hidden, rng);
    p.b_init = ps.create(prefix + ".b_init", {hidden}, hidden, rng);
    return p;
}

AttentionGates compute_gates(const InputFacts& facts, const Tensor& q, const Tensor& m_prev,
                             const GateParams& p, int episode) {
    if (q.shape() != m_prev.shape() || q.rank() != 1) {
        throw DimensionError("compute_gates: question and memory must be equal 1-D shapes, got " +
                             shape_to_string(q.shape()) + " and " +
                             shape_to_string(m_prev.shape()));
    }
    if (facts.facts.rank() != 2 || facts.facts.shape()[1] != q.shape()[0]) {
        throw DimensionError("compute_gates: fact rows of " +
                             shape_to_string(facts.facts.shape()) +
                             " do not match question shape " + shape_to_string(q.shape()));
    }
    const std::size_t n = facts.facts.shape()[0];
    std::vector<Tensor> logits;
    logits.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        Tensor f_i = row(facts.facts, i);
        Tensor z_i = concat({hadamard(f_i, q), hadamard(f_i, m_prev)});
        Tensor hidden = tanh(add(matvec(p.w_hidden, z_i), p.b_hidden));
        logits.push_back(add(matvec(p.w_out, hidden), p.b_out));
    }
    AttentionGates out;
    out.episode = episode;
    out.g = softmax(logits.size() == 1 ? logits[0] : concat(logits));
    return out;
}

Tensor gru_candidate(const Tensor& f_i, const Tensor& h_prev, const AttentionGruParams& p) {
    Tensor reset = sigmoid(
        add(add(matvec(p.w_reset, f_i), matvec(p.u_reset, h_prev)), p.b_reset));
    return tanh(
        add(add(matvec(p.w_cand, f_i), matvec(p.u_cand, hadamard(reset, h_prev))), p.b_cand));
}

Tensor attention_gru_step(const Tensor& f_i, const Tensor& h_prev, const Tensor& gate,
                          const AttentionGruParams& p) {
    if (gate.size() != 1) {
        throw DimensionError("attention_gru_step: gate must hold a single element, got shape " +
                             shape_to_string(gate.shape()));
    }
    const double g = gate.value()[0];
    if (g < 0.0 || g > 1.0) {
        throw ContractError("attention_gru_step: gate value " + std::to_string(g) +
                            " outside [0, 1]");
    }
    Tensor cand = gru_candidate(f_i, h_prev, p);
    // h = g*h' + (1-g)*h_prev, with gradient flowing through the gate.
    Tensor keep = scale_by(h_prev, add_scalar(neg(gate), 1.0));
    return add(scale_by(cand, gate), keep);
}

std::pair<Tensor, AttentionGates> run_episode(const InputFacts& facts, const Tensor& q,
                                              const Tensor& m_prev, const EpisodicParams& p,
                                              int episode) {
    AttentionGates gates = compute_gates(facts, q, m_prev, p.gate, episode);
    const std::size_t n = facts.facts.shape()[0];
    Tensor h = Tensor::zeros({q.shape()[0]});
    for (std::size_t i = 0; i < n; ++i) {
        h = attention_gru_step(row(facts.facts, i), h, pick(gates.g, i), p.gru);
    }
    Tensor c = concat({q, h, m_prev});
    return {c, gates};
}

Tensor update_memory(const Tensor& c, const Tensor& w_memory, const Tensor& b_memory) {
    return relu(add(matvec(w_memory, c), b_memory));
}

EpisodicState run_dmn(const InputFacts& facts, const Tensor& q, int episodes,
                      const EpisodicParams& p) {
    if (episodes < 1) {
        throw ConfigError("run_dmn: episode count must be at least 1, got " +
                          std::to_string(episodes));
    }
    EpisodicState state;
    state.episodes = episodes;
    state.memory = add(matvec(p.w_init, q), p.b_init);
    for (int t = 1; t <= episodes; ++t) {
        auto [c, gates] = run_episode(facts, q, state.memory, p, t);
        state.memory = update_memory(c, p.w_memory, p.b_memory);
        state.gates_history.push_back(std::move(gates));
    }
    return state;
}

} // namespace dmn
