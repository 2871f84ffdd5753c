#include "dmn/fusion.hpp"

#include "dmn/error.hpp"

namespace dmn {

FusionMode parse_fusion_mode(const std::string& name) {
    if (name == "literal") return FusionMode::literal;
    if (name == "question-gated") return FusionMode::question_gated;
    throw ConfigError("unknown fusion mode '" + name +
                      "' (expected 'literal' or 'question-gated')");
}

const char* fusion_mode_name(FusionMode m) {
    return m == FusionMode::literal ? "literal" : "question-gated";
}

namespace {

Tensor stack_contexts(const std::vector<Tensor>& contexts, const char* op) {
    if (contexts.empty()) throw InputError(std::string(op) + ": no contexts given");
    const std::size_t h = contexts[0].size();
    std::vector<Tensor> rows;
    rows.reserve(contexts.size());
    for (const Tensor& c : contexts) {
        if (c.rank() != 1 || c.shape()[0] != h) {
            throw DimensionError(std::string(op) + ": context shape " +
                                 shape_to_string(c.shape()) + " does not match " +
                                 shape_to_string(contexts[0].shape()));
        }
        rows.push_back(reshape(c, {1, h}));
    }
    return rows.size() == 1 ? rows[0] : concat(rows, 0);
}

} // namespace

FusionResult fuse(const std::vector<Tensor>& contexts) {
    Tensor stacked = stack_contexts(contexts, "fuse"); // [m x h]
    FusionResult out;
    out.beta = softmax(stacked, 0); // per-dimension weights across modalities
    Tensor weighted = hadamard(out.beta, stacked);
    out.v = sum_axis(weighted, 0);
    return out;
}

FusionParams make_fusion_params(ParamSet& ps, const std::string& prefix, std::size_t hidden,
                                std::size_t attn, std::mt19937_64& rng) {
    FusionParams p;
    p.w_hidden = ps.create(prefix + ".w_hidden", {attn, 2 * hidden}, 2 * hidden, rng);
    p.b_hidden = ps.create(prefix + ".b_hidden", {attn}, 2 * hidden, rng);
    p.w_score = ps.create(prefix + ".w_score", {1, attn}, attn, rng);
    p.b_score = ps.create(prefix + ".b_score", {1}, attn, rng);
    return p;
}

FusionResult fuse_question_gated(const std::vector<Tensor>& contexts, const Tensor& q,
                                 const FusionParams& p) {
    Tensor stacked = stack_contexts(contexts, "fuse_question_gated"); // [m x h]
    const std::size_t m = stacked.shape()[0];
    const std::size_t h = stacked.shape()[1];
    if (q.rank() != 1 || q.shape()[0] != h) {
        throw DimensionError("fuse_question_gated: query shape " + shape_to_string(q.shape()) +
                             " does not match context dimension " + std::to_string(h));
    }
    std::vector<Tensor> scores;
    scores.reserve(m);
    for (std::size_t j = 0; j < m; ++j) {
        Tensor joint = concat({row(stacked, j), q});
        Tensor hidden = tanh(add(matvec(p.w_hidden, joint), p.b_hidden));
        scores.push_back(add(matvec(p.w_score, hidden), p.b_score));
    }
    Tensor weights = softmax(scores.size() == 1 ? scores[0] : concat(scores)); // [m]

    FusionResult out;
    // One weight per modality, repeated across dimensions so the export shape
    // matches the literal mode.
    std::vector<Tensor> beta_rows, v_terms;
    beta_rows.reserve(m);
    v_terms.reserve(m);
    for (std::size_t j = 0; j < m; ++j) {
        Tensor wj = pick(weights, j);
        beta_rows.push_back(reshape(scale_by(Tensor::full({h}, 1.0), wj), {1, h}));
        v_terms.push_back(scale_by(row(stacked, j), wj));
    }
    out.beta = beta_rows.size() == 1 ? beta_rows[0] : concat(beta_rows, 0);
    Tensor v = v_terms[0];
    for (std::size_t j = 1; j < m; ++j) v = add(v, v_terms[j]);
    out.v = v;
    return out;
}

} // namespace dmn
