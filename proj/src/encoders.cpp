#include "dmn/encoders.hpp"

#include "dmn/error.hpp"

namespace dmn {

LstmParams make_lstm_params(ParamSet& ps, const std::string& prefix, std::size_t d_in,
                            std::size_t d_h, std::mt19937_64& rng) {
    LstmParams p;
    p.w_ih = ps.create(prefix + ".w_ih", {4 * d_h, d_in}, d_in, rng);
    p.w_hh = ps.create(prefix + ".w_hh", {4 * d_h, d_h}, d_h, rng);
    p.bias = ps.create(prefix + ".bias", {4 * d_h}, d_h, rng);
    // Start the forget gates open (bias +1) so cell state survives a whole
    // sequence before training has tuned the gates.
    for (std::size_t j = d_h; j < 2 * d_h; ++j) p.bias.value()[j] += 1.0;
    return p;
}

std::pair<Tensor, Tensor> lstm_cell(const Tensor& x, const Tensor& h, const Tensor& c,
                                    const LstmParams& p) {
    if (h.shape() != c.shape() || h.rank() != 1) {
        throw DimensionError("lstm_cell: hidden and cell states must be equal 1-D shapes, got " +
                             shape_to_string(h.shape()) + " and " + shape_to_string(c.shape()));
    }
    const std::size_t hs = h.shape()[0];
    Tensor pre = add(add(matvec(p.w_ih, x), matvec(p.w_hh, h)), p.bias);
    Tensor gate_i = sigmoid(slice(pre, 0, hs));
    Tensor gate_f = sigmoid(slice(pre, hs, hs));
    Tensor cand = tanh(slice(pre, 2 * hs, hs));
    Tensor gate_o = sigmoid(slice(pre, 3 * hs, hs));
    Tensor c_next = add(hadamard(gate_f, c), hadamard(gate_i, cand));
    Tensor h_next = hadamard(gate_o, tanh(c_next));
    return {h_next, c_next};
}

EmbeddingTable make_embedding_table(ParamSet& ps, const std::string& name, std::size_t vocab_size,
                                    std::size_t dim, std::mt19937_64& rng) {
    EmbeddingTable t;
    t.vocab_size = vocab_size;
    t.dim = dim;
    // Lookup rows are not matmul operands; keep them at unit scale so token
    // identity survives the encoder stack instead of starting 1/sqrt(dim)
    // quieter than every continuous input.
    t.weights = ps.create(name, {vocab_size, dim}, 1, rng);
    return t;
}

Tensor embed_token(const EmbeddingTable& table, int token_id) {
    if (token_id < 0 || static_cast<std::size_t>(token_id) >= table.vocab_size) {
        throw InputError("embed_token: token id " + std::to_string(token_id) +
                         " out of range for vocabulary of size " +
                         std::to_string(table.vocab_size));
    }
    return row(table.weights, static_cast<std::size_t>(token_id));
}

QuestionEmbedding encode_question(const std::vector<int>& token_ids, const EmbeddingTable& table,
                                  const QuestionEncoderParams& p) {
    if (token_ids.empty()) throw InputError("encode_question: empty question");
    const std::size_t hs = p.fwd.w_hh.shape()[1];

    Tensor h_f = Tensor::zeros({hs});
    Tensor c_f = Tensor::zeros({hs});
    for (int id : token_ids) {
        auto [h2, c2] = lstm_cell(embed_token(table, id), h_f, c_f, p.fwd);
        h_f = h2;
        c_f = c2;
    }
    Tensor h_b = Tensor::zeros({hs});
    Tensor c_b = Tensor::zeros({hs});
    for (auto it = token_ids.rbegin(); it != token_ids.rend(); ++it) {
        auto [h2, c2] = lstm_cell(embed_token(table, *it), h_b, c_b, p.bwd);
        h_b = h2;
        c_b = c2;
    }
    return {concat({c_f, c_b})};
}

const char* modality_name(Modality m) { return m == Modality::visual ? "visual" : "audio"; }

InputFacts encode_facts(const Tensor& features, const LstmParams& p, Modality modality) {
    if (features.rank() != 2) {
        throw DimensionError("encode_facts: expects [segments x feature] input, got " +
                             shape_to_string(features.shape()));
    }
    const std::size_t n = features.shape()[0];
    if (n == 0) throw InputError("encode_facts: zero segments");
    const std::size_t hs = p.w_hh.shape()[1];

    Tensor h = Tensor::zeros({hs});
    Tensor c = Tensor::zeros({hs});
    std::vector<Tensor> rows;
    rows.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto [h2, c2] = lstm_cell(row(features, i), h, c, p);
        h = h2;
        c = c2;
        rows.push_back(reshape(h, {1, hs}));
    }
    InputFacts f;
    f.modality = modality;
    f.facts = rows.size() == 1 ? rows[0] : concat(rows, 0);
    f.count = n;
    return f;
}

Tensor encode_text_states(const std::vector<int>& token_ids, const EmbeddingTable& table,
                          const LstmParams& p) {
    const std::size_t hs = p.w_hh.shape()[1];
    if (token_ids.empty()) return Tensor::zeros({1, hs});

    Tensor h = Tensor::zeros({hs});
    Tensor c = Tensor::zeros({hs});
    std::vector<Tensor> rows;
    rows.reserve(token_ids.size());
    for (int id : token_ids) {
        auto [h2, c2] = lstm_cell(embed_token(table, id), h, c, p);
        h = h2;
        c = c2;
        rows.push_back(reshape(h, {1, hs}));
    }
    return rows.size() == 1 ? rows[0] : concat(rows, 0);
}

} // namespace dmn
