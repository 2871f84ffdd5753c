#include "dmn/text_attention.hpp"

#include "dmn/error.hpp"

namespace dmn {

TextAttentionParams make_text_attention_params(ParamSet& ps, const std::string& prefix,
                                               std::size_t hidden, std::size_t attn,
                                               std::mt19937_64& rng) {
    TextAttentionParams p;
    p.w_key = ps.create(prefix + ".w_key", {attn, hidden}, hidden, rng);
    p.b_key = ps.create(prefix + ".b_key", {attn}, hidden, rng);
    p.w_query = ps.create(prefix + ".w_query", {attn, hidden}, hidden, rng);
    p.b_query = ps.create(prefix + ".b_query", {attn}, hidden, rng);
    p.w_score = ps.create(prefix + ".w_score", {1, attn}, attn, rng);
    p.b_score = ps.create(prefix + ".b_score", {1}, attn, rng);
    return p;
}

const char* text_source_name(TextSource s) {
    return s == TextSource::caption ? "caption" : "summary";
}

TextContext text_attend(const Tensor& text_states, const Tensor& q,
                        const TextAttentionParams& p, TextSource source) {
    if (text_states.rank() != 2) {
        throw DimensionError("text_attend: expects [tokens x hidden] states, got " +
                             shape_to_string(text_states.shape()));
    }
    if (q.rank() != 1 || q.shape()[0] != text_states.shape()[1]) {
        throw DimensionError("text_attend: query shape " + shape_to_string(q.shape()) +
                             " does not match state rows of " +
                             shape_to_string(text_states.shape()));
    }
    const std::size_t len = text_states.shape()[0];

    // The query projection is shared by every token's score.
    Tensor query_part = add(matvec(p.w_query, q), p.b_query);
    std::vector<Tensor> scores;
    scores.reserve(len);
    for (std::size_t j = 0; j < len; ++j) {
        Tensor key_part = add(matvec(p.w_key, row(text_states, j)), p.b_key);
        Tensor hiddenj = tanh(add(key_part, query_part));
        scores.push_back(add(matvec(p.w_score, hiddenj), p.b_score));
    }

    TextContext out;
    out.source = source;
    out.alpha = softmax(scores.size() == 1 ? scores[0] : concat(scores));
    out.context = matvec(transpose(text_states), out.alpha);
    return out;
}

} // namespace dmn
