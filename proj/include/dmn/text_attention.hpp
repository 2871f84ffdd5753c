#pragma once

#include <random>
#include <string>

#include "dmn/params.hpp"
#include "dmn/tensor.hpp"

namespace dmn {

// Additive soft attention over text token states, queried by the question.
// Each projection line carries its own parameters (key/query/score are
// untied).
struct TextAttentionParams {
    Tensor w_key;   // [a x h]
    Tensor b_key;   // [a]
    Tensor w_query; // [a x h]
    Tensor b_query; // [a]
    Tensor w_score; // [1 x a]
    Tensor b_score; // [1]
};

TextAttentionParams make_text_attention_params(ParamSet& ps, const std::string& prefix,
                                               std::size_t hidden, std::size_t attn,
                                               std::mt19937_64& rng);

enum class TextSource { caption, summary };

const char* text_source_name(TextSource s);

struct TextContext {
    TextSource source = TextSource::caption;
    Tensor alpha;   // [L], nonnegative, sums to 1
    Tensor context; // [h], convex combination of the token states
};

// score_j = w . tanh(W_key t_j + b_key + W_query q + b_query) + b; alpha is
// the softmax of the scores; context = sum_j alpha_j t_j.
TextContext text_attend(const Tensor& text_states, const Tensor& q,
                        const TextAttentionParams& p, TextSource source);

} // namespace dmn
