#include "dmn/decoder.hpp"

#include <algorithm>
#include <cmath>

#include "dmn/data.hpp"
#include "dmn/error.hpp"

namespace dmn {

DecoderParams make_decoder_params(ParamSet& ps, const std::string& prefix, std::size_t hidden,
                                  std::size_t emb_dim, std::size_t vocab,
                                  std::mt19937_64& rng) {
    DecoderParams p;
    p.lstm = make_lstm_params(ps, prefix + ".lstm", 2 * hidden + emb_dim, hidden, rng);
    p.w_out = ps.create(prefix + ".w_out", {vocab, hidden}, hidden, rng);
    p.b_out = ps.create(prefix + ".b_out", {vocab}, 0, rng);
    return p;
}

DecoderState initial_decoder_state(std::size_t hidden) {
    DecoderState s;
    s.h = Tensor::zeros({hidden});
    s.c = Tensor::zeros({hidden});
    s.step = 0;
    return s;
}

ChainState initial_chain(std::size_t hidden) {
    ChainState c;
    c.s_prev_final = Tensor::zeros({hidden});
    c.question_index = 1;
    return c;
}

std::pair<DecoderState, Tensor> decode_step(const DecoderState& state, const ChainState& chain,
                                            const Tensor& v, int y_prev,
                                            const EmbeddingTable& table,
                                            const DecoderParams& p) {
    const std::size_t hidden = state.h.shape()[0];
    if (chain.s_prev_final.shape() != std::vector<std::size_t>{hidden})
        throw DimensionError("decode_step: chain state size mismatch");
    if (v.shape() != std::vector<std::size_t>{hidden})
        throw DimensionError("decode_step: fused context size mismatch");
    Tensor x = concat({chain.s_prev_final, v, embed_token(table, y_prev)});
    auto [h, c] = lstm_cell(x, state.h, state.c, p.lstm);
    Tensor logits = affine(p.w_out, h, p.b_out);
    DecoderState next{h, c, state.step + 1};
    return {next, logits};
}

DecodeResult decode_teacher_forced(const ChainState& chain, const Tensor& v,
                                   const std::vector<int>& target, const EmbeddingTable& table,
                                   const DecoderParams& p) {
    if (target.size() < 2)
        throw InputError("decode_teacher_forced: target needs at least a start and end marker");
    if (target.front() != Vocabulary::kBos)
        throw InputError("decode_teacher_forced: target does not begin with the start marker");
    if (target.back() != Vocabulary::kEos)
        throw InputError("decode_teacher_forced: target does not end with the end marker");
    DecodeResult r;
    DecoderState state = initial_decoder_state(chain.s_prev_final.shape()[0]);
    for (std::size_t t = 0; t + 1 < target.size(); ++t) {
        auto [next, logits] = decode_step(state, chain, v, target[t], table, p);
        r.step_logits.push_back(logits);
        state = next;
    }
    r.final_state = state;
    return r;
}

namespace {

bool lex_less(const std::vector<int>& a, const std::vector<int>& b) {
    return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

// Ordering inside a step's pool: total log-probability, ties to the
// lexicographically smallest sequence.
bool pool_less(const BeamHypothesis& a, const BeamHypothesis& b) {
    if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
    return lex_less(a.tokens, b.tokens);
}

double normalized(const BeamHypothesis& h) {
    return h.log_prob / static_cast<double>(h.tokens.size());
}

// Final ranking: normalized score, then earlier completion, then the
// lexicographically smallest sequence.
bool final_less(const BeamHypothesis& a, const BeamHypothesis& b) {
    const double sa = normalized(a);
    const double sb = normalized(b);
    if (sa != sb) return sa > sb;
    if (a.completed_step != b.completed_step) return a.completed_step < b.completed_step;
    return lex_less(a.tokens, b.tokens);
}

} // namespace

BeamSearchResult beam_search(const ChainState& chain, const Tensor& v,
                             const EmbeddingTable& table, const DecoderParams& p, int width,
                             int max_len) {
    if (width < 1) throw ConfigError("beam_search: width must be at least 1");
    if (max_len < 1) throw ConfigError("beam_search: max_len must be at least 1");
    NoGradGuard guard;
    const std::size_t hidden = chain.s_prev_final.shape()[0];
    const std::size_t vocab = p.b_out.shape()[0];

    std::vector<BeamHypothesis> alive;
    alive.push_back({{}, 0.0, initial_decoder_state(hidden), false, 0});
    std::vector<BeamHypothesis> finished;
    BeamSearchResult result;

    for (int step = 1; step <= max_len && !alive.empty(); ++step) {
        std::vector<BeamHypothesis> candidates;
        candidates.reserve(alive.size() * vocab);
        for (const BeamHypothesis& hyp : alive) {
            const int y_prev = hyp.tokens.empty() ? Vocabulary::kBos : hyp.tokens.back();
            auto [next, logits] = decode_step(hyp.state, chain, v, y_prev, table, p);
            const Tensor scores = log_softmax(logits);
            const std::vector<double>& lp = scores.value();
            for (std::size_t tok = 0; tok < vocab; ++tok) {
                BeamHypothesis ext = hyp;
                ext.tokens.push_back(static_cast<int>(tok));
                ext.log_prob += lp[tok];
                ext.state = next;
                ext.complete = static_cast<int>(tok) == Vocabulary::kEos;
                ext.completed_step = step;
                candidates.push_back(std::move(ext));
            }
        }
        std::sort(candidates.begin(), candidates.end(), pool_less);
        if (candidates.size() > static_cast<std::size_t>(width)) candidates.resize(width);
        result.step_pools.push_back(candidates);
        alive.clear();
        for (BeamHypothesis& c : candidates) {
            if (c.complete)
                finished.push_back(std::move(c));
            else
                alive.push_back(std::move(c));
        }
    }
    // Hypotheses still alive at the length cap count as truncated endings.
    for (BeamHypothesis& h : alive) finished.push_back(std::move(h));
    if (finished.empty()) throw ContractError("beam_search: no hypothesis survived");

    std::sort(finished.begin(), finished.end(), final_less);
    const BeamHypothesis& best = finished.front();
    result.tokens = best.tokens;
    result.score = normalized(best);
    result.final_state = best.state;
    return result;
}

BeamSearchResult greedy_decode(const ChainState& chain, const Tensor& v,
                               const EmbeddingTable& table, const DecoderParams& p, int max_len) {
    if (max_len < 1) throw ConfigError("greedy_decode: max_len must be at least 1");
    NoGradGuard guard;
    const std::size_t hidden = chain.s_prev_final.shape()[0];
    BeamSearchResult result;
    DecoderState state = initial_decoder_state(hidden);
    double total = 0.0;
    int y_prev = Vocabulary::kBos;
    for (int step = 1; step <= max_len; ++step) {
        auto [next, logits] = decode_step(state, chain, v, y_prev, table, p);
        const Tensor scores = log_softmax(logits);
        const std::vector<double>& lp = scores.value();
        std::size_t best = 0;
        for (std::size_t tok = 1; tok < lp.size(); ++tok)
            if (lp[tok] > lp[best]) best = tok;
        result.tokens.push_back(static_cast<int>(best));
        total += lp[best];
        state = next;
        y_prev = static_cast<int>(best);
        if (y_prev == Vocabulary::kEos) break;
    }
    result.score = total / static_cast<double>(result.tokens.size());
    result.final_state = state;
    return result;
}

} // namespace dmn
