#pragma once

#include <random>
#include <string>
#include <vector>

#include "dmn/encoders.hpp"
#include "dmn/params.hpp"
#include "dmn/tensor.hpp"

namespace dmn {

// Answer generator: an LSTM whose input at every step is the previous
// answer's terminal hidden state, the fused context, and the embedding of
// the previous token; logits are an affine readout of the hidden state.

struct DecoderParams {
    LstmParams lstm; // input dim = 2*hidden + embedding dim
    Tensor w_out;    // [vocab x hidden]
    Tensor b_out;    // [vocab]
};

DecoderParams make_decoder_params(ParamSet& ps, const std::string& prefix, std::size_t hidden,
                                  std::size_t emb_dim, std::size_t vocab,
                                  std::mt19937_64& rng);

struct DecoderState {
    Tensor h;
    Tensor c;
    int step = 0;
};

DecoderState initial_decoder_state(std::size_t hidden);

// Dialogue chain: terminal decoder hidden state of the previous answer in
// the same dialogue; the zero vector for the first question.
struct ChainState {
    Tensor s_prev_final; // [hidden]
    int question_index = 1;
};

ChainState initial_chain(std::size_t hidden);

std::pair<DecoderState, Tensor> decode_step(const DecoderState& state, const ChainState& chain,
                                            const Tensor& v, int y_prev,
                                            const EmbeddingTable& table,
                                            const DecoderParams& p);

struct DecodeResult {
    std::vector<Tensor> step_logits; // one [vocab] row per predicted token
    DecoderState final_state;
};

// Teacher forcing over a [BOS ... EOS]-framed target; produces target-size
// minus one prediction steps. final_state feeds the next question's chain.
DecodeResult decode_teacher_forced(const ChainState& chain, const Tensor& v,
                                   const std::vector<int>& target, const EmbeddingTable& table,
                                   const DecoderParams& p);

struct BeamHypothesis {
    std::vector<int> tokens; // generated ids, terminal EOS included when completed
    double log_prob = 0.0;   // total log-probability
    DecoderState state;
    bool complete = false;
    int completed_step = 0; // step at which EOS appeared (max_len if truncated)
};

struct BeamSearchResult {
    std::vector<int> tokens; // winning sequence (EOS included when present)
    double score = 0.0;      // length-normalized log-probability
    DecoderState final_state;
    // Alive pool after every expansion step, sorted by descending total
    // log-probability (exposed for invariant checks).
    std::vector<std::vector<BeamHypothesis>> step_pools;
};

// Highest length-normalized log-probability hypothesis; ties prefer earlier
// completion, then the lexicographically smallest token sequence.
BeamSearchResult beam_search(const ChainState& chain, const Tensor& v,
                             const EmbeddingTable& table, const DecoderParams& p, int width,
                             int max_len);

// Step-wise argmax decoding (first index wins ties); stops at EOS or max_len.
BeamSearchResult greedy_decode(const ChainState& chain, const Tensor& v,
                               const EmbeddingTable& table, const DecoderParams& p, int max_len);

} // namespace dmn
