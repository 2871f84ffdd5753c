#pragma once

#include <random>
#include <string>
#include <utility>
#include <vector>

#include "dmn/params.hpp"
#include "dmn/tensor.hpp"

namespace dmn {

// --- recurrent cells -----------------------------------------------------

// Standard LSTM cell parameters. Pre-activation layout stacks the four gates
// as [input; forget; candidate; output], each of the hidden size.
struct LstmParams {
    Tensor w_ih; // [4h x d_in]
    Tensor w_hh; // [4h x h]
    Tensor bias; // [4h]
};

LstmParams make_lstm_params(ParamSet& ps, const std::string& prefix, std::size_t d_in,
                            std::size_t d_h, std::mt19937_64& rng);

// One LSTM update; both returned tensors stay on the tape.
std::pair<Tensor, Tensor> lstm_cell(const Tensor& x, const Tensor& h, const Tensor& c,
                                    const LstmParams& p);

// --- token embeddings -----------------------------------------------------

struct EmbeddingTable {
    std::size_t vocab_size = 0;
    std::size_t dim = 0;
    Tensor weights; // [vocab_size x dim]
};

EmbeddingTable make_embedding_table(ParamSet& ps, const std::string& name,
                                    std::size_t vocab_size, std::size_t dim,
                                    std::mt19937_64& rng);

Tensor embed_token(const EmbeddingTable& table, int token_id); // out of range -> InputError

// --- question encoding ------------------------------------------------------

struct QuestionEncoderParams {
    LstmParams fwd;
    LstmParams bwd;
};

// Concatenated terminal cell states of a forward and a backward LSTM pass,
// dimension 2h. Consumers project this down to h with a learned affine map.
struct QuestionEmbedding {
    Tensor q; // [2h]
};

QuestionEmbedding encode_question(const std::vector<int>& token_ids, const EmbeddingTable& table,
                                  const QuestionEncoderParams& p);

// --- per-segment facts ------------------------------------------------------

enum class Modality { visual, audio };

const char* modality_name(Modality m);

struct InputFacts {
    Modality modality = Modality::visual;
    Tensor facts; // [N x h], row i is the encoder hidden state at segment i
    std::size_t count = 0;
};

// Unidirectional LSTM over segment feature rows.
InputFacts encode_facts(const Tensor& features, const LstmParams& p, Modality modality);

// Per-token hidden states for caption or summary text; empty input yields a
// single zero state so blank text never crashes training.
Tensor encode_text_states(const std::vector<int>& token_ids, const EmbeddingTable& table,
                          const LstmParams& p);

} // namespace dmn
