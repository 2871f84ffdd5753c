#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dmn/data.hpp"
#include "dmn/decoder.hpp"
#include "dmn/encoders.hpp"
#include "dmn/episodic.hpp"
#include "dmn/fusion.hpp"
#include "dmn/params.hpp"
#include "dmn/text_attention.hpp"

namespace dmn {

struct ModelConfig {
    std::size_t hidden = 64;
    std::size_t emb_dim = 64;
    std::size_t attn = 0; // attention projection width; 0 means same as hidden
    int episodes = 2;
    FusionMode fusion = FusionMode::literal;
    std::size_t vocab_size = 0;
    std::size_t visual_dim = 0;
    std::size_t audio_dim = 0;
};

// Everything computed for one question against one video: the question
// vector, both text attention contexts, both episodic traversals, and the
// fused context the decoder consumes.
struct QuestionContext {
    Tensor q; // [hidden]
    TextContext caption;
    TextContext summary;
    EpisodicState visual;
    EpisodicState audio;
    FusionResult fused;
};

struct PairForward {
    QuestionContext ctx;
    DecodeResult dec;
};

// [BOS answer EOS] framing for decoder targets.
std::vector<int> frame_answer(const std::vector<int>& answer_ids);

class DmnModel {
  public:
    DmnModel(const ModelConfig& cfg, std::uint64_t seed);

    const ModelConfig& config() const { return cfg_; }
    ParamSet& params() { return params_; }
    const ParamSet& params() const { return params_; }

    QuestionContext encode_context(const std::vector<int>& question_ids,
                                   const std::vector<int>& caption_ids,
                                   const std::vector<int>& summary_ids, const Tensor& visual,
                                   const Tensor& audio) const;

    PairForward forward_pair(const std::vector<int>& question_ids,
                             const std::vector<int>& caption_ids,
                             const std::vector<int>& summary_ids, const Tensor& visual,
                             const Tensor& audio, const ChainState& chain,
                             const std::vector<int>& framed_target) const;

    // Beam search for width > 1, argmax roll-out for width 1.
    BeamSearchResult generate(const QuestionContext& ctx, const ChainState& chain, int width,
                              int max_len) const;

    const EmbeddingTable& embedding() const { return emb_; }
    const DecoderParams& decoder() const { return decoder_; }

  private:
    ModelConfig cfg_;
    ParamSet params_;
    EmbeddingTable emb_;
    QuestionEncoderParams question_;
    Tensor q_proj_w_, q_proj_b_;
    LstmParams caption_lstm_, summary_lstm_;
    TextAttentionParams caption_attn_, summary_attn_;
    LstmParams visual_lstm_, audio_lstm_;
    EpisodicParams visual_dmn_, audio_dmn_;
    FusionParams fusion_;
    DecoderParams decoder_;
};

// --- whole-dialogue evaluation ----------------------------------------------

struct EvalOptions {
    int beam_width = 1;
    int max_len = 12;
    bool zero_chain = false;       // sever the answer chain between questions
    bool collect_attention = false;
};

struct PairOutcome {
    std::vector<std::string> question;
    std::vector<std::string> gold;
    std::vector<std::string> generated;
    bool exact = false;
    double score = 0.0; // length-normalized log-probability of the generation
    // Filled when collect_attention is set; gate vectors are episode-major.
    std::vector<std::vector<double>> visual_gates;
    std::vector<std::vector<double>> audio_gates;
    std::vector<double> caption_alpha;
    std::vector<double> summary_alpha;
    std::vector<std::vector<double>> beta; // [modality][dim]
};

// Generates an answer for every question in order, feeding each generated
// answer's terminal decoder state to the next question (or zeros when the
// chain is severed).
std::vector<PairOutcome> evaluate_dialogue(const DmnModel& model, const Vocabulary& vocab,
                                           const LoadedExample& ex, const EvalOptions& opts);

// Fraction of questions whose generated answer matches the reference exactly.
double exact_match_accuracy(const DmnModel& model, const Vocabulary& vocab,
                            const Dataset& dataset, const EvalOptions& opts);

} // namespace dmn
