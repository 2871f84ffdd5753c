#pragma once

#include <random>
#include <string>
#include <vector>

#include "dmn/params.hpp"
#include "dmn/tensor.hpp"

namespace dmn {

enum class FusionMode { literal, question_gated };

FusionMode parse_fusion_mode(const std::string& name); // ConfigError on unknown
const char* fusion_mode_name(FusionMode m);

struct FusionResult {
    Tensor beta; // [modalities x hidden]; each column sums to 1
    Tensor v;    // [hidden]
};

// Parameter-free fusion: per-dimension softmax across the modality contexts
// of the context values themselves, v[k] = sum_j beta[j][k] * C_j[k].
FusionResult fuse(const std::vector<Tensor>& contexts);

// Question-conditioned variant: one scalar score per modality from
// w . tanh(W [C_j ; q] + b) + b, softmaxed across modalities; beta repeats
// the scalar weight across dimensions.
struct FusionParams {
    Tensor w_hidden; // [a x 2h]
    Tensor b_hidden; // [a]
    Tensor w_score;  // [1 x a]
    Tensor b_score;  // [1]
};

FusionParams make_fusion_params(ParamSet& ps, const std::string& prefix, std::size_t hidden,
                                std::size_t attn, std::mt19937_64& rng);

FusionResult fuse_question_gated(const std::vector<Tensor>& contexts, const Tensor& q,
                                 const FusionParams& p);

} // namespace dmn
