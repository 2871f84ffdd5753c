#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

namespace dmn {

// Corpus-level BLEU with a single reference per candidate. N-gram counts are
// pooled over the whole corpus before any ratio is taken. Modified precision
// clips each candidate n-gram count at its reference count. Orders two and
// up apply add-one smoothing only when their clipped match count is zero
// ("add1-zero-only"); order one is never smoothed.
struct BleuScores {
    std::array<double, 4> precision{}; // p1..p4 after smoothing
    std::array<double, 4> bleu{};      // BLEU-1..BLEU-4
    double brevity_penalty = 1.0;      // exp(1 - r/c) when c < r, else 1
    std::size_t candidate_length = 0;
    std::size_t reference_length = 0;
    static constexpr const char* kSmoothing = "add1-zero-only";
};

BleuScores corpus_bleu(const std::vector<std::vector<std::string>>& candidates,
                       const std::vector<std::vector<std::string>>& references);

} // namespace dmn
