#include "dmn/bleu.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "dmn/error.hpp"

namespace dmn {

namespace {

using NgramCounts = std::map<std::vector<std::string>, std::size_t>;

NgramCounts count_ngrams(const std::vector<std::string>& tokens, std::size_t n) {
    NgramCounts counts;
    if (tokens.size() < n) return counts;
    for (std::size_t i = 0; i + n <= tokens.size(); ++i)
        counts[std::vector<std::string>(tokens.begin() + i, tokens.begin() + i + n)] += 1;
    return counts;
}

} // namespace

BleuScores corpus_bleu(const std::vector<std::vector<std::string>>& candidates,
                       const std::vector<std::vector<std::string>>& references) {
    if (candidates.empty()) throw InputError("corpus_bleu: no candidates");
    if (candidates.size() != references.size())
        throw InputError("corpus_bleu: " + std::to_string(candidates.size()) +
                         " candidates against " + std::to_string(references.size()) +
                         " references");

    BleuScores out;
    std::array<std::size_t, 4> matched{};
    std::array<std::size_t, 4> total{};
    for (std::size_t s = 0; s < candidates.size(); ++s) {
        out.candidate_length += candidates[s].size();
        out.reference_length += references[s].size();
        for (std::size_t n = 1; n <= 4; ++n) {
            NgramCounts cand = count_ngrams(candidates[s], n);
            NgramCounts ref = count_ngrams(references[s], n);
            for (const auto& [gram, count] : cand) {
                total[n - 1] += count;
                const auto hit = ref.find(gram);
                if (hit != ref.end()) matched[n - 1] += std::min(count, hit->second);
            }
        }
    }

    const double c = static_cast<double>(out.candidate_length);
    const double r = static_cast<double>(out.reference_length);
    out.brevity_penalty = (c < r && c > 0.0) ? std::exp(1.0 - r / c) : 1.0;

    for (std::size_t n = 1; n <= 4; ++n) {
        double num = static_cast<double>(matched[n - 1]);
        double den = static_cast<double>(total[n - 1]);
        if (n >= 2 && matched[n - 1] == 0) {
            num += 1.0;
            den += 1.0;
        }
        out.precision[n - 1] = den > 0.0 ? num / den : 0.0;
    }

    for (std::size_t k = 1; k <= 4; ++k) {
        bool zero = false;
        double log_sum = 0.0;
        for (std::size_t n = 1; n <= k; ++n) {
            if (out.precision[n - 1] <= 0.0) {
                zero = true;
                break;
            }
            log_sum += std::log(out.precision[n - 1]);
        }
        out.bleu[k - 1] =
            zero ? 0.0 : out.brevity_penalty * std::exp(log_sum / static_cast<double>(k));
    }
    return out;
}

} // namespace dmn
