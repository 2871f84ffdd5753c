#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "dmn/tensor.hpp"

namespace dmn {

// Ordered registry of named trainable tensors. Creation order is the
// canonical order used by the optimizer state and the checkpoint file, so
// runs with the same seed and architecture are reproducible bit for bit.
class ParamSet {
  public:
    // Uniform init in [-1/sqrt(fan_in), 1/sqrt(fan_in)]; fan_in = 0 means
    // start at zero (used for initial recurrent states).
    Tensor create(const std::string& name, std::vector<std::size_t> shape, std::size_t fan_in,
                  std::mt19937_64& rng);

    bool contains(const std::string& name) const;
    Tensor at(const std::string& name) const;
    std::size_t count() const { return items_.size(); }
    std::size_t total_elements() const;

    const std::vector<std::pair<std::string, Tensor>>& items() const { return items_; }

    void zero_grad();

  private:
    std::vector<std::pair<std::string, Tensor>> items_;
    std::unordered_map<std::string, std::size_t> index_;
};

// Binary checkpoint: magic "DMNW", format version byte, then a count-prefixed
// flat archive of (name, shape, little-endian float64 payload) records.
void save_checkpoint(const ParamSet& params, const std::string& path);

// Loads values into an existing ParamSet. Every parameter in the set must be
// present in the file with a matching shape; extra records in the file are an
// error too, so architecture mismatches are caught loudly.
void load_checkpoint(ParamSet& params, const std::string& path);

} // namespace dmn
