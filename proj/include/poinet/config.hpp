#pragma once

#include <cstdint>
#include <string>

#include "poinet/errors.hpp"
#include "poinet/pos.hpp"

namespace poinet {

enum class Strategy { average, weighted, forgetting, intuition };

inline std::string strategy_name(Strategy s) {
    switch (s) {
        case Strategy::average: return "average";
        case Strategy::weighted: return "weighted";
        case Strategy::forgetting: return "forgetting";
        case Strategy::intuition: return "intuition";
    }
    throw ConfigError("strategy_name: bad enum");
}

inline Strategy strategy_from_name(const std::string& name) {
    if (name == "average") return Strategy::average;
    if (name == "weighted") return Strategy::weighted;
    if (name == "forgetting") return Strategy::forgetting;
    if (name == "intuition") return Strategy::intuition;
    throw ConfigError("unknown strategy \"" + name +
                      "\" (expected average|weighted|forgetting|intuition)");
}

struct ModelConfig {
    std::size_t hidden_size = 32;
    std::size_t vocab_size = 0; // filled in once the subword vocabulary is built
    std::size_t max_positions = 64;
    std::size_t n_segments = 2;
    std::size_t n_pos_tags = kPosTagCount;
    std::size_t encoder_layers = 2;
    std::size_t encoder_heads = 4;
    std::size_t max_turns = 3;
    Strategy strategy = Strategy::forgetting;
    bool use_pos_embedding = true;
    std::uint64_t seed = 42;

    std::size_t ffn_hidden() const { return 4 * hidden_size; }
    std::size_t head_dim() const { return hidden_size / encoder_heads; }

    void validate() const {
        if (hidden_size == 0) throw ConfigError("hidden_size must be positive");
        if (encoder_heads == 0 || hidden_size % encoder_heads != 0) {
            throw ConfigError("hidden_size must be divisible by encoder_heads");
        }
        if (n_pos_tags != kPosTagCount) {
            throw ConfigError("n_pos_tags must be " + std::to_string(kPosTagCount));
        }
        if (n_segments != 2) throw ConfigError("n_segments must be 2");
        if (max_positions < 4) throw ConfigError("max_positions too small");
        if (vocab_size == 0) throw ConfigError("vocab_size not set");
    }
};

} // namespace poinet
