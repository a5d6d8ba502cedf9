#pragma once

// Ties the stages together: embed → encode → iterative co-attention →
// integration → heads, plus the versioned JSON checkpoint container.

#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "poinet/coattention.hpp"
#include "poinet/config.hpp"
#include "poinet/data.hpp"
#include "poinet/encoder.hpp"
#include "poinet/heads.hpp"
#include "poinet/integration.hpp"

namespace poinet {

struct Model {
    ModelConfig config;
    WordpieceVocab vocab;
    ModelParams params;

    Model() = default;
    Model(ModelConfig cfg, WordpieceVocab v) : config(cfg), vocab(std::move(v)) {
        config.vocab_size = vocab.size();
        params = ModelParams(config);
    }
};

// Final representation R for one assembled sequence. T == 0 bypasses the
// interaction entirely (R is the encoder output), matching the
// zero-iteration baseline.
inline Var forward_repr(Tape& tape, const TokenizedInput& input, const BoundParams& bound,
                        const ModelConfig& config, AttentionTrace* trace_out = nullptr) {
    Var e = embed(tape, input, bound, config);
    Var encoded = encode_context(tape, e, input.split.non_pad, bound, config);
    if (config.max_turns == 0) return encoded;
    const CoAttentionVars vars =
        run_iterations(tape, encoded, input.split, config.max_turns, trace_out);
    return blend(tape, vars, encoded, input.split, config.strategy);
}

inline SpanDistVars forward_extractive(Tape& tape, const TokenizedInput& input,
                                       const BoundParams& bound, const ModelConfig& config,
                                       AttentionTrace* trace_out = nullptr) {
    Var r = forward_repr(tape, input, bound, config, trace_out);
    return span_distributions(tape, r, input.split.non_pad, bound);
}

inline Var forward_choice(Tape& tape, const ChoiceInstance& inst, const BoundParams& bound,
                          const ModelConfig& config) {
    std::vector<Var> logits;
    logits.reserve(inst.inputs.size());
    for (const TokenizedInput& input : inst.inputs) {
        Var r = forward_repr(tape, input, bound, config);
        logits.push_back(option_logit(tape, r, input.split.non_pad, bound));
    }
    return option_probabilities(tape, logits);
}

// plain evaluation entry points (fresh throwaway tape per call)

inline std::pair<Vector, Vector> predict_span_distributions(const Model& model,
                                                            const TokenizedInput& input,
                                                            AttentionTrace* trace_out = nullptr) {
    Tape tape;
    BoundParams bound = bind_params(tape, model.params);
    const SpanDistVars dist = forward_extractive(tape, input, bound, model.config, trace_out);
    return {Vector(tape.val(dist.start).data), Vector(tape.val(dist.end).data)};
}

inline Vector predict_choice_probabilities(const Model& model, const ChoiceInstance& inst) {
    Tape tape;
    BoundParams bound = bind_params(tape, model.params);
    return Vector(tape.val(forward_choice(tape, inst, bound, model.config)).data);
}

// ---- checkpoint container ----

inline constexpr int kCheckpointVersion = 1;

inline nlohmann::json config_to_json(const ModelConfig& c) {
    return {{"hidden_size", c.hidden_size},
            {"vocab_size", c.vocab_size},
            {"max_positions", c.max_positions},
            {"n_segments", c.n_segments},
            {"n_pos_tags", c.n_pos_tags},
            {"encoder_layers", c.encoder_layers},
            {"encoder_heads", c.encoder_heads},
            {"max_turns", c.max_turns},
            {"strategy", strategy_name(c.strategy)},
            {"use_pos_embedding", c.use_pos_embedding},
            {"seed", c.seed}};
}

inline ModelConfig config_from_json(const nlohmann::json& j) {
    ModelConfig c;
    c.hidden_size = j.at("hidden_size").get<std::size_t>();
    c.vocab_size = j.at("vocab_size").get<std::size_t>();
    c.max_positions = j.at("max_positions").get<std::size_t>();
    c.n_segments = j.at("n_segments").get<std::size_t>();
    c.n_pos_tags = j.at("n_pos_tags").get<std::size_t>();
    c.encoder_layers = j.at("encoder_layers").get<std::size_t>();
    c.encoder_heads = j.at("encoder_heads").get<std::size_t>();
    c.max_turns = j.at("max_turns").get<std::size_t>();
    c.strategy = strategy_from_name(j.at("strategy").get<std::string>());
    c.use_pos_embedding = j.at("use_pos_embedding").get<bool>();
    c.seed = j.at("seed").get<std::uint64_t>();
    return c;
}

inline nlohmann::json checkpoint_to_json(const Model& model) {
    nlohmann::json tensors = nlohmann::json::object();
    model.params.visit([&](const char*, const std::string& name, const Matrix& m) {
        tensors[name] = {{"rows", m.rows}, {"cols", m.cols}, {"data", m.data}};
    });
    return {{"format_version", kCheckpointVersion},
            {"config", config_to_json(model.config)},
            {"vocab", model.vocab.pieces()},
            {"tensors", tensors}};
}

inline Model checkpoint_from_json(const nlohmann::json& j) {
    if (!j.contains("format_version") || j.at("format_version").get<int>() != kCheckpointVersion) {
        throw ParseError("checkpoint: unsupported format_version");
    }
    const ModelConfig config = config_from_json(j.at("config"));
    const WordpieceVocab vocab =
        WordpieceVocab::from_pieces(j.at("vocab").get<std::vector<std::string>>());
    if (vocab.size() != config.vocab_size) {
        throw ParseError("checkpoint: vocab size " + std::to_string(vocab.size()) +
                         " does not match config vocab_size " +
                         std::to_string(config.vocab_size));
    }
    Model model(config, vocab);
    const nlohmann::json& tensors = j.at("tensors");
    model.params.visit([&](const char*, const std::string& name, Matrix& m) {
        if (!tensors.contains(name)) throw ParseError("checkpoint: missing tensor " + name);
        const nlohmann::json& t = tensors.at(name);
        if (t.at("rows").get<std::size_t>() != m.rows ||
            t.at("cols").get<std::size_t>() != m.cols) {
            throw ParseError("checkpoint: tensor " + name + " shape mismatch vs config");
        }
        m.data = t.at("data").get<std::vector<double>>();
        if (m.data.size() != m.rows * m.cols) {
            throw ParseError("checkpoint: tensor " + name + " data length mismatch");
        }
    });
    std::size_t expected = 0;
    for (const auto& [name, t] : tensors.items()) {
        (void)t;
        ++expected;
    }
    std::size_t have = 0;
    model.params.visit([&](const char*, const std::string&, const Matrix&) { ++have; });
    if (expected != have) throw ParseError("checkpoint: tensor set does not match config");
    return model;
}

inline void save_checkpoint(const Model& model, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write checkpoint: " + path);
    out << checkpoint_to_json(model).dump(2) << '\n';
}

inline Model load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("checkpoint \"" + path + "\": " + e.what());
    }
    return checkpoint_from_json(j);
}

} // namespace poinet
