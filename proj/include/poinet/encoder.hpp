#pragma once

// POS-enhanced input embedding E = Norm(E_t + E_s + E_p + E_POS) and a small
// trainable pre-norm transformer standing in for the pretrained encoder.
// ModelParams enumerates every trainable tensor in a fixed order so that
// initialization, checkpointing, optimizer state and parameter accounting all
// agree.

#include <cstdint>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "poinet/config.hpp"
#include "poinet/data.hpp"
#include "poinet/numerics.hpp"
#include "poinet/tape.hpp"

namespace poinet {

struct EmbeddingTables {
    Matrix token;    // vocab_size × H
    Matrix segment;  // 2 × H
    Matrix position; // N_max × H
    Matrix pos_tag;  // 39 × H, absent when the POS embedding is disabled
    Matrix norm_gain; // 1 × H
    Matrix norm_bias; // 1 × H
};

struct EncoderLayerParams {
    Matrix ln1_gain, ln1_bias;
    Matrix wq, bq, wk, bk, wv, bv, wo, bo;
    Matrix ln2_gain, ln2_bias;
    Matrix ffn_w1, ffn_b1, ffn_w2, ffn_b2;
};

struct HeadParams {
    Matrix choice_w; // H × 1
    Matrix choice_b; // 1 × 1
    Matrix span_w;   // H × 2
    Matrix span_b;   // 1 × 2
};

class ModelParams {
public:
    ModelParams() = default;

    explicit ModelParams(const ModelConfig& config) {
        config.validate();
        const std::size_t h = config.hidden_size;
        use_pos_embedding_ = config.use_pos_embedding;
        embeddings_.token = Matrix(config.vocab_size, h);
        embeddings_.segment = Matrix(config.n_segments, h);
        embeddings_.position = Matrix(config.max_positions, h);
        if (use_pos_embedding_) embeddings_.pos_tag = Matrix(config.n_pos_tags, h);
        embeddings_.norm_gain = Matrix(1, h);
        embeddings_.norm_bias = Matrix(1, h);
        layers_.resize(config.encoder_layers);
        for (auto& l : layers_) {
            l.ln1_gain = Matrix(1, h);
            l.ln1_bias = Matrix(1, h);
            l.wq = Matrix(h, h);
            l.bq = Matrix(1, h);
            l.wk = Matrix(h, h);
            l.bk = Matrix(1, h);
            l.wv = Matrix(h, h);
            l.bv = Matrix(1, h);
            l.wo = Matrix(h, h);
            l.bo = Matrix(1, h);
            l.ln2_gain = Matrix(1, h);
            l.ln2_bias = Matrix(1, h);
            l.ffn_w1 = Matrix(h, config.ffn_hidden());
            l.ffn_b1 = Matrix(1, config.ffn_hidden());
            l.ffn_w2 = Matrix(config.ffn_hidden(), h);
            l.ffn_b2 = Matrix(1, h);
        }
        heads_.choice_w = Matrix(h, 1);
        heads_.choice_b = Matrix(1, 1);
        heads_.span_w = Matrix(h, 2);
        heads_.span_b = Matrix(1, 2);
        init_weights(config.seed);
    }

    EmbeddingTables& embeddings() { return embeddings_; }
    const EmbeddingTables& embeddings() const { return embeddings_; }
    std::vector<EncoderLayerParams>& encoder_layers() { return layers_; }
    const std::vector<EncoderLayerParams>& encoder_layers() const { return layers_; }
    HeadParams& heads() { return heads_; }
    const HeadParams& heads() const { return heads_; }
    bool has_pos_table() const { return use_pos_embedding_; }

    // Fixed enumeration order: embedding tables, encoder layers, heads.
    // The co-attention and integration stages contribute no entries.
    template <class F>
    void visit(F&& f) {
        f("embedding", "emb.token", embeddings_.token);
        f("embedding", "emb.segment", embeddings_.segment);
        f("embedding", "emb.position", embeddings_.position);
        if (use_pos_embedding_) f("embedding", "emb.pos_tag", embeddings_.pos_tag);
        f("embedding", "emb.norm_gain", embeddings_.norm_gain);
        f("embedding", "emb.norm_bias", embeddings_.norm_bias);
        for (std::size_t i = 0; i < layers_.size(); ++i) {
            const std::string p = "enc." + std::to_string(i) + ".";
            EncoderLayerParams& l = layers_[i];
            f("encoder", p + "ln1_gain", l.ln1_gain);
            f("encoder", p + "ln1_bias", l.ln1_bias);
            f("encoder", p + "wq", l.wq);
            f("encoder", p + "bq", l.bq);
            f("encoder", p + "wk", l.wk);
            f("encoder", p + "bk", l.bk);
            f("encoder", p + "wv", l.wv);
            f("encoder", p + "bv", l.bv);
            f("encoder", p + "wo", l.wo);
            f("encoder", p + "bo", l.bo);
            f("encoder", p + "ln2_gain", l.ln2_gain);
            f("encoder", p + "ln2_bias", l.ln2_bias);
            f("encoder", p + "ffn_w1", l.ffn_w1);
            f("encoder", p + "ffn_b1", l.ffn_b1);
            f("encoder", p + "ffn_w2", l.ffn_w2);
            f("encoder", p + "ffn_b2", l.ffn_b2);
        }
        f("heads", "head.choice_w", heads_.choice_w);
        f("heads", "head.choice_b", heads_.choice_b);
        f("heads", "head.span_w", heads_.span_w);
        f("heads", "head.span_b", heads_.span_b);
    }

    template <class F>
    void visit(F&& f) const {
        const_cast<ModelParams*>(this)->visit(
            [&](const char* component, const std::string& name, Matrix& m) {
                f(component, name, static_cast<const Matrix&>(m));
            });
    }

    std::size_t parameter_count() const {
        std::size_t total = 0;
        visit([&](const char*, const std::string&, const Matrix& m) { total += m.data.size(); });
        return total;
    }

    // embedding / encoder / coattention / heads → scalar counts
    std::map<std::string, std::size_t> parameter_breakdown() const {
        std::map<std::string, std::size_t> out{
            {"embedding", 0}, {"encoder", 0}, {"coattention", 0}, {"heads", 0}};
        visit([&](const char* component, const std::string&, const Matrix& m) {
            out[component] += m.data.size();
        });
        return out;
    }

private:
    EmbeddingTables embeddings_;
    std::vector<EncoderLayerParams> layers_;
    HeadParams heads_;
    bool use_pos_embedding_ = true;

    // normal(0, 0.02) for weight matrices and embedding tables; layer-norm
    // gains start at 1 and every single-row tensor (biases, gains) otherwise
    // at 0
    void init_weights(std::uint64_t seed) {
        std::mt19937_64 rng(mix_seed(seed, 0x1417));
        std::normal_distribution<double> normal(0.0, 0.02);
        visit([&](const char*, const std::string& name, Matrix& m) {
            if (name.find("gain") != std::string::npos) {
                std::fill(m.data.begin(), m.data.end(), 1.0);
            } else if (m.rows == 1) {
                std::fill(m.data.begin(), m.data.end(), 0.0);
            } else {
                for (double& v : m.data) v = normal(rng);
            }
        });
    }
};

// per-tape handles for every parameter tensor, bound in visit order
struct BoundParams {
    std::vector<Var> vars;
    std::vector<std::string> names;
    std::unordered_map<std::string, std::size_t> index;

    Var operator[](const std::string& name) const {
        const auto it = index.find(name);
        if (it == index.end()) throw LookupError("BoundParams: no tensor \"" + name + "\"");
        return vars[it->second];
    }
};

inline BoundParams bind_params(Tape& tape, const ModelParams& params) {
    BoundParams bound;
    params.visit([&](const char*, const std::string& name, const Matrix& m) {
        bound.index[name] = bound.vars.size();
        bound.vars.push_back(tape.leaf(m));
        bound.names.push_back(name);
    });
    return bound;
}

// E = Norm(E_t + E_s + E_p + E_POS) per position; with the POS table disabled
// the sum falls back to the three-term baseline embedding.
inline Var embed(Tape& tape, const TokenizedInput& input, const BoundParams& bound,
                 const ModelConfig& config) {
    std::vector<std::size_t> tag_ids(input.tags.size());
    for (std::size_t i = 0; i < input.tags.size(); ++i) tag_ids[i] = tag_id(input.tags[i]);
    Var sum = tape.add(tape.gather_rows(bound["emb.token"], input.subword_ids),
                       tape.gather_rows(bound["emb.segment"], input.segment_ids));
    sum = tape.add(sum, tape.gather_rows(bound["emb.position"], input.position_ids));
    if (config.use_pos_embedding) {
        sum = tape.add(sum, tape.gather_rows(bound["emb.pos_tag"], tag_ids));
    }
    return tape.layer_norm_rows(sum, bound["emb.norm_gain"], bound["emb.norm_bias"], 1e-12);
}

// Pre-norm transformer stack; an empty stack is the identity. PAD positions
// are masked out of the attention keys so they cannot influence real tokens.
inline Var encode_context(Tape& tape, Var e, const Mask& non_pad, const BoundParams& bound,
                          const ModelConfig& config) {
    const std::size_t h = config.hidden_size;
    const std::size_t dh = config.head_dim();
    const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));
    Var x = e;
    for (std::size_t layer = 0; layer < config.encoder_layers; ++layer) {
        const std::string p = "enc." + std::to_string(layer) + ".";
        Var xn = tape.layer_norm_rows(x, bound[p + "ln1_gain"], bound[p + "ln1_bias"], 1e-12);
        Var q = tape.add_row(tape.matmul(xn, bound[p + "wq"]), bound[p + "bq"]);
        Var k = tape.add_row(tape.matmul(xn, bound[p + "wk"]), bound[p + "bk"]);
        Var v = tape.add_row(tape.matmul(xn, bound[p + "wv"]), bound[p + "bv"]);
        std::vector<Var> head_outputs;
        for (std::size_t head = 0; head < config.encoder_heads; ++head) {
            const std::size_t c0 = head * dh, c1 = (head + 1) * dh;
            Var qh = tape.slice_cols(q, c0, c1);
            Var kh = tape.slice_cols(k, c0, c1);
            Var vh = tape.slice_cols(v, c0, c1);
            Var scores = tape.scale(tape.matmul_nt(qh, kh), inv_sqrt_dh);
            Var attn = tape.softmax_rows_masked(scores, non_pad);
            head_outputs.push_back(tape.matmul(attn, vh));
        }
        Var ctx = (head_outputs.size() == 1) ? head_outputs[0] : tape.concat_cols(head_outputs);
        Var attn_out = tape.add_row(tape.matmul(ctx, bound[p + "wo"]), bound[p + "bo"]);
        x = tape.add(x, attn_out);
        Var xn2 = tape.layer_norm_rows(x, bound[p + "ln2_gain"], bound[p + "ln2_bias"], 1e-12);
        Var ff1 = tape.gelu(tape.add_row(tape.matmul(xn2, bound[p + "ffn_w1"]),
                                         bound[p + "ffn_b1"]));
        Var ff2 = tape.add_row(tape.matmul(ff1, bound[p + "ffn_w2"]), bound[p + "ffn_b2"]);
        x = tape.add(x, ff2);
    }
    (void)h;
    return x;
}

// plain convenience wrappers (evaluation paths reuse the taped kernels)

inline Matrix embed_plain(const TokenizedInput& input, const ModelParams& params,
                          const ModelConfig& config) {
    Tape tape;
    BoundParams bound = bind_params(tape, params);
    return tape.val(embed(tape, input, bound, config));
}

inline Matrix encode_context_plain(const Matrix& e, const Mask& non_pad,
                                   const ModelParams& params, const ModelConfig& config) {
    Tape tape;
    BoundParams bound = bind_params(tape, params);
    return tape.val(encode_context(tape, tape.leaf(e), non_pad, bound, config));
}

} // namespace poinet
