#pragma once

// Iterative co-attention: each turn pools one domain's (score-scaled)
// embeddings into a concentrated embedding, cosine-scores the other domain's
// original embeddings against it, and min-max normalizes the scores per
// domain. Only the normalized score vectors are carried between turns;
// enhanced embeddings are recomputed as ŝ·E on demand. The mechanism has no
// trainable parameters.

#include <cstddef>
#include <string>
#include <vector>

#include <json.hpp>

#include "poinet/numerics.hpp"
#include "poinet/tape.hpp"

namespace poinet {

struct DomainSplit {
    Mask passage;  // over all N positions
    Mask question; // over all N positions
    Mask non_pad;  // 1 = real token (specials included)

    std::size_t length() const { return non_pad.size(); }

    void validate() const {
        if (passage.size() != question.size() || passage.size() != non_pad.size()) {
            throw DimensionError("DomainSplit: mask length mismatch");
        }
        for (std::size_t i = 0; i < passage.size(); ++i) {
            if (passage[i] && question[i]) {
                throw DimensionError("DomainSplit: domains overlap at " + std::to_string(i));
            }
            if ((passage[i] || question[i]) && !non_pad[i]) {
                throw DimensionError("DomainSplit: domain position " + std::to_string(i) +
                                     " marked as padding");
            }
        }
    }
};

// Full audit record of one co-attention run. Score vectors are stored over
// domain positions in mask order; values are plain doubles mirrored off the
// tape so the trace can be exported without keeping the tape alive.
struct TurnRecord {
    Vector raw_passage;
    Vector raw_question;
    Vector norm_passage;
    Vector norm_question;
    double beta_passage = 1.0;
    double beta_question = 1.0;
    double alpha_passage = 1.0;
    double alpha_question = 1.0;
};

struct AttentionTrace {
    std::vector<TurnRecord> turns;

    std::size_t turn_count() const { return turns.size(); }
    bool empty() const { return turns.empty(); }
};

// Tape handles produced by run_iterations, consumed by the integration
// strategies (gradients flow through scores and coefficients).
struct CoAttentionVars {
    std::vector<Var> raw_passage, raw_question;   // d×1 per turn
    std::vector<Var> norm_passage, norm_question; // d×1 per turn
    std::vector<Var> beta_passage, beta_question; // 1×1 per turn
    std::vector<Var> alpha_passage, alpha_question;

    std::size_t turn_count() const { return norm_passage.size(); }
};

// ---- plain (untaped) path ----

// Column-wise max over one domain; the domain summary CE ∈ R^H.
inline Vector concentrate(const Matrix& enhanced, const Mask& domain_mask) {
    return max_pool_rows(enhanced, domain_mask);
}

struct TurnResult {
    Vector raw_passage, raw_question;
    Vector norm_passage, norm_question;
    Matrix enhanced; // ŝ^t · E on domain rows, passthrough elsewhere
};

namespace detail {

inline Vector cosine_against(const Matrix& e, const Mask& domain, const Vector& ce) {
    Vector out;
    for (std::size_t r = 0; r < e.rows; ++r) {
        if (domain[r]) out.data.push_back(cosine_rows(e, r, ce));
    }
    if (out.empty()) throw EmptyDomainError("co-attention: empty domain");
    return out;
}

inline void scale_domain_rows(Matrix& m, const Mask& domain, const Vector& scales) {
    std::size_t k = 0;
    for (std::size_t r = 0; r < m.rows; ++r) {
        if (!domain[r]) continue;
        double* p = m.row_ptr(r);
        for (std::size_t c = 0; c < m.cols; ++c) p[c] *= scales[k];
        ++k;
    }
}

// CE computed directly from (ŝ^{t-1}, E) without materializing E^{t-1}.
inline Vector concentrate_scored(const Matrix& e, const Mask& domain, const Vector& prev_norm) {
    Vector out(e.cols, -std::numeric_limits<double>::infinity());
    std::size_t k = 0;
    bool any = false;
    for (std::size_t r = 0; r < e.rows; ++r) {
        if (!domain[r]) continue;
        any = true;
        const double s = prev_norm.empty() ? 1.0 : prev_norm[k];
        const double* p = e.row_ptr(r);
        for (std::size_t c = 0; c < e.cols; ++c) {
            const double v = prev_norm.empty() ? p[c] : s * p[c];
            if (v > out[c]) out[c] = v;
        }
        ++k;
    }
    if (!any) throw EmptyDomainError("co-attention: empty domain");
    return out;
}

} // namespace detail

// One interaction turn given the previous turn's enhanced embeddings
// (prev_enhanced == E for the preliminary turn). Cosine arguments are always
// rows of the original E; non-domain rows of the result pass through.
inline TurnResult interaction_turn(const Matrix& e, const Matrix& prev_enhanced,
                                   const DomainSplit& split, std::size_t turn) {
    if (turn < 1) throw InputError("interaction_turn: turn must be >= 1");
    if (!e.same_shape(prev_enhanced)) throw DimensionError("interaction_turn: shape mismatch");
    TurnResult res;
    const Vector ce_q = concentrate(prev_enhanced, split.question);
    const Vector ce_p = concentrate(prev_enhanced, split.passage);
    res.raw_passage = detail::cosine_against(e, split.passage, ce_q);
    res.raw_question = detail::cosine_against(e, split.question, ce_p);
    res.norm_passage = min_max_scale(res.raw_passage);
    res.norm_question = min_max_scale(res.raw_question);
    res.enhanced = e;
    detail::scale_domain_rows(res.enhanced, split.passage, res.norm_passage);
    detail::scale_domain_rows(res.enhanced, split.question, res.norm_question);
    return res;
}

// Runs the preliminary interaction plus turns 2..T storing only the
// normalized score vectors between turns. T == 0 yields an empty trace
// (downstream representation falls back to E).
inline AttentionTrace run_iterations_plain(const Matrix& e, const DomainSplit& split,
                                           std::size_t max_turns) {
    split.validate();
    AttentionTrace trace;
    Vector prev_norm_p, prev_norm_q; // empty on the first turn
    double alpha_p = 1.0, alpha_q = 1.0;
    for (std::size_t t = 1; t <= max_turns; ++t) {
        TurnRecord rec;
        const Vector ce_q = detail::concentrate_scored(e, split.question, prev_norm_q);
        const Vector ce_p = detail::concentrate_scored(e, split.passage, prev_norm_p);
        rec.raw_passage = detail::cosine_against(e, split.passage, ce_q);
        rec.raw_question = detail::cosine_against(e, split.question, ce_p);
        rec.norm_passage = min_max_scale(rec.raw_passage);
        rec.norm_question = min_max_scale(rec.raw_question);
        if (t == 1) {
            rec.beta_passage = 1.0; // s^0 ≡ 1 ⇒ β^1 = (1+1)/2
            rec.beta_question = 1.0;
        } else {
            const TurnRecord& prev = trace.turns.back();
            rec.beta_passage =
                (*std::max_element(prev.raw_question.data.begin(), prev.raw_question.data.end()) +
                 1.0) * 0.5;
            rec.beta_question =
                (*std::max_element(prev.raw_passage.data.begin(), prev.raw_passage.data.end()) +
                 1.0) * 0.5;
        }
        alpha_p *= rec.beta_passage;
        alpha_q *= rec.beta_question;
        rec.alpha_passage = alpha_p;
        rec.alpha_question = alpha_q;
        prev_norm_p = rec.norm_passage;
        prev_norm_q = rec.norm_question;
        trace.turns.push_back(std::move(rec));
    }
    return trace;
}

// ---- taped path (training / gradient flow) ----

inline CoAttentionVars run_iterations(Tape& tape, Var e, const DomainSplit& split,
                                      std::size_t max_turns, AttentionTrace* trace_out = nullptr) {
    split.validate();
    CoAttentionVars vars;
    Var alpha_p, alpha_q;
    for (std::size_t t = 1; t <= max_turns; ++t) {
        Var pooled_src_q = e, pooled_src_p = e;
        if (t > 1) {
            pooled_src_q = tape.row_scale_subset(e, vars.norm_question[t - 2], split.question);
            pooled_src_p = tape.row_scale_subset(e, vars.norm_passage[t - 2], split.passage);
        }
        const Var ce_q = tape.masked_max_pool(pooled_src_q, split.question);
        const Var ce_p = tape.masked_max_pool(pooled_src_p, split.passage);
        const Var raw_p = tape.cosine_vs_row(e, ce_q, split.passage);
        const Var raw_q = tape.cosine_vs_row(e, ce_p, split.question);
        const Var norm_p = tape.minmax_scale(raw_p);
        const Var norm_q = tape.minmax_scale(raw_q);
        Var beta_p, beta_q;
        if (t == 1) {
            beta_p = tape.scalar(1.0);
            beta_q = tape.scalar(1.0);
        } else {
            beta_p = tape.scale(tape.add_scalar(tape.max_entry(vars.raw_question[t - 2]), 1.0), 0.5);
            beta_q = tape.scale(tape.add_scalar(tape.max_entry(vars.raw_passage[t - 2]), 1.0), 0.5);
        }
        alpha_p = (t == 1) ? beta_p : tape.mul(alpha_p, beta_p);
        alpha_q = (t == 1) ? beta_q : tape.mul(alpha_q, beta_q);
        vars.raw_passage.push_back(raw_p);
        vars.raw_question.push_back(raw_q);
        vars.norm_passage.push_back(norm_p);
        vars.norm_question.push_back(norm_q);
        vars.beta_passage.push_back(beta_p);
        vars.beta_question.push_back(beta_q);
        vars.alpha_passage.push_back(alpha_p);
        vars.alpha_question.push_back(alpha_q);
        if (trace_out) {
            TurnRecord rec;
            rec.raw_passage = Vector(tape.val(raw_p).data);
            rec.raw_question = Vector(tape.val(raw_q).data);
            rec.norm_passage = Vector(tape.val(norm_p).data);
            rec.norm_question = Vector(tape.val(norm_q).data);
            rec.beta_passage = tape.scalar_val(beta_p);
            rec.beta_question = tape.scalar_val(beta_q);
            rec.alpha_passage = tape.scalar_val(alpha_p);
            rec.alpha_question = tape.scalar_val(alpha_q);
            trace_out->turns.push_back(std::move(rec));
        }
    }
    return vars;
}

// JSON export consumed by the CLI heatmap dump: one record per turn per
// domain with keys turn/domain/raw/normalized/beta/alpha.
inline nlohmann::json trace_to_json(const AttentionTrace& trace) {
    nlohmann::json out = nlohmann::json::array();
    for (std::size_t t = 0; t < trace.turns.size(); ++t) {
        const TurnRecord& rec = trace.turns[t];
        out.push_back({{"turn", t + 1},
                       {"domain", "passage"},
                       {"raw", rec.raw_passage.data},
                       {"normalized", rec.norm_passage.data},
                       {"beta", rec.beta_passage},
                       {"alpha", rec.alpha_passage}});
        out.push_back({{"turn", t + 1},
                       {"domain", "question"},
                       {"raw", rec.raw_question.data},
                       {"normalized", rec.norm_question.data},
                       {"beta", rec.beta_question},
                       {"alpha", rec.alpha_question}});
    }
    return out;
}

} // namespace poinet
