#pragma once

// Integration strategies: collapse the per-turn normalized scores into one
// convex per-token scale. Every strategy reduces to explicit per-turn weights
// w^1..w^T summing to 1 per domain; blend applies Σ w^t ŝ^t to E row-wise.
// The weight formulas are written once over an abstract scalar so the plain
// double path and the taped path perform identical arithmetic.

#include <cstddef>
#include <vector>

#include "poinet/coattention.hpp"
#include "poinet/config.hpp"
#include "poinet/numerics.hpp"
#include "poinet/tape.hpp"

namespace poinet {

struct BlendWeights {
    std::vector<double> passage;  // w^1..w^T
    std::vector<double> question;
};

namespace detail {

struct DoubleAlgebra {
    using S = double;
    double constant(double v) const { return v; }
    double add(double a, double b) const { return a + b; }
    double mul(double a, double b) const { return a * b; }
    double div(double a, double b) const { return a / b; }
};

struct TapeAlgebra {
    using S = Var;
    Tape* tape;
    Var constant(double v) const { return tape->scalar(v); }
    Var add(Var a, Var b) const { return tape->add(a, b); }
    Var mul(Var a, Var b) const { return tape->mul(a, b); }
    Var div(Var a, Var b) const { return tape->div_scalar_var(a, b); }
};

// Per-turn convex weights for one domain given that domain's β^1..β^T.
template <class Algebra>
std::vector<typename Algebra::S> strategy_weights(const std::vector<typename Algebra::S>& betas,
                                                  Strategy strategy, const Algebra& alg) {
    using S = typename Algebra::S;
    const std::size_t turns = betas.size();
    if (turns == 0) throw InputError("strategy_weights: empty trace");
    std::vector<S> w;
    w.reserve(turns);
    switch (strategy) {
        case Strategy::average: {
            const S inv = alg.constant(1.0 / static_cast<double>(turns));
            for (std::size_t t = 0; t < turns; ++t) w.push_back(inv);
            break;
        }
        case Strategy::weighted: {
            S denom = betas[0];
            for (std::size_t t = 1; t < turns; ++t) denom = alg.add(denom, betas[t]);
            for (std::size_t t = 0; t < turns; ++t) w.push_back(alg.div(betas[t], denom));
            break;
        }
        case Strategy::forgetting: {
            // b^1 = ŝ^1; b^t = (b^{t-1} + β^{t-1} ŝ^{t-1}) / (1 + β^{t-1});
            // final scale (b^T + β^T ŝ^T) / (1 + β^T), unrolled into weights
            w.assign(turns, alg.constant(0.0));
            std::vector<S> acc(turns, alg.constant(0.0)); // weights of b^t
            acc[0] = alg.constant(1.0);
            for (std::size_t t = 1; t < turns; ++t) {
                const S denom = alg.add(alg.constant(1.0), betas[t - 1]);
                std::vector<S> next(turns, alg.constant(0.0));
                for (std::size_t i = 0; i < t; ++i) next[i] = acc[i];
                next[t - 1] = alg.add(next[t - 1], betas[t - 1]);
                for (std::size_t i = 0; i <= t - 1; ++i) next[i] = alg.div(next[i], denom);
                acc = std::move(next);
            }
            const S denom = alg.add(alg.constant(1.0), betas[turns - 1]);
            for (std::size_t i = 0; i < turns; ++i) w[i] = acc[i];
            w[turns - 1] = alg.add(w[turns - 1], betas[turns - 1]);
            for (std::size_t i = 0; i < turns; ++i) w[i] = alg.div(w[i], denom);
            break;
        }
        case Strategy::intuition: {
            std::vector<S> alphas;
            alphas.reserve(turns);
            S running = betas[0];
            alphas.push_back(running);
            for (std::size_t t = 1; t < turns; ++t) {
                running = alg.mul(running, betas[t]);
                alphas.push_back(running);
            }
            S denom = alphas[0];
            for (std::size_t t = 1; t < turns; ++t) denom = alg.add(denom, alphas[t]);
            for (std::size_t t = 0; t < turns; ++t) w.push_back(alg.div(alphas[t], denom));
            break;
        }
    }
    return w;
}

} // namespace detail

// Exposes the implicit convex per-turn weights of a recorded trace.
inline BlendWeights blend_weights(const AttentionTrace& trace, Strategy strategy) {
    if (trace.empty()) throw InputError("blend_weights: empty trace");
    detail::DoubleAlgebra alg;
    std::vector<double> beta_p, beta_q;
    for (const TurnRecord& rec : trace.turns) {
        beta_p.push_back(rec.beta_passage);
        beta_q.push_back(rec.beta_question);
    }
    BlendWeights out;
    out.passage = detail::strategy_weights(beta_p, strategy, alg);
    out.question = detail::strategy_weights(beta_q, strategy, alg);
    return out;
}

// R = (Σ_t w^t ŝ^t) ⊙ E on domain rows; non-domain rows copy E. Plain-value
// route used by tests and trace tooling.
inline Matrix blend(const AttentionTrace& trace, const Matrix& e, const DomainSplit& split,
                    Strategy strategy) {
    const BlendWeights w = blend_weights(trace, strategy);
    const std::size_t turns = trace.turn_count();
    Vector comb_p(trace.turns[0].norm_passage.size(), 0.0);
    Vector comb_q(trace.turns[0].norm_question.size(), 0.0);
    for (std::size_t t = 0; t < turns; ++t) {
        for (std::size_t i = 0; i < comb_p.size(); ++i) {
            comb_p[i] += w.passage[t] * trace.turns[t].norm_passage[i];
        }
        for (std::size_t i = 0; i < comb_q.size(); ++i) {
            comb_q[i] += w.question[t] * trace.turns[t].norm_question[i];
        }
    }
    Matrix out = e;
    std::size_t kp = 0, kq = 0;
    for (std::size_t r = 0; r < e.rows; ++r) {
        double s = 1.0;
        if (split.passage[r]) {
            s = comb_p[kp++];
        } else if (split.question[r]) {
            s = comb_q[kq++];
        } else {
            continue;
        }
        double* p = out.row_ptr(r);
        for (std::size_t c = 0; c < e.cols; ++c) p[c] *= s;
    }
    return out;
}

// Taped route: same weight arithmetic, gradients flow through ŝ and β.
inline Var blend(Tape& tape, const CoAttentionVars& vars, Var e, const DomainSplit& split,
                 Strategy strategy) {
    const std::size_t turns = vars.turn_count();
    if (turns == 0) throw InputError("blend: empty trace");
    detail::TapeAlgebra alg{&tape};
    const std::vector<Var> w_p = detail::strategy_weights(vars.beta_passage, strategy, alg);
    const std::vector<Var> w_q = detail::strategy_weights(vars.beta_question, strategy, alg);
    Var comb_p = tape.mul_scalar_var(vars.norm_passage[0], w_p[0]);
    Var comb_q = tape.mul_scalar_var(vars.norm_question[0], w_q[0]);
    for (std::size_t t = 1; t < turns; ++t) {
        comb_p = tape.add(comb_p, tape.mul_scalar_var(vars.norm_passage[t], w_p[t]));
        comb_q = tape.add(comb_q, tape.mul_scalar_var(vars.norm_question[t], w_q[t]));
    }
    Var out = tape.row_scale_subset(e, comb_p, split.passage);
    return tape.row_scale_subset(out, comb_q, split.question);
}

} // namespace poinet
