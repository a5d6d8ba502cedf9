#pragma once

// Output heads. Multi-choice: max-pool R, linear to one logit per option,
// softmax across options. Extractive: linear H→2 to start/end logits, masked
// softmax over positions, span decoding against the [CLS] null score with an
// answerability threshold δ.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "poinet/encoder.hpp"
#include "poinet/numerics.hpp"
#include "poinet/tape.hpp"

namespace poinet {

struct SpanPrediction {
    std::size_t start = 0;
    std::size_t end = 0;
    double score_has = 0.0;
    double score_no = 0.0;
    double final_score = 0.0; // score_has − score_no
    bool answerable = false;  // final_score > δ, strictly
    std::string answer_text;
};

// ---- taped forward pieces ----

inline Var option_logit(Tape& tape, Var r, const Mask& non_pad, const BoundParams& bound) {
    Var pooled = tape.masked_max_pool(r, non_pad);
    return tape.add(tape.matmul(pooled, bound["head.choice_w"]), bound["head.choice_b"]);
}

inline Var option_probabilities(Tape& tape, const std::vector<Var>& logits) {
    if (logits.size() < 2) throw InputError("option_probabilities: need at least 2 options");
    Var stacked = tape.concat_rows(logits);
    Mask all(logits.size(), 1);
    return tape.softmax_vec_masked(stacked, all);
}

struct SpanDistVars {
    Var start; // N×1
    Var end;   // N×1
};

inline SpanDistVars span_distributions(Tape& tape, Var r, const Mask& non_pad,
                                       const BoundParams& bound) {
    Var logits = tape.add_row(tape.matmul(r, bound["head.span_w"]), bound["head.span_b"]);
    SpanDistVars out;
    out.start = tape.softmax_vec_masked(tape.col(logits, 0), non_pad);
    out.end = tape.softmax_vec_masked(tape.col(logits, 1), non_pad);
    return out;
}

// −log s[y_s] − log e[y_e]
inline Var span_loss(Tape& tape, const SpanDistVars& dist, std::size_t target_start,
                     std::size_t target_end, const Mask& non_pad) {
    if (target_start >= non_pad.size() || target_end >= non_pad.size() ||
        !non_pad[target_start] || !non_pad[target_end]) {
        throw InputError("span_loss: target on padding");
    }
    Var ls = tape.log(tape.pick(dist.start, target_start));
    Var le = tape.log(tape.pick(dist.end, target_end));
    return tape.neg(tape.add(ls, le));
}

inline Var choice_loss(Tape& tape, Var probabilities, std::size_t gold) {
    const Matrix& pv = tape.val(probabilities);
    if (pv.cols != 1 || gold >= pv.rows) throw InputError("choice_loss: gold out of range");
    return tape.neg(tape.log(tape.pick(probabilities, gold)));
}

// ---- plain wrappers matching the exported operation surface ----

inline Vector score_options(const std::vector<Matrix>& r_per_option, const ModelParams& params,
                            const std::vector<Mask>& non_pad_per_option) {
    if (r_per_option.size() < 2) throw InputError("score_options: need at least 2 options");
    if (non_pad_per_option.size() != r_per_option.size()) {
        throw DimensionError("score_options: mask count mismatch");
    }
    Tape tape;
    BoundParams bound = bind_params(tape, params);
    std::vector<Var> logits;
    for (std::size_t o = 0; o < r_per_option.size(); ++o) {
        logits.push_back(option_logit(tape, tape.leaf(r_per_option[o]), non_pad_per_option[o],
                                      bound));
    }
    return Vector(tape.val(option_probabilities(tape, logits)).data);
}

inline std::pair<Vector, Vector> span_distributions(const Matrix& r, const ModelParams& params,
                                                    const Mask& non_pad) {
    Tape tape;
    BoundParams bound = bind_params(tape, params);
    const SpanDistVars dist = span_distributions(tape, tape.leaf(r), non_pad, bound);
    return {Vector(tape.val(dist.start).data), Vector(tape.val(dist.end).data)};
}

inline double span_loss(const Vector& s, const Vector& e, std::size_t target_start,
                        std::size_t target_end) {
    if (target_start >= s.size() || target_end >= e.size()) {
        throw InputError("span_loss: target out of range");
    }
    return -std::log(s[target_start]) - std::log(e[target_end]);
}

inline double choice_loss(const Vector& probabilities, std::size_t gold) {
    if (gold >= probabilities.size()) throw InputError("choice_loss: gold out of range");
    return -std::log(probabilities[gold]);
}

// ---- span decoding ----

// Maximizes s_i + e_j over passage positions with i ≤ j and span length at
// most max_answer_len; ties break to the smaller i, then smaller j. The null
// score anchors at position 0 ([CLS]); answerable iff final score > δ.
inline SpanPrediction decode_span(const Vector& s, const Vector& e, double delta,
                                  std::size_t max_answer_len, std::size_t passage_begin,
                                  std::size_t passage_end) {
    require_same_length(s, e, "decode_span");
    if (passage_begin >= passage_end || passage_end > s.size()) {
        throw InputError("decode_span: empty or invalid passage range");
    }
    if (max_answer_len == 0) throw InputError("decode_span: max_answer_len must be positive");
    SpanPrediction pred;
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t i = passage_begin; i < passage_end; ++i) {
        const std::size_t j_cap = std::min(passage_end, i + max_answer_len);
        for (std::size_t j = i; j < j_cap; ++j) {
            const double score = s[i] + e[j];
            if (score > best) {
                best = score;
                pred.start = i;
                pred.end = j;
            }
        }
    }
    pred.score_has = best;
    pred.score_no = s[0] + e[0];
    pred.final_score = pred.score_has - pred.score_no;
    pred.answerable = pred.final_score > delta;
    return pred;
}

// δ maximizing answerability accuracy (predict answerable iff score > δ) over
// a dev sample. Sorts once, scans cut points linearly, and returns the
// midpoint of the widest optimal gap; one-sided optima use sentinel gaps of
// width 2 beyond the extreme scores.
inline double fit_threshold(const std::vector<double>& final_scores,
                            const std::vector<bool>& has_answer) {
    if (final_scores.empty() || final_scores.size() != has_answer.size()) {
        throw InputError("fit_threshold: empty or mismatched inputs");
    }
    std::size_t positives = 0;
    for (bool h : has_answer) positives += h ? 1 : 0;
    if (positives == final_scores.size()) return -std::numeric_limits<double>::infinity();
    if (positives == 0) return std::numeric_limits<double>::infinity();

    const std::size_t n = final_scores.size();
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return final_scores[a] < final_scores[b];
    });

    // Cut after sorted prefix p (δ strictly between score[p-1] and score[p]):
    // prefix predicted unanswerable, suffix answerable.
    // correct(p) = (#negatives in prefix) + (#positives in suffix)
    std::size_t pos_seen = 0, neg_seen = 0;
    std::size_t best_correct = 0;
    std::vector<std::pair<double, double>> best_gaps;
    const double lo_sentinel = final_scores[order[0]] - 2.0;
    const double hi_sentinel = final_scores[order[n - 1]] + 2.0;
    for (std::size_t p = 0; p <= n; ++p) {
        const bool distinct =
            (p == 0 || p == n || final_scores[order[p - 1]] < final_scores[order[p]]);
        if (distinct) {
            const std::size_t correct = neg_seen + (positives - pos_seen);
            const double lo = (p == 0) ? lo_sentinel : final_scores[order[p - 1]];
            const double hi = (p == n) ? hi_sentinel : final_scores[order[p]];
            if (correct > best_correct) {
                best_correct = correct;
                best_gaps.clear();
            }
            if (correct == best_correct) best_gaps.emplace_back(lo, hi);
        }
        if (p < n) {
            if (has_answer[order[p]]) {
                ++pos_seen;
            } else {
                ++neg_seen;
            }
        }
    }
    double best_width = -1.0, best_mid = 0.0;
    for (const auto& [lo, hi] : best_gaps) {
        const double width = hi - lo;
        const double mid = lo + width / 2.0;
        if (width > best_width || (width == best_width && mid < best_mid)) {
            best_width = width;
            best_mid = mid;
        }
    }
    return best_mid;
}

} // namespace poinet
