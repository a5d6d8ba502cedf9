#pragma once

// Optimization on toy tasks, the finite-difference gradient harness,
// extractive/choice evaluation with SQuAD-style normalization, and the
// ablation sweep driver (POS on/off × turns × strategy × tag corruption,
// averaged over fixed seeds).

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "poinet/heads.hpp"
#include "poinet/model.hpp"

namespace poinet {

struct TrainConfig {
    double learning_rate = 1e-3;
    std::size_t batch_size = 32;
    std::size_t epochs = 3;
    std::uint64_t seed = 42;
    enum class Optimizer { sgd, adam } optimizer = Optimizer::adam;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    double clip_norm = 1.0; // <= 0 disables clipping

    void validate() const {
        if (learning_rate < 0.0) throw ConfigError("learning_rate must be >= 0");
        if (batch_size == 0) throw ConfigError("batch_size must be positive");
        if (adam_beta1 <= 0.0 || adam_beta1 >= 1.0 || adam_beta2 <= 0.0 || adam_beta2 >= 1.0) {
            throw ConfigError("adam betas must lie in (0,1)");
        }
        if (adam_eps <= 0.0) throw ConfigError("adam eps must be positive");
    }
};

// gradient buffers aligned with ModelParams::visit order
struct GradBuffer {
    std::vector<Matrix> grads;

    explicit GradBuffer(const ModelParams& params) {
        params.visit([&](const char*, const std::string&, const Matrix& m) {
            grads.emplace_back(m.rows, m.cols, 0.0);
        });
    }

    void zero() {
        for (Matrix& g : grads) std::fill(g.data.begin(), g.data.end(), 0.0);
    }

    void add_from_tape(const Tape& tape, const BoundParams& bound, double scale_factor) {
        for (std::size_t i = 0; i < bound.vars.size(); ++i) {
            const Matrix& g = tape.grad(bound.vars[i]);
            Matrix& acc = grads[i];
            for (std::size_t k = 0; k < acc.data.size(); ++k) {
                acc.data[k] += scale_factor * g.data[k];
            }
        }
    }

    double global_norm() const {
        double sq = 0.0;
        for (const Matrix& g : grads) {
            for (double v : g.data) sq += v * v;
        }
        return std::sqrt(sq);
    }

    void scale_all(double c) {
        for (Matrix& g : grads) {
            for (double& v : g.data) v *= c;
        }
    }
};

class Optimizer {
public:
    Optimizer(const ModelParams& params, const TrainConfig& config) : config_(config) {
        config.validate();
        params.visit([&](const char*, const std::string&, const Matrix& t) {
            m_.emplace_back(t.rows, t.cols, 0.0);
            v_.emplace_back(t.rows, t.cols, 0.0);
        });
    }

    void step(ModelParams& params, GradBuffer& grads) {
        if (config_.clip_norm > 0.0) {
            const double norm = grads.global_norm();
            if (norm > config_.clip_norm) grads.scale_all(config_.clip_norm / norm);
        }
        ++t_;
        std::size_t i = 0;
        params.visit([&](const char*, const std::string&, Matrix& p) {
            Matrix& g = grads.grads[i];
            if (config_.optimizer == TrainConfig::Optimizer::sgd) {
                for (std::size_t k = 0; k < p.data.size(); ++k) {
                    p.data[k] -= config_.learning_rate * g.data[k];
                }
            } else {
                const double bc1 = 1.0 - std::pow(config_.adam_beta1, static_cast<double>(t_));
                const double bc2 = 1.0 - std::pow(config_.adam_beta2, static_cast<double>(t_));
                Matrix& m = m_[i];
                Matrix& v = v_[i];
                for (std::size_t k = 0; k < p.data.size(); ++k) {
                    const double gk = g.data[k];
                    m.data[k] = config_.adam_beta1 * m.data[k] + (1.0 - config_.adam_beta1) * gk;
                    v.data[k] =
                        config_.adam_beta2 * v.data[k] + (1.0 - config_.adam_beta2) * gk * gk;
                    const double mhat = m.data[k] / bc1;
                    const double vhat = v.data[k] / bc2;
                    p.data[k] -= config_.learning_rate * mhat / (std::sqrt(vhat) + config_.adam_eps);
                }
            }
            ++i;
        });
    }

private:
    TrainConfig config_;
    std::vector<Matrix> m_, v_;
    std::uint64_t t_ = 0;
};

namespace detail {

// loss_fn returns an invalid Var to drop the example from training
template <class Instance, class LossFn>
std::vector<double> train_loop(Model& model, const std::vector<Instance>& data,
                               const TrainConfig& config, LossFn&& loss_fn) {
    if (data.empty()) throw TrainingError("train: empty dataset");
    config.validate();
    Optimizer opt(model.params, config);
    GradBuffer grads(model.params);
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> loss_curve;
    std::size_t step = 0;
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        std::mt19937_64 rng(mix_seed(config.seed, 0xe90c * (epoch + 1)));
        for (std::size_t i = order.size(); i > 1; --i) {
            std::uniform_int_distribution<std::size_t> pick(0, i - 1);
            std::swap(order[i - 1], order[pick(rng)]);
        }
        for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
            const std::size_t end = std::min(order.size(), begin + config.batch_size);
            grads.zero();
            double batch_loss = 0.0;
            std::size_t contributing = 0;
            for (std::size_t k = begin; k < end; ++k) {
                Tape tape;
                BoundParams bound = bind_params(tape, model.params);
                Var loss = loss_fn(tape, bound, data[order[k]]);
                if (!loss.valid()) continue;
                ++contributing;
                batch_loss += tape.scalar_val(loss);
                tape.backward(loss);
                grads.add_from_tape(tape, bound, 1.0);
            }
            if (contributing == 0) continue;
            grads.scale_all(1.0 / static_cast<double>(contributing));
            batch_loss /= static_cast<double>(contributing);
            if (!std::isfinite(batch_loss)) {
                throw TrainingError("divergence: non-finite loss at step " +
                                    std::to_string(step));
            }
            loss_curve.push_back(batch_loss);
            opt.step(model.params, grads);
            ++step;
        }
    }
    return loss_curve;
}

} // namespace detail

inline Var extractive_instance_loss(Tape& tape, const BoundParams& bound,
                                    const ModelConfig& config, const ExtractiveInstance& inst) {
    if (inst.gold_truncated) return Var{};
    const SpanDistVars dist = forward_extractive(tape, inst.input, bound, config);
    return span_loss(tape, dist, inst.target_start, inst.target_end, inst.input.split.non_pad);
}

inline Var choice_instance_loss(Tape& tape, const BoundParams& bound, const ModelConfig& config,
                                const ChoiceInstance& inst) {
    Var probs = forward_choice(tape, inst, bound, config);
    return choice_loss(tape, probs, inst.gold);
}

inline std::vector<double> train_extractive(Model& model,
                                            const std::vector<ExtractiveInstance>& data,
                                            const TrainConfig& config) {
    return detail::train_loop(model, data, config,
                              [&](Tape& t, const BoundParams& b, const ExtractiveInstance& x) {
                                  return extractive_instance_loss(t, b, model.config, x);
                              });
}

inline std::vector<double> train_choice(Model& model, const std::vector<ChoiceInstance>& data,
                                        const TrainConfig& config) {
    return detail::train_loop(model, data, config,
                              [&](Tape& t, const BoundParams& b, const ChoiceInstance& x) {
                                  return choice_instance_loss(t, b, model.config, x);
                              });
}

// ---- gradient check ----

struct GradientCheckResult {
    double max_rel_error = 0.0;
    std::size_t checked = 0;
    double min_tie_gap = 0.0;
    std::size_t batches = 0;
};

// Tape gradients vs central finite differences on random parameter scalars
// spanning every component. Batches whose forward pass ran closer than
// tie_gap to an argmax tie are discarded and resampled.
inline GradientCheckResult gradient_check(Model& model,
                                          const std::vector<ExtractiveInstance>& pool,
                                          std::size_t batch_size, std::size_t n_batches,
                                          std::size_t n_samples, double epsilon,
                                          std::uint64_t seed, double tie_gap = 1e-3) {
    if (pool.empty()) throw InputError("gradient_check: empty pool");
    std::mt19937_64 rng(mix_seed(seed, 0x9cad));
    GradientCheckResult result;
    result.min_tie_gap = std::numeric_limits<double>::infinity();

    std::vector<std::pair<std::string, Matrix*>> tensors;
    model.params.visit([&](const char*, const std::string& name, Matrix& m) {
        tensors.emplace_back(name, &m);
    });

    const auto batch_loss = [&](const std::vector<std::size_t>& batch, double* tie_out) {
        double total = 0.0;
        double min_gap = std::numeric_limits<double>::infinity();
        for (std::size_t idx : batch) {
            Tape tape;
            BoundParams bound = bind_params(tape, model.params);
            Var loss = extractive_instance_loss(tape, bound, model.config, pool[idx]);
            if (!loss.valid()) continue;
            total += tape.scalar_val(loss);
            min_gap = std::min(min_gap, tape.min_tie_gap());
        }
        if (tie_out) *tie_out = min_gap;
        return total;
    };

    for (std::size_t b = 0; b < n_batches; ++b) {
        std::vector<std::size_t> batch;
        double gap = 0.0;
        for (int attempt = 0; attempt < 200; ++attempt) {
            batch.clear();
            std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
            for (std::size_t i = 0; i < batch_size; ++i) batch.push_back(pick(rng));
            batch_loss(batch, &gap);
            if (gap > tie_gap) break;
        }
        if (gap <= tie_gap) {
            throw TrainingError("gradient_check: could not find a tie-free batch");
        }
        result.min_tie_gap = std::min(result.min_tie_gap, gap);
        ++result.batches;

        // analytic gradients, accumulated over the batch
        GradBuffer analytic(model.params);
        for (std::size_t idx : batch) {
            Tape tape;
            BoundParams bound = bind_params(tape, model.params);
            Var loss = extractive_instance_loss(tape, bound, model.config, pool[idx]);
            if (!loss.valid()) continue;
            tape.backward(loss);
            analytic.add_from_tape(tape, bound, 1.0);
        }

        // stratified scalar sample: round-robin over tensors
        const std::size_t per_batch = (n_samples + n_batches - 1) / n_batches;
        for (std::size_t s = 0; s < per_batch; ++s) {
            const std::size_t ti = (s + b) % tensors.size();
            Matrix& tensor = *tensors[ti].second;
            std::uniform_int_distribution<std::size_t> pick(0, tensor.data.size() - 1);
            const std::size_t k = pick(rng);
            const double saved = tensor.data[k];
            tensor.data[k] = saved + epsilon;
            const double up = batch_loss(batch, nullptr);
            tensor.data[k] = saved - epsilon;
            const double down = batch_loss(batch, nullptr);
            tensor.data[k] = saved;
            const double fd = (up - down) / (2.0 * epsilon);
            const double an = analytic.grads[ti].data[k];
            const double denom = std::max({std::abs(fd), std::abs(an), 1e-6});
            const double rel = std::abs(fd - an) / denom;
            result.max_rel_error = std::max(result.max_rel_error, rel);
            ++result.checked;
        }
    }
    return result;
}

// ---- metrics ----

// lowercase, strip punctuation, drop articles, collapse whitespace
inline std::string normalize_answer(const std::string& text) {
    std::string lowered;
    lowered.reserve(text.size());
    for (char c : text) {
        const unsigned char u = static_cast<unsigned char>(c);
        if (std::ispunct(u)) continue;
        lowered.push_back(static_cast<char>(std::tolower(u)));
    }
    std::istringstream words(lowered);
    std::string word, out;
    while (words >> word) {
        if (word == "a" || word == "an" || word == "the") continue;
        if (!out.empty()) out += ' ';
        out += word;
    }
    return out;
}

inline std::vector<std::string> answer_tokens(const std::string& normalized) {
    std::istringstream in(normalized);
    std::vector<std::string> out;
    std::string w;
    while (in >> w) out.push_back(w);
    return out;
}

inline double f1_score(const std::string& prediction, const std::string& gold) {
    const auto pred = answer_tokens(normalize_answer(prediction));
    const auto ref = answer_tokens(normalize_answer(gold));
    if (pred.empty() || ref.empty()) return (pred.empty() && ref.empty()) ? 1.0 : 0.0;
    std::map<std::string, std::size_t> counts;
    for (const auto& t : ref) ++counts[t];
    std::size_t overlap = 0;
    for (const auto& t : pred) {
        auto it = counts.find(t);
        if (it != counts.end() && it->second > 0) {
            --it->second;
            ++overlap;
        }
    }
    if (overlap == 0) return 0.0;
    const double precision = static_cast<double>(overlap) / static_cast<double>(pred.size());
    const double recall = static_cast<double>(overlap) / static_cast<double>(ref.size());
    return 2.0 * precision * recall / (precision + recall);
}

inline bool exact_match(const std::string& prediction, const std::string& gold) {
    return normalize_answer(prediction) == normalize_answer(gold);
}

// ---- evaluation ----

struct EvalRecord {
    std::string id;
    std::string predicted;
    double em = 0.0;
    double f1 = 0.0;
    bool correct = false;
    double final_score = 0.0;
    bool gold_has_answer = true;
    bool predicted_answerable = true;
    std::size_t predicted_option = 0;
    std::size_t gold_option = 0;
};

struct EvalReport {
    std::string task;
    double em = 0.0;
    double f1 = 0.0;
    double accuracy = 0.0;
    double delta = 0.0;
    double answerable_accuracy = 0.0;
    double unanswerable_subset_accuracy = 0.0;
    std::vector<EvalRecord> records;
};

inline constexpr std::size_t kDefaultMaxAnswerLen = 30;

struct ExtractivePrediction {
    SpanPrediction span;
    std::string text; // sliced from the original passage
};

inline ExtractivePrediction predict_extractive(const Model& model,
                                               const ExtractiveInstance& inst, double delta,
                                               std::size_t max_answer_len = kDefaultMaxAnswerLen) {
    const auto [s, e] = predict_span_distributions(model, inst.input);
    ExtractivePrediction pred;
    pred.span = decode_span(s, e, delta, max_answer_len, inst.input.passage_begin,
                            inst.input.passage_end);
    const auto [cb, _unused] = inst.input.char_spans[pred.span.start];
    const auto ce = inst.input.char_spans[pred.span.end].second;
    pred.text = inst.passage.substr(cb, ce - cb);
    pred.span.answer_text = pred.text;
    return pred;
}

// δ fitted on the dev sample's final scores (widest-optimal-gap midpoint)
inline double fit_delta(const Model& model, const std::vector<ExtractiveInstance>& dev,
                        std::size_t max_answer_len = kDefaultMaxAnswerLen) {
    std::vector<double> scores;
    std::vector<bool> labels;
    for (const auto& inst : dev) {
        const auto pred = predict_extractive(model, inst, 0.0, max_answer_len);
        scores.push_back(pred.span.final_score);
        labels.push_back(!inst.is_impossible);
    }
    return fit_threshold(scores, labels);
}

inline EvalReport evaluate_extractive(const Model& model,
                                      const std::vector<ExtractiveInstance>& data, double delta,
                                      std::size_t max_answer_len = kDefaultMaxAnswerLen) {
    if (data.empty()) throw InputError("evaluate_extractive: empty dataset");
    EvalReport report;
    report.task = "extractive";
    report.delta = delta;
    std::size_t verdict_correct = 0, unanswerable_total = 0, unanswerable_correct = 0;
    for (const auto& inst : data) {
        const auto pred = predict_extractive(model, inst, delta, max_answer_len);
        EvalRecord rec;
        rec.id = inst.id;
        rec.final_score = pred.span.final_score;
        rec.gold_has_answer = !inst.is_impossible;
        rec.predicted_answerable = pred.span.answerable;
        rec.predicted = pred.span.answerable ? pred.text : std::string{};
        if (inst.gold_truncated) {
            rec.em = 0.0; // gold span truncated away counts as an error
            rec.f1 = 0.0;
        } else if (inst.is_impossible) {
            rec.em = rec.f1 = pred.span.answerable ? 0.0 : 1.0;
        } else if (!pred.span.answerable) {
            rec.em = rec.f1 = 0.0;
        } else {
            for (const auto& gold : inst.gold_answers) {
                rec.em = std::max(rec.em, exact_match(rec.predicted, gold.text) ? 1.0 : 0.0);
                rec.f1 = std::max(rec.f1, f1_score(rec.predicted, gold.text));
            }
        }
        rec.correct = rec.em == 1.0;
        if (rec.predicted_answerable == rec.gold_has_answer) ++verdict_correct;
        if (!rec.gold_has_answer) {
            ++unanswerable_total;
            if (!rec.predicted_answerable) ++unanswerable_correct;
        }
        report.em += rec.em;
        report.f1 += rec.f1;
        report.records.push_back(std::move(rec));
    }
    const double n = static_cast<double>(data.size());
    report.em /= n;
    report.f1 /= n;
    report.accuracy = report.em;
    report.answerable_accuracy = static_cast<double>(verdict_correct) / n;
    report.unanswerable_subset_accuracy =
        unanswerable_total == 0
            ? 1.0
            : static_cast<double>(unanswerable_correct) / static_cast<double>(unanswerable_total);
    return report;
}

inline EvalReport evaluate_choice(const Model& model, const std::vector<ChoiceInstance>& data) {
    if (data.empty()) throw InputError("evaluate_choice: empty dataset");
    EvalReport report;
    report.task = "choice";
    for (const auto& inst : data) {
        const Vector probs = predict_choice_probabilities(model, inst);
        EvalRecord rec;
        rec.id = inst.id;
        rec.gold_option = inst.gold;
        rec.predicted_option = 0;
        for (std::size_t o = 1; o < probs.size(); ++o) {
            if (probs[o] > probs[rec.predicted_option]) rec.predicted_option = o;
        }
        rec.correct = rec.predicted_option == inst.gold;
        rec.em = rec.f1 = rec.correct ? 1.0 : 0.0;
        report.accuracy += rec.correct ? 1.0 : 0.0;
        report.records.push_back(std::move(rec));
    }
    report.accuracy /= static_cast<double>(data.size());
    report.em = report.f1 = report.accuracy;
    return report;
}

inline nlohmann::json report_to_json(const EvalReport& r, bool with_records = true) {
    nlohmann::json j{{"task", r.task},
                     {"em", r.em},
                     {"f1", r.f1},
                     {"accuracy", r.accuracy},
                     {"delta", r.delta},
                     {"answerable_accuracy", r.answerable_accuracy},
                     {"unanswerable_subset_accuracy", r.unanswerable_subset_accuracy}};
    if (with_records) {
        nlohmann::json records = nlohmann::json::array();
        for (const auto& rec : r.records) {
            records.push_back({{"id", rec.id},
                               {"predicted", rec.predicted},
                               {"em", rec.em},
                               {"f1", rec.f1},
                               {"correct", rec.correct},
                               {"final_score", rec.final_score},
                               {"gold_has_answer", rec.gold_has_answer},
                               {"predicted_answerable", rec.predicted_answerable},
                               {"predicted_option", rec.predicted_option},
                               {"gold_option", rec.gold_option}});
        }
        j["records"] = records;
    }
    return j;
}

// ---- ablation sweep ----

struct SweepAxes {
    std::vector<int> pos_embedding = {1};             // 1 = on, 0 = off
    std::vector<std::size_t> turns = {3};
    std::vector<Strategy> strategies = {Strategy::forgetting};
    std::vector<double> corruption = {0.0};
};

struct SweepTask {
    std::string task = "synthetic-extractive"; // or "synthetic-choice"
    bool pos_dependency = true;
    std::size_t scattered_facts = 3;
    std::size_t train_size = 800;
    std::size_t dev_size = 300;
    ModelConfig base_config;
    TrainConfig train;
    std::size_t max_answer_len = kDefaultMaxAnswerLen;
};

struct SweepCell {
    int pos_embedding = 1;
    std::size_t turns = 3;
    Strategy strategy = Strategy::forgetting;
    double corruption = 0.0;
    std::vector<double> per_seed; // primary metric (EM or accuracy) per seed
    double mean = 0.0;
};

struct SweepResult {
    std::string task;
    std::string metric;
    std::vector<std::uint64_t> seeds;
    std::vector<SweepCell> cells;
};

namespace detail {

struct PreparedExtractive {
    Model model;
    std::vector<ExtractiveInstance> train_set, dev_set;
};

inline PreparedExtractive prepare_extractive(const SweepTask& task, const ModelConfig& config,
                                             double corruption, std::uint64_t seed) {
    const auto train_ex = generate_synthetic_extractive(seed, task.train_size,
                                                        task.pos_dependency);
    const auto dev_ex =
        generate_synthetic_extractive(mix_seed(seed, 0xd3f0), task.dev_size, task.pos_dependency);
    std::vector<std::string> words = corpus_words(train_ex);
    const auto dev_words = corpus_words(dev_ex);
    words.insert(words.end(), dev_words.begin(), dev_words.end());
    ModelConfig cfg = config;
    cfg.seed = seed;
    PreparedExtractive out{Model(cfg, WordpieceVocab::build(words)), {}, {}};
    const auto assemble_all = [&](const std::vector<ExtractiveExample>& exs, std::uint64_t salt) {
        std::vector<ExtractiveInstance> insts;
        insts.reserve(exs.size());
        for (std::size_t i = 0; i < exs.size(); ++i) {
            AssembleOptions opts;
            opts.corrupt_rate = corruption;
            opts.corrupt_seed = mix_seed(seed, salt + i);
            insts.push_back(assemble(exs[i], out.model.config, out.model.vocab, opts));
        }
        return insts;
    };
    out.train_set = assemble_all(train_ex, 0x11000000);
    out.dev_set = assemble_all(dev_ex, 0x22000000);
    return out;
}

struct PreparedChoice {
    Model model;
    std::vector<ChoiceInstance> train_set, dev_set;
};

inline PreparedChoice prepare_choice(const SweepTask& task, const ModelConfig& config,
                                     double corruption, std::uint64_t seed) {
    const auto train_ex = generate_synthetic_choice(seed, task.train_size, task.scattered_facts);
    const auto dev_ex =
        generate_synthetic_choice(mix_seed(seed, 0xd3f0), task.dev_size, task.scattered_facts);
    std::vector<std::string> words = corpus_words(train_ex);
    const auto dev_words = corpus_words(dev_ex);
    words.insert(words.end(), dev_words.begin(), dev_words.end());
    ModelConfig cfg = config;
    cfg.seed = seed;
    PreparedChoice out{Model(cfg, WordpieceVocab::build(words)), {}, {}};
    const auto assemble_all = [&](const std::vector<ChoiceExample>& exs, std::uint64_t salt) {
        std::vector<ChoiceInstance> insts;
        insts.reserve(exs.size());
        for (std::size_t i = 0; i < exs.size(); ++i) {
            AssembleOptions opts;
            opts.corrupt_rate = corruption;
            opts.corrupt_seed = mix_seed(seed, salt + i);
            insts.push_back(assemble(exs[i], out.model.config, out.model.vocab, opts));
        }
        return insts;
    };
    out.train_set = assemble_all(train_ex, 0x11000000);
    out.dev_set = assemble_all(dev_ex, 0x22000000);
    return out;
}

} // namespace detail

// One train+eval run of a sweep cell; returns the primary metric.
inline double run_sweep_cell(const SweepTask& task, const ModelConfig& config, double corruption,
                             std::uint64_t seed) {
    TrainConfig tc = task.train;
    tc.seed = seed;
    if (task.task == "synthetic-extractive") {
        auto prep = detail::prepare_extractive(task, config, corruption, seed);
        train_extractive(prep.model, prep.train_set, tc);
        const double delta = fit_delta(prep.model, prep.dev_set, task.max_answer_len);
        return evaluate_extractive(prep.model, prep.dev_set, delta, task.max_answer_len).em;
    }
    if (task.task == "synthetic-choice") {
        auto prep = detail::prepare_choice(task, config, corruption, seed);
        train_choice(prep.model, prep.train_set, tc);
        return evaluate_choice(prep.model, prep.dev_set).accuracy;
    }
    throw ConfigError("run_sweep_cell: unknown task \"" + task.task + "\"");
}

inline SweepResult ablation_sweep(const SweepTask& task, const SweepAxes& axes,
                                  const std::vector<std::uint64_t>& seeds = {13, 42, 71},
                                  const std::function<void(const SweepCell&)>& on_cell = {}) {
    SweepResult result;
    result.task = task.task;
    result.metric = task.task == "synthetic-choice" ? "accuracy" : "em";
    result.seeds = seeds;
    for (int pos : axes.pos_embedding) {
        for (std::size_t turns : axes.turns) {
            for (Strategy strategy : axes.strategies) {
                for (double corruption : axes.corruption) {
                    SweepCell cell;
                    cell.pos_embedding = pos;
                    cell.turns = turns;
                    cell.strategy = strategy;
                    cell.corruption = corruption;
                    ModelConfig config = task.base_config;
                    config.use_pos_embedding = pos != 0;
                    config.max_turns = turns;
                    config.strategy = strategy;
                    for (std::uint64_t seed : seeds) {
                        cell.per_seed.push_back(run_sweep_cell(task, config, corruption, seed));
                    }
                    cell.mean = std::accumulate(cell.per_seed.begin(), cell.per_seed.end(), 0.0) /
                                static_cast<double>(cell.per_seed.size());
                    if (on_cell) on_cell(cell);
                    result.cells.push_back(std::move(cell));
                }
            }
        }
    }
    return result;
}

inline nlohmann::json sweep_to_json(const SweepResult& r) {
    nlohmann::json cells = nlohmann::json::array();
    for (const auto& c : r.cells) {
        cells.push_back({{"pos_embedding", c.pos_embedding != 0},
                         {"turns", c.turns},
                         {"strategy", strategy_name(c.strategy)},
                         {"corruption", c.corruption},
                         {"per_seed", c.per_seed},
                         {"mean", c.mean}});
    }
    return {{"task", r.task}, {"metric", r.metric}, {"seeds", r.seeds}, {"cells", cells}};
}

inline std::string sweep_to_tsv(const SweepResult& r) {
    std::ostringstream out;
    out << "pos_embedding\tturns\tstrategy\tcorruption";
    for (std::size_t i = 0; i < r.seeds.size(); ++i) out << "\tseed" << r.seeds[i];
    out << "\tmean\n";
    for (const auto& c : r.cells) {
        out << (c.pos_embedding ? "on" : "off") << '\t' << c.turns << '\t'
            << strategy_name(c.strategy) << '\t' << c.corruption;
        for (double v : c.per_seed) out << '\t' << v;
        out << '\t' << c.mean << '\n';
    }
    return out.str();
}

} // namespace poinet
