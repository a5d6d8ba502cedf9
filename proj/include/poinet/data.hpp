#pragma once

// Dataset ingestion (SQuAD-style JSON, choice JSON lines), the toy wordpiece
// vocabulary, input-sequence assembly ([CLS] P [SEP] Q(+O) [SEP]), and the
// deterministic synthetic task generators used for desk-scale verification.

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include <json.hpp>

#include "poinet/coattention.hpp"
#include "poinet/config.hpp"
#include "poinet/errors.hpp"
#include "poinet/pos.hpp"

namespace poinet {

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
    // splitmix64 step
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// ---- word splitting with char offsets ----

struct WordSpan {
    std::string word;
    std::size_t char_begin = 0;
    std::size_t char_end = 0;
};

// Letters/digits/UTF-8 continuation bytes glue into words; an apostrophe
// starts a new token ("Porter's" → "Porter", "'s"); other punctuation is a
// single-char token.
inline std::vector<WordSpan> split_words(const std::string& text) {
    std::vector<WordSpan> out;
    std::size_t i = 0;
    const auto is_word_char = [](unsigned char c) {
        return std::isalnum(c) != 0 || c >= 0x80;
    };
    while (i < text.size()) {
        const unsigned char c = static_cast<unsigned char>(text[i]);
        if (std::isspace(c)) {
            ++i;
            continue;
        }
        WordSpan span;
        span.char_begin = i;
        if (is_word_char(c)) {
            while (i < text.size() && is_word_char(static_cast<unsigned char>(text[i]))) ++i;
        } else if (c == '\'') {
            ++i;
            while (i < text.size() && is_word_char(static_cast<unsigned char>(text[i]))) ++i;
        } else {
            ++i;
        }
        span.char_end = i;
        span.word = text.substr(span.char_begin, span.char_end - span.char_begin);
        out.push_back(std::move(span));
    }
    return out;
}

// ---- toy wordpiece vocabulary (whole words + suffix pieces) ----

class WordpieceVocab {
public:
    static constexpr std::size_t kCls = 0;
    static constexpr std::size_t kSep = 1;
    static constexpr std::size_t kPad = 2;
    static constexpr std::size_t kUnk = 3;

    WordpieceVocab() { reset_specials(); }

    static WordpieceVocab build(const std::vector<std::string>& corpus_words) {
        WordpieceVocab v;
        std::vector<std::string> pieces;
        for (const std::string& w : corpus_words) {
            const auto split = split_rule(w);
            if (split) {
                pieces.push_back(split->first);
                pieces.push_back("##" + split->second);
            } else {
                pieces.push_back(w);
            }
        }
        std::sort(pieces.begin(), pieces.end());
        pieces.erase(std::unique(pieces.begin(), pieces.end()), pieces.end());
        for (const std::string& p : pieces) v.add(p);
        return v;
    }

    static WordpieceVocab from_pieces(const std::vector<std::string>& pieces) {
        WordpieceVocab v;
        if (pieces.size() < 4 || pieces[kCls] != "[CLS]" || pieces[kSep] != "[SEP]" ||
            pieces[kPad] != "[PAD]" || pieces[kUnk] != "[UNK]") {
            throw ParseError("wordpiece vocab: bad reserved pieces");
        }
        for (std::size_t i = 4; i < pieces.size(); ++i) v.add(pieces[i]);
        return v;
    }

    std::size_t size() const { return pieces_.size(); }
    const std::vector<std::string>& pieces() const { return pieces_; }
    const std::string& piece(std::size_t id) const { return pieces_.at(id); }

    std::vector<std::size_t> encode_word(const std::string& word) const {
        const auto split = split_rule(word);
        if (split) {
            const auto stem = index_.find(split->first);
            const auto suf = index_.find("##" + split->second);
            if (stem != index_.end() && suf != index_.end()) {
                return {stem->second, suf->second};
            }
        }
        if (const auto it = index_.find(word); it != index_.end()) return {it->second};
        return {kUnk};
    }

private:
    std::vector<std::string> pieces_;
    std::unordered_map<std::string, std::size_t> index_;

    void reset_specials() {
        pieces_ = {"[CLS]", "[SEP]", "[PAD]", "[UNK]"};
        index_.clear();
        for (std::size_t i = 0; i < pieces_.size(); ++i) index_[pieces_[i]] = i;
    }

    void add(const std::string& piece) {
        if (index_.count(piece)) return;
        index_[piece] = pieces_.size();
        pieces_.push_back(piece);
    }

    // Deterministic stem/suffix split for words long enough to carry one.
    static std::optional<std::pair<std::string, std::string>> split_rule(const std::string& w) {
        static constexpr std::array<std::string_view, 7> kSuffixes = {
            "ing", "ed", "es", "ly", "er", "est", "s"};
        if (w.size() < 5) return std::nullopt;
        for (std::string_view suf : kSuffixes) {
            if (w.size() >= suf.size() + 3 && w.substr(w.size() - suf.size()) == suf) {
                return std::make_pair(w.substr(0, w.size() - suf.size()), std::string(suf));
            }
        }
        return std::nullopt;
    }
};

// ---- examples ----

struct ExtractiveAnswer {
    std::string text;
    std::size_t char_start = 0;
};

struct ExtractiveExample {
    std::string id;
    std::string passage;
    std::string question;
    std::vector<ExtractiveAnswer> answers;
    bool is_impossible = false;
    // word-level tags supplied by a generator or a pre-tagged source;
    // empty → run the built-in tagger
    std::vector<PosTag> passage_tags;
    std::vector<PosTag> question_tags;
};

struct ChoiceExample {
    std::string id;
    std::string passage;
    std::string question;
    std::vector<std::string> options;
    std::size_t gold = 0;
    std::vector<PosTag> passage_tags;
    std::vector<PosTag> question_tags;
    std::vector<std::vector<PosTag>> option_tags;
};

// ---- assembled model input ----

struct TokenizedInput {
    std::vector<std::size_t> subword_ids;
    std::vector<std::size_t> segment_ids;
    std::vector<std::size_t> position_ids;
    std::vector<PosTag> tags;
    DomainSplit split;
    std::vector<int> word_index; // into the combined passage+question word list
    std::vector<std::pair<std::size_t, std::size_t>> char_spans; // passage chars
    std::size_t passage_begin = 0; // subword range of passage tokens
    std::size_t passage_end = 0;

    std::size_t length() const { return subword_ids.size(); }

    void validate() const {
        const std::size_t n = subword_ids.size();
        if (segment_ids.size() != n || position_ids.size() != n || tags.size() != n ||
            word_index.size() != n || char_spans.size() != n || split.passage.size() != n ||
            split.question.size() != n || split.non_pad.size() != n) {
            throw DimensionError("TokenizedInput: parallel arrays disagree");
        }
        split.validate();
    }
};

struct ExtractiveInstance {
    std::string id;
    std::string passage;
    std::vector<ExtractiveAnswer> gold_answers;
    bool is_impossible = false;
    TokenizedInput input;
    std::size_t target_start = 0; // (0,0) = [CLS] for unanswerable
    std::size_t target_end = 0;
    bool gold_truncated = false;
};

struct ChoiceInstance {
    std::string id;
    std::size_t gold = 0;
    std::vector<TokenizedInput> inputs; // one per option
};

struct AssembleOptions {
    double corrupt_rate = 0.0;
    std::uint64_t corrupt_seed = 0; // mixed with a per-example salt by callers
};

namespace detail {

struct SidePieces {
    std::vector<WordSpan> words;
    std::vector<PosTag> word_tags;
    std::vector<std::size_t> subword_ids; // flattened
    std::vector<std::size_t> subword_word; // per subword, index into words
};

inline SidePieces tokenize_side(const std::string& text, const std::vector<PosTag>& given_tags,
                                const WordpieceVocab& vocab) {
    SidePieces side;
    side.words = split_words(text);
    if (side.words.empty()) throw InputError("assemble: empty text side");
    if (!given_tags.empty()) {
        if (given_tags.size() != side.words.size()) {
            throw InputError("assemble: supplied tags count " + std::to_string(given_tags.size()) +
                             " vs " + std::to_string(side.words.size()) + " words");
        }
        side.word_tags = given_tags;
    } else {
        std::vector<std::string> surfaces;
        surfaces.reserve(side.words.size());
        for (const auto& w : side.words) surfaces.push_back(w.word);
        side.word_tags = tag_words(surfaces);
    }
    for (std::size_t w = 0; w < side.words.size(); ++w) {
        for (std::size_t id : vocab.encode_word(side.words[w].word)) {
            side.subword_ids.push_back(id);
            side.subword_word.push_back(w);
        }
    }
    return side;
}

// drops passage-tail words until the assembly fits (D: passage tail first,
// never the question/options)
inline void truncate_passage(SidePieces& passage, std::size_t question_subwords,
                             std::size_t max_positions) {
    const std::size_t specials = 3;
    if (question_subwords + specials + 1 > max_positions) {
        throw InputError("assemble: question side alone exceeds max_positions");
    }
    const std::size_t budget = max_positions - specials - question_subwords;
    while (passage.subword_ids.size() > budget) {
        const std::size_t last_word = passage.subword_word.back();
        while (!passage.subword_word.empty() && passage.subword_word.back() == last_word) {
            passage.subword_word.pop_back();
            passage.subword_ids.pop_back();
        }
        if (passage.subword_ids.empty()) {
            throw InputError("assemble: passage truncated to nothing");
        }
    }
}

} // namespace detail

// Core layout: [CLS] P [SEP] Q(+O) [SEP] PAD…, segments 0/0…0/1…1/0…,
// passage domain = P subwords, question domain = Q-side subwords,
// specials/PAD in neither domain.
inline TokenizedInput assemble_sequence(const std::string& passage_text,
                                        const std::vector<PosTag>& passage_tags,
                                        const std::string& question_text,
                                        const std::vector<PosTag>& question_tags,
                                        const ModelConfig& config, const WordpieceVocab& vocab,
                                        const AssembleOptions& opts = {}) {
    detail::SidePieces passage = detail::tokenize_side(passage_text, passage_tags, vocab);
    detail::SidePieces question = detail::tokenize_side(question_text, question_tags, vocab);
    if (opts.corrupt_rate > 0.0) {
        std::vector<PosTag> merged = passage.word_tags;
        merged.insert(merged.end(), question.word_tags.begin(), question.word_tags.end());
        merged = corrupt_tags(merged, opts.corrupt_rate, opts.corrupt_seed);
        std::copy(merged.begin(), merged.begin() + passage.word_tags.size(),
                  passage.word_tags.begin());
        std::copy(merged.begin() + passage.word_tags.size(), merged.end(),
                  question.word_tags.begin());
    }
    detail::truncate_passage(passage, question.subword_ids.size(), config.max_positions);

    const std::size_t n = config.max_positions;
    TokenizedInput out;
    out.subword_ids.reserve(n);
    out.word_index.reserve(n);

    std::vector<int> spans; // alignment markers for the tag layer
    const auto push_special = [&](std::size_t piece, std::size_t segment) {
        out.subword_ids.push_back(piece);
        out.segment_ids.push_back(segment);
        out.word_index.push_back(kSpecialMarker);
        out.char_spans.emplace_back(0, 0);
        spans.push_back(kSpecialMarker);
    };

    push_special(WordpieceVocab::kCls, 0);
    out.passage_begin = out.subword_ids.size();
    for (std::size_t i = 0; i < passage.subword_ids.size(); ++i) {
        const std::size_t w = passage.subword_word[i];
        out.subword_ids.push_back(passage.subword_ids[i]);
        out.segment_ids.push_back(0);
        out.word_index.push_back(static_cast<int>(w));
        out.char_spans.emplace_back(passage.words[w].char_begin, passage.words[w].char_end);
        spans.push_back(static_cast<int>(w));
    }
    out.passage_end = out.subword_ids.size();
    push_special(WordpieceVocab::kSep, 0);
    for (std::size_t i = 0; i < question.subword_ids.size(); ++i) {
        const std::size_t w = question.subword_word[i];
        out.subword_ids.push_back(question.subword_ids[i]);
        out.segment_ids.push_back(1);
        out.word_index.push_back(static_cast<int>(passage.words.size() + w));
        out.char_spans.emplace_back(0, 0);
        spans.push_back(static_cast<int>(passage.words.size() + w));
    }
    push_special(WordpieceVocab::kSep, 1);
    while (out.subword_ids.size() < n) {
        out.subword_ids.push_back(WordpieceVocab::kPad);
        out.segment_ids.push_back(0);
        out.word_index.push_back(kPadMarker);
        out.char_spans.emplace_back(0, 0);
        spans.push_back(kPadMarker);
    }

    std::vector<PosTag> all_word_tags = passage.word_tags;
    all_word_tags.insert(all_word_tags.end(), question.word_tags.begin(),
                         question.word_tags.end());
    out.tags = align_tags_to_subwords(all_word_tags, spans);

    out.position_ids.resize(n);
    for (std::size_t i = 0; i < n; ++i) out.position_ids[i] = i;

    out.split.passage.assign(n, 0);
    out.split.question.assign(n, 0);
    out.split.non_pad.assign(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        out.split.non_pad[i] = (out.subword_ids[i] != WordpieceVocab::kPad) ? 1 : 0;
        if (out.word_index[i] < 0) continue;
        if (i >= out.passage_begin && i < out.passage_end) {
            out.split.passage[i] = 1;
        } else {
            out.split.question[i] = 1;
        }
    }
    out.validate();
    return out;
}

inline ExtractiveInstance assemble(const ExtractiveExample& ex, const ModelConfig& config,
                                   const WordpieceVocab& vocab, const AssembleOptions& opts = {}) {
    ExtractiveInstance inst;
    inst.id = ex.id;
    inst.passage = ex.passage;
    inst.gold_answers = ex.answers;
    inst.is_impossible = ex.is_impossible;
    inst.input = assemble_sequence(ex.passage, ex.passage_tags, ex.question, ex.question_tags,
                                   config, vocab, opts);
    if (!ex.is_impossible) {
        if (ex.answers.empty()) throw InputError("assemble: answerable example without answers");
        const ExtractiveAnswer& gold = ex.answers.front();
        const std::size_t a_begin = gold.char_start;
        const std::size_t a_end = gold.char_start + gold.text.size();
        std::size_t first = 0, last = 0;
        bool found_first = false;
        for (std::size_t i = inst.input.passage_begin; i < inst.input.passage_end; ++i) {
            const auto [cb, ce] = inst.input.char_spans[i];
            if (ce <= a_begin || cb >= a_end) continue;
            if (!found_first) {
                first = i;
                found_first = true;
            }
            last = i;
        }
        if (!found_first) {
            inst.gold_truncated = true;
        } else {
            inst.target_start = first;
            inst.target_end = last;
        }
    }
    return inst;
}

inline ChoiceInstance assemble(const ChoiceExample& ex, const ModelConfig& config,
                               const WordpieceVocab& vocab, const AssembleOptions& opts = {}) {
    if (ex.options.size() < 2) throw InputError("assemble: need at least 2 options");
    if (ex.gold >= ex.options.size()) throw InputError("assemble: gold index out of range");
    ChoiceInstance inst;
    inst.id = ex.id;
    inst.gold = ex.gold;
    for (std::size_t o = 0; o < ex.options.size(); ++o) {
        const std::string q_and_o = ex.question + " " + ex.options[o];
        std::vector<PosTag> qo_tags;
        if (!ex.question_tags.empty() || !ex.option_tags.empty()) {
            if (ex.question_tags.empty() || ex.option_tags.size() != ex.options.size()) {
                throw InputError("assemble: partial tag annotation on choice example");
            }
            qo_tags = ex.question_tags;
            qo_tags.insert(qo_tags.end(), ex.option_tags[o].begin(), ex.option_tags[o].end());
        }
        inst.inputs.push_back(assemble_sequence(ex.passage, ex.passage_tags, q_and_o, qo_tags,
                                                config, vocab, opts));
    }
    return inst;
}

// ---- loaders ----

inline std::vector<PosTag> tags_from_json(const nlohmann::json& arr) {
    std::vector<PosTag> out;
    for (const auto& t : arr) out.push_back(tag_from_name(t.get<std::string>()));
    return out;
}

// SQuAD-style {"data":[{"paragraphs":[{"context","qas":[...]}]}]}
inline std::vector<ExtractiveExample> parse_extractive(const nlohmann::json& root) {
    std::vector<ExtractiveExample> out;
    if (!root.contains("data")) throw ParseError("extractive json: missing \"data\"");
    for (const auto& article : root.at("data")) {
        for (const auto& para : article.at("paragraphs")) {
            const std::string context = para.at("context").get<std::string>();
            std::vector<PosTag> context_tags;
            if (para.contains("context_tags")) context_tags = tags_from_json(para["context_tags"]);
            for (const auto& qa : para.at("qas")) {
                ExtractiveExample ex;
                ex.id = qa.at("id").get<std::string>();
                ex.passage = context;
                ex.passage_tags = context_tags;
                ex.question = qa.at("question").get<std::string>();
                if (qa.contains("question_tags")) {
                    ex.question_tags = tags_from_json(qa["question_tags"]);
                }
                ex.is_impossible = qa.value("is_impossible", false);
                for (const auto& ans : qa.at("answers")) {
                    ExtractiveAnswer a;
                    a.text = ans.at("text").get<std::string>();
                    a.char_start = ans.at("answer_start").get<std::size_t>();
                    if (a.char_start + a.text.size() > context.size() ||
                        context.compare(a.char_start, a.text.size(), a.text) != 0) {
                        throw ParseError("extractive json: answer offset mismatch in qa \"" +
                                         ex.id + "\"");
                    }
                    ex.answers.push_back(std::move(a));
                }
                if (!ex.is_impossible && ex.answers.empty()) {
                    throw ParseError("extractive json: answerable qa \"" + ex.id +
                                     "\" without answers");
                }
                out.push_back(std::move(ex));
            }
        }
    }
    return out;
}

inline std::vector<ExtractiveExample> load_extractive(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open dataset: " + path);
    nlohmann::json root;
    try {
        in >> root;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("extractive json \"" + path + "\": " + e.what());
    }
    return parse_extractive(root);
}

// JSON lines: {"id","article","question","options":[...],"label":int}
inline std::vector<ChoiceExample> load_choice(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open dataset: " + path);
    std::vector<ChoiceExample> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw ParseError("choice jsonl line " + std::to_string(line_no) + ": " + e.what());
        }
        ChoiceExample ex;
        ex.id = j.at("id").get<std::string>();
        ex.passage = j.at("article").get<std::string>();
        ex.question = j.at("question").get<std::string>();
        for (const auto& o : j.at("options")) ex.options.push_back(o.get<std::string>());
        const long long label = j.at("label").get<long long>();
        if (label < 0 || static_cast<std::size_t>(label) >= ex.options.size()) {
            throw ParseError("choice jsonl line " + std::to_string(line_no) +
                             ": label out of range");
        }
        ex.gold = static_cast<std::size_t>(label);
        if (j.contains("article_tags")) ex.passage_tags = tags_from_json(j["article_tags"]);
        if (j.contains("question_tags")) ex.question_tags = tags_from_json(j["question_tags"]);
        if (j.contains("option_tags")) {
            for (const auto& arr : j["option_tags"]) ex.option_tags.push_back(tags_from_json(arr));
        }
        out.push_back(std::move(ex));
    }
    return out;
}

// ---- synthetic generators ----

namespace detail {

inline std::string join_words(const std::vector<std::string>& words) {
    std::string out;
    for (std::size_t i = 0; i < words.size(); ++i) {
        if (i > 0) out += ' ';
        out += words[i];
    }
    return out;
}

inline std::size_t char_offset_of_word(const std::vector<std::string>& words, std::size_t index) {
    std::size_t off = 0;
    for (std::size_t i = 0; i < index; ++i) off += words[i].size() + 1;
    return off;
}

template <class Rng>
std::vector<std::size_t> sample_distinct(Rng& rng, std::size_t pool, std::size_t n) {
    std::vector<std::size_t> ids(pool);
    for (std::size_t i = 0; i < pool; ++i) ids[i] = i;
    for (std::size_t i = 0; i < n; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, pool - 1);
        std::swap(ids[i], ids[pick(rng)]);
    }
    ids.resize(n);
    return ids;
}

} // namespace detail

// Passages plant a key token followed by a two-word answer span. With
// pos_dependency the passage carries two candidate blocks after the same key
// word — answer (NNP NNP) and decoy (VBD NNP) — drawn from one surface pool,
// so only the tags separate them. Every fifth example is unanswerable.
inline std::vector<ExtractiveExample> generate_synthetic_extractive(std::uint64_t seed,
                                                                    std::size_t size,
                                                                    bool pos_dependency) {
    std::mt19937_64 rng(mix_seed(seed, 0x5ead));
    constexpr std::size_t kKeyPool = 12, kSpanPool = 20, kFillPool = 10;
    const auto key_word = [](std::size_t i) { return "key" + std::to_string(i); };
    const auto span_word = [](std::size_t i) { return "tok" + std::to_string(i); };
    const auto fill_word = [](std::size_t i) { return "fil" + std::to_string(i); };

    std::vector<ExtractiveExample> out;
    out.reserve(size);
    for (std::size_t n = 0; n < size; ++n) {
        const bool unanswerable = (n % 5 == 4);
        std::uniform_int_distribution<std::size_t> key_pick(0, kKeyPool - 1);
        std::uniform_int_distribution<std::size_t> fill_pick(0, kFillPool - 1);
        std::uniform_int_distribution<std::size_t> fill_len(1, 3);
        const std::string key = key_word(key_pick(rng));

        std::vector<std::string> words;
        std::vector<PosTag> tags;
        const auto push = [&](const std::string& w, PosTag t) {
            words.push_back(w);
            tags.push_back(t);
        };
        const auto push_filler = [&](std::size_t count) {
            for (std::size_t i = 0; i < count; ++i) push(fill_word(fill_pick(rng)), PosTag::NN);
        };

        std::size_t answer_word_index = 0;
        std::string answer_text;
        if (pos_dependency) {
            const auto picks = detail::sample_distinct(rng, kSpanPool, 4);
            const std::string w1 = span_word(picks[0]), w2 = span_word(picks[1]);
            const std::string d1 = span_word(picks[2]), d2 = span_word(picks[3]);
            std::uniform_int_distribution<int> coin(0, 1);
            const bool true_first = coin(rng) == 1;
            const auto push_block = [&](const std::string& a, const std::string& b, bool is_true) {
                push(key, PosTag::NN);
                if (is_true && !unanswerable) answer_word_index = words.size();
                push(a, is_true && !unanswerable ? PosTag::NNP : PosTag::VBD);
                push(b, PosTag::NNP);
            };
            push_filler(fill_len(rng));
            push_block(true_first ? w1 : d1, true_first ? w2 : d2, true_first);
            push_filler(fill_len(rng));
            push_block(true_first ? d1 : w1, true_first ? d2 : w2, !true_first);
            push_filler(fill_len(rng));
            if (!unanswerable) answer_text = w1 + " " + w2;
        } else {
            const std::size_t f1 = fill_len(rng) + 1, f2 = fill_len(rng) + 1;
            if (unanswerable) {
                push_filler(f1 + f2 + 3);
            } else {
                const auto picks = detail::sample_distinct(rng, kSpanPool, 2);
                push_filler(f1);
                push(key, PosTag::NN);
                answer_word_index = words.size();
                push(span_word(picks[0]), PosTag::NNP);
                push(span_word(picks[1]), PosTag::NNP);
                push_filler(f2);
                answer_text = span_word(picks[0]) + " " + span_word(picks[1]);
            }
        }

        ExtractiveExample ex;
        ex.id = "synx-" + std::to_string(seed) + "-" + std::to_string(n);
        ex.passage = detail::join_words(words);
        ex.passage_tags = tags;
        ex.question = "which " + key;
        ex.question_tags = {PosTag::WDT, PosTag::NN};
        ex.is_impossible = unanswerable;
        if (!unanswerable) {
            ExtractiveAnswer a;
            a.text = answer_text;
            a.char_start = detail::char_offset_of_word(words, answer_word_index);
            ex.answers.push_back(std::move(a));
        }
        out.push_back(std::move(ex));
    }
    return out;
}

// Passages scatter k attribute/value facts ("attra val7") among filler drawn
// from the value pool itself, so raw word presence carries no signal — every
// value word may appear anywhere. Options restate all k attribute/value
// pairs; each wrong option falsifies exactly one slot (round-robin over
// slots) with a value from the pool, leaving it consistent with k−1 facts.
// Deciding requires matching attribute-typed values between the two domains.
inline std::vector<ChoiceExample> generate_synthetic_choice(std::uint64_t seed, std::size_t size,
                                                            std::size_t scattered_facts) {
    if (scattered_facts < 1 || scattered_facts > 4) {
        throw InputError("generate_synthetic_choice: scattered_facts must be 1..4");
    }
    const std::size_t k = scattered_facts;
    std::mt19937_64 rng(mix_seed(seed, 0xc401ce));
    constexpr std::size_t kValuePool = 24, kOptions = 4;
    const std::array<std::string, 4> attr_words = {"attra", "attrb", "attrc", "attrd"};
    const auto value_word = [](std::size_t i) { return "val" + std::to_string(i); };

    std::vector<ChoiceExample> out;
    out.reserve(size);
    for (std::size_t n = 0; n < size; ++n) {
        const auto picks = detail::sample_distinct(rng, kValuePool, k + 1);
        std::vector<std::string> truth(k);
        for (std::size_t j = 0; j < k; ++j) truth[j] = value_word(picks[j]);
        const std::string off_value = value_word(picks[k]);

        // passage: fact pairs in shuffled order, loose value words between
        std::vector<std::vector<std::string>> chunks;
        for (std::size_t j = 0; j < k; ++j) chunks.push_back({attr_words[j], truth[j]});
        for (std::size_t i = chunks.size(); i > 1; --i) {
            std::uniform_int_distribution<std::size_t> pick(0, i - 1);
            std::swap(chunks[i - 1], chunks[pick(rng)]);
        }
        std::uniform_int_distribution<std::size_t> fill_pick(0, kValuePool - 1);
        std::uniform_int_distribution<std::size_t> fill_len(1, 3);
        std::vector<std::string> words;
        const auto push_filler = [&](std::size_t count) {
            for (std::size_t i = 0; i < count; ++i) words.push_back(value_word(fill_pick(rng)));
        };
        push_filler(fill_len(rng));
        for (const auto& chunk : chunks) {
            for (const auto& w : chunk) words.push_back(w);
            push_filler(fill_len(rng));
        }

        // wrong options falsify distinct slots (round-robin over a shuffled
        // slot order) with a different value of the same attribute
        std::vector<std::size_t> slot_order(k);
        for (std::size_t j = 0; j < k; ++j) slot_order[j] = j;
        for (std::size_t i = k; i > 1; --i) {
            std::uniform_int_distribution<std::size_t> pick(0, i - 1);
            std::swap(slot_order[i - 1], slot_order[pick(rng)]);
        }
        std::uniform_int_distribution<std::size_t> gold_pick(0, kOptions - 1);
        const std::size_t gold = gold_pick(rng);
        ChoiceExample ex;
        ex.id = "sync-" + std::to_string(seed) + "-" + std::to_string(n);
        ex.passage = detail::join_words(words);
        ex.passage_tags.assign(words.size(), PosTag::NN);
        ex.question = "which";
        ex.question_tags = {PosTag::WDT};
        ex.gold = gold;
        std::size_t wrong_rank = 0;
        for (std::size_t o = 0; o < kOptions; ++o) {
            std::vector<std::string> claim = truth;
            if (o != gold) {
                const std::size_t slot = slot_order[wrong_rank % k];
                if (k >= 2) {
                    std::uniform_int_distribution<std::size_t> other(0, k - 2);
                    std::size_t donor = other(rng);
                    if (donor >= slot) ++donor;
                    claim[slot] = truth[donor];
                } else {
                    claim[slot] = off_value;
                }
                ++wrong_rank;
            }
            std::vector<std::string> option_words;
            for (std::size_t j = 0; j < k; ++j) {
                option_words.push_back(attr_words[j]);
                option_words.push_back(claim[j]);
            }
            ex.options.push_back(detail::join_words(option_words));
            ex.option_tags.push_back(std::vector<PosTag>(option_words.size(), PosTag::NN));
        }
        out.push_back(std::move(ex));
    }
    return out;
}

// Every distinct word that any assembly of these examples can see, for
// vocabulary construction.
inline std::vector<std::string> corpus_words(const std::vector<ExtractiveExample>& examples) {
    std::vector<std::string> words;
    for (const auto& ex : examples) {
        for (const auto& w : split_words(ex.passage)) words.push_back(w.word);
        for (const auto& w : split_words(ex.question)) words.push_back(w.word);
    }
    return words;
}

inline std::vector<std::string> corpus_words(const std::vector<ChoiceExample>& examples) {
    std::vector<std::string> words;
    for (const auto& ex : examples) {
        for (const auto& w : split_words(ex.passage)) words.push_back(w.word);
        for (const auto& w : split_words(ex.question)) words.push_back(w.word);
        for (const auto& o : ex.options) {
            for (const auto& w : split_words(o)) words.push_back(w.word);
        }
    }
    return words;
}

} // namespace poinet
