#pragma once

// Closed 39-tag part-of-speech vocabulary (36 Penn Treebank tags + SPE for
// special tokens, PAD for padding, ERR for unrecognized tokens), a
// deterministic lexicon/suffix tagger, word→subword tag alignment, and the
// tag-corruption knob used by robustness sweeps.

#include <array>
#include <cctype>
#include <cstdint>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "poinet/errors.hpp"

namespace poinet {

enum class PosTag : std::uint8_t {
    CC, CD, DT, EX, FW, IN, JJ, JJR, JJS, LS, MD, NN, NNS, NNP, NNPS, PDT,
    POS, PRP, PRPS, RB, RBR, RBS, RP, SYM, TO, UH, VB, VBD, VBG, VBN, VBP,
    VBZ, WDT, WP, WPS, WRB, SPE, PAD, ERR,
};

inline constexpr std::size_t kPosTagCount = 39;
inline constexpr std::size_t kLinguisticTagCount = 36; // everything before SPE

inline constexpr std::array<std::string_view, kPosTagCount> kPosTagNames = {
    "CC", "CD", "DT", "EX", "FW", "IN", "JJ", "JJR", "JJS", "LS", "MD", "NN",
    "NNS", "NNP", "NNPS", "PDT", "POS", "PRP", "PRP$", "RB", "RBR", "RBS",
    "RP", "SYM", "TO", "UH", "VB", "VBD", "VBG", "VBN", "VBP", "VBZ", "WDT",
    "WP", "WP$", "WRB", "SPE", "PAD", "ERR",
};

inline std::size_t tag_id(PosTag t) { return static_cast<std::size_t>(t); }

inline PosTag tag_from_id(std::size_t id) {
    if (id >= kPosTagCount) throw LookupError("tag_from_id: id " + std::to_string(id));
    return static_cast<PosTag>(id);
}

inline std::string_view tag_name(PosTag t) { return kPosTagNames[tag_id(t)]; }

inline PosTag tag_from_name(std::string_view name) {
    for (std::size_t i = 0; i < kPosTagCount; ++i) {
        if (kPosTagNames[i] == name) return static_cast<PosTag>(i);
    }
    throw ParseError("unknown POS tag \"" + std::string(name) + "\"");
}

inline bool is_linguistic(PosTag t) { return tag_id(t) < kLinguisticTagCount; }

struct TaggedWord {
    std::string surface;
    PosTag tag = PosTag::NN;
};

namespace detail {

inline const std::unordered_map<std::string_view, PosTag>& tagger_lexicon() {
    static const std::unordered_map<std::string_view, PosTag> lex = {
        // determiners
        {"the", PosTag::DT}, {"a", PosTag::DT}, {"an", PosTag::DT},
        {"this", PosTag::DT}, {"that", PosTag::DT}, {"these", PosTag::DT},
        {"those", PosTag::DT}, {"each", PosTag::DT}, {"every", PosTag::DT},
        {"some", PosTag::DT}, {"any", PosTag::DT}, {"no", PosTag::DT},
        {"another", PosTag::DT},
        // predeterminers
        {"all", PosTag::PDT}, {"both", PosTag::PDT}, {"half", PosTag::PDT},
        // prepositions / subordinating conjunctions
        {"in", PosTag::IN}, {"on", PosTag::IN}, {"at", PosTag::IN},
        {"of", PosTag::IN}, {"by", PosTag::IN}, {"for", PosTag::IN},
        {"with", PosTag::IN}, {"from", PosTag::IN}, {"into", PosTag::IN},
        {"over", PosTag::IN}, {"under", PosTag::IN}, {"between", PosTag::IN},
        {"among", PosTag::IN}, {"during", PosTag::IN}, {"after", PosTag::IN},
        {"before", PosTag::IN}, {"about", PosTag::IN}, {"against", PosTag::IN},
        {"through", PosTag::IN}, {"without", PosTag::IN}, {"within", PosTag::IN},
        {"upon", PosTag::IN}, {"across", PosTag::IN}, {"above", PosTag::IN},
        {"below", PosTag::IN}, {"near", PosTag::IN}, {"since", PosTag::IN},
        {"until", PosTag::IN}, {"while", PosTag::IN}, {"because", PosTag::IN},
        {"if", PosTag::IN}, {"than", PosTag::IN}, {"as", PosTag::IN},
        {"although", PosTag::IN}, {"though", PosTag::IN},
        {"to", PosTag::TO},
        // coordinating conjunctions
        {"and", PosTag::CC}, {"or", PosTag::CC}, {"but", PosTag::CC},
        {"nor", PosTag::CC}, {"yet", PosTag::CC}, {"so", PosTag::CC},
        {"plus", PosTag::CC},
        // existential
        {"there", PosTag::EX},
        // modals
        {"can", PosTag::MD}, {"could", PosTag::MD}, {"may", PosTag::MD},
        {"might", PosTag::MD}, {"must", PosTag::MD}, {"shall", PosTag::MD},
        {"should", PosTag::MD}, {"will", PosTag::MD}, {"would", PosTag::MD},
        // personal pronouns
        {"i", PosTag::PRP}, {"you", PosTag::PRP}, {"he", PosTag::PRP},
        {"she", PosTag::PRP}, {"it", PosTag::PRP}, {"we", PosTag::PRP},
        {"they", PosTag::PRP}, {"me", PosTag::PRP}, {"him", PosTag::PRP},
        {"us", PosTag::PRP}, {"them", PosTag::PRP}, {"himself", PosTag::PRP},
        {"herself", PosTag::PRP}, {"itself", PosTag::PRP},
        {"myself", PosTag::PRP}, {"themselves", PosTag::PRP},
        // possessive pronouns
        {"my", PosTag::PRPS}, {"your", PosTag::PRPS}, {"his", PosTag::PRPS},
        {"her", PosTag::PRPS}, {"its", PosTag::PRPS}, {"our", PosTag::PRPS},
        {"their", PosTag::PRPS}, {"mine", PosTag::PRPS}, {"yours", PosTag::PRPS},
        {"hers", PosTag::PRPS}, {"ours", PosTag::PRPS}, {"theirs", PosTag::PRPS},
        // wh-words
        {"which", PosTag::WDT}, {"what", PosTag::WDT},
        {"who", PosTag::WP}, {"whom", PosTag::WP},
        {"whose", PosTag::WPS},
        {"where", PosTag::WRB}, {"when", PosTag::WRB}, {"why", PosTag::WRB},
        {"how", PosTag::WRB},
        // frequent verbs (be/have/do)
        {"is", PosTag::VBZ}, {"are", PosTag::VBP}, {"am", PosTag::VBP},
        {"was", PosTag::VBD}, {"were", PosTag::VBD}, {"be", PosTag::VB},
        {"been", PosTag::VBN}, {"being", PosTag::VBG},
        {"has", PosTag::VBZ}, {"have", PosTag::VBP}, {"had", PosTag::VBD},
        {"does", PosTag::VBZ}, {"do", PosTag::VBP}, {"did", PosTag::VBD},
        {"done", PosTag::VBN},
        // adverbs & particles
        {"not", PosTag::RB}, {"n't", PosTag::RB}, {"very", PosTag::RB},
        {"too", PosTag::RB}, {"also", PosTag::RB}, {"just", PosTag::RB},
        {"never", PosTag::RB}, {"always", PosTag::RB}, {"often", PosTag::RB},
        {"again", PosTag::RB}, {"here", PosTag::RB}, {"now", PosTag::RB},
        {"then", PosTag::RB}, {"quite", PosTag::RB}, {"rather", PosTag::RB},
        {"up", PosTag::RP}, {"out", PosTag::RP}, {"off", PosTag::RP},
        {"down", PosTag::RP},
        // comparatives / superlatives
        {"more", PosTag::RBR}, {"less", PosTag::RBR},
        {"most", PosTag::RBS}, {"least", PosTag::RBS},
        {"better", PosTag::JJR}, {"worse", PosTag::JJR},
        {"best", PosTag::JJS}, {"worst", PosTag::JJS},
        // interjections
        {"oh", PosTag::UH}, {"hey", PosTag::UH}, {"wow", PosTag::UH},
        {"ah", PosTag::UH}, {"hello", PosTag::UH},
        // spelled-out numbers
        {"one", PosTag::CD}, {"two", PosTag::CD}, {"three", PosTag::CD},
        {"four", PosTag::CD}, {"five", PosTag::CD}, {"six", PosTag::CD},
        {"seven", PosTag::CD}, {"eight", PosTag::CD}, {"nine", PosTag::CD},
        {"ten", PosTag::CD}, {"hundred", PosTag::CD}, {"thousand", PosTag::CD},
        {"million", PosTag::CD},
        // possessive ending (kept as its own token by the word splitter)
        {"'s", PosTag::POS},
    };
    return lex;
}

inline std::string to_lower(std::string_view w) {
    std::string out(w);
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

inline bool starts_upper(std::string_view w) {
    return !w.empty() && std::isupper(static_cast<unsigned char>(w[0]));
}

inline bool all_upper_alpha(std::string_view w) {
    if (w.size() < 2) return false;
    for (char c : w) {
        if (!std::isupper(static_cast<unsigned char>(c))) return false;
    }
    return true;
}

inline bool is_number_like(std::string_view w) {
    bool digit = false;
    for (char c : w) {
        if (std::isdigit(static_cast<unsigned char>(c))) {
            digit = true;
        } else if (c != '.' && c != ',' && c != '-' && c != '/' && c != '%') {
            return false;
        }
    }
    return digit;
}

inline bool has_alnum(std::string_view w) {
    for (char c : w) {
        if (std::isalnum(static_cast<unsigned char>(c))) return true;
    }
    return false;
}

inline bool is_symbol_word(std::string_view w) {
    static constexpr std::string_view kSymbols = "$%&+=<>^|~#@*/";
    if (w.size() != 1) return false;
    return kSymbols.find(w[0]) != std::string_view::npos;
}

inline bool ends_with(std::string_view w, std::string_view suf) {
    return w.size() >= suf.size() && w.substr(w.size() - suf.size()) == suf;
}

// suffix + fallback rules on an already-lowercased word
inline PosTag tag_by_shape(const std::string& lw) {
    if (ends_with(lw, "ed") && lw.size() > 3) return PosTag::VBD;
    if (ends_with(lw, "ing") && lw.size() > 4) return PosTag::VBG;
    if (ends_with(lw, "ly") && lw.size() > 3) return PosTag::RB;
    if (ends_with(lw, "s") && !ends_with(lw, "ss") && lw.size() > 3) return PosTag::NNS;
    return PosTag::NN;
}

} // namespace detail

// Deterministic tagger: closed-class lexicon, digit rule, capitalization rule
// (non-sentence-initial capitalized word → NNP), suffix rules, fallback NN.
// Never produces SPE or PAD; pure-punctuation words map to SYM or ERR.
inline std::vector<PosTag> tag_words(const std::vector<std::string>& words) {
    if (words.empty()) throw InputError("tag_words: empty word sequence");
    std::vector<PosTag> tags;
    tags.reserve(words.size());
    const auto& lex = detail::tagger_lexicon();
    for (std::size_t i = 0; i < words.size(); ++i) {
        const std::string& w = words[i];
        if (w.empty()) throw InputError("tag_words: empty word at position " + std::to_string(i));
        for (char c : w) {
            if (std::isspace(static_cast<unsigned char>(c))) {
                throw InputError("tag_words: interior whitespace in \"" + w + "\"");
            }
        }
        if (!detail::has_alnum(w) && w != "'s" && w != "n't") {
            tags.push_back(detail::is_symbol_word(w) ? PosTag::SYM : PosTag::ERR);
            continue;
        }
        const std::string lw = detail::to_lower(w);
        if (auto it = lex.find(lw); it != lex.end()) {
            tags.push_back(it->second);
            continue;
        }
        if (detail::is_number_like(w)) {
            tags.push_back(PosTag::CD);
            continue;
        }
        if (detail::all_upper_alpha(w) || (detail::starts_upper(w) && i > 0)) {
            tags.push_back(detail::ends_with(lw, "s") && !detail::ends_with(lw, "ss") &&
                                   lw.size() > 3
                               ? PosTag::NNPS
                               : PosTag::NNP);
            continue;
        }
        tags.push_back(detail::tag_by_shape(lw));
    }
    return tags;
}

inline std::vector<PosTag> tag_words(const std::vector<TaggedWord>& words) {
    std::vector<std::string> surfaces;
    surfaces.reserve(words.size());
    for (const auto& w : words) surfaces.push_back(w.surface);
    return tag_words(surfaces);
}

// Subword span markers for alignment.
inline constexpr int kSpecialMarker = -1;
inline constexpr int kPadMarker = -2;

// Subwords of one word share that word's tag; special positions get SPE,
// padding positions get PAD.
inline std::vector<PosTag> align_tags_to_subwords(const std::vector<PosTag>& word_tags,
                                                  const std::vector<int>& subword_spans) {
    std::vector<PosTag> out;
    out.reserve(subword_spans.size());
    for (int marker : subword_spans) {
        if (marker == kSpecialMarker) {
            out.push_back(PosTag::SPE);
        } else if (marker == kPadMarker) {
            out.push_back(PosTag::PAD);
        } else if (marker < 0 || static_cast<std::size_t>(marker) >= word_tags.size()) {
            throw AlignmentError("align_tags_to_subwords: word index " + std::to_string(marker) +
                                 " out of range (have " + std::to_string(word_tags.size()) +
                                 " words)");
        } else {
            out.push_back(word_tags[static_cast<std::size_t>(marker)]);
        }
    }
    return out;
}

// Replaces exactly round(rate × corruptible) positions with a uniformly chosen
// different linguistic tag. SPE/PAD positions are never touched. Deterministic
// for a given seed.
inline std::vector<PosTag> corrupt_tags(const std::vector<PosTag>& tags, double rate,
                                        std::uint64_t seed) {
    if (rate < 0.0 || rate > 1.0) throw InputError("corrupt_tags: rate outside [0,1]");
    std::vector<PosTag> out = tags;
    std::vector<std::size_t> corruptible;
    for (std::size_t i = 0; i < tags.size(); ++i) {
        if (tags[i] != PosTag::SPE && tags[i] != PosTag::PAD) corruptible.push_back(i);
    }
    const std::size_t n_corrupt =
        static_cast<std::size_t>(std::llround(rate * static_cast<double>(corruptible.size())));
    if (n_corrupt == 0) return out;
    std::mt19937_64 rng(seed);
    // Fisher-Yates prefix selects the corrupted positions.
    for (std::size_t i = 0; i < n_corrupt; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, corruptible.size() - 1);
        std::swap(corruptible[i], corruptible[pick(rng)]);
    }
    for (std::size_t i = 0; i < n_corrupt; ++i) {
        const std::size_t pos = corruptible[i];
        std::size_t replacement;
        if (is_linguistic(out[pos])) {
            std::uniform_int_distribution<std::size_t> pick(0, kLinguisticTagCount - 2);
            replacement = pick(rng);
            if (replacement >= tag_id(out[pos])) ++replacement; // skip the original tag
        } else {
            std::uniform_int_distribution<std::size_t> pick(0, kLinguisticTagCount - 1);
            replacement = pick(rng); // ERR originals can take any linguistic tag
        }
        out[pos] = tag_from_id(replacement);
    }
    return out;
}

// Pre-tagged file format: "surface<TAB>TAG" per line, blank line between
// sequences, UTF-8. Unknown tag strings are a hard parse error.
inline std::vector<std::vector<TaggedWord>> parse_pretagged(std::istream& in) {
    std::vector<std::vector<TaggedWord>> sequences;
    std::vector<TaggedWord> current;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) {
            if (!current.empty()) sequences.push_back(std::move(current));
            current.clear();
            continue;
        }
        const std::size_t tab = line.find('\t');
        if (tab == std::string::npos) {
            throw ParseError("pretagged line " + std::to_string(line_no) + ": missing tab");
        }
        TaggedWord w;
        w.surface = line.substr(0, tab);
        if (w.surface.empty()) {
            throw ParseError("pretagged line " + std::to_string(line_no) + ": empty surface");
        }
        try {
            w.tag = tag_from_name(line.substr(tab + 1));
        } catch (const ParseError& e) {
            throw ParseError("pretagged line " + std::to_string(line_no) + ": " + e.what());
        }
        current.push_back(std::move(w));
    }
    if (!current.empty()) sequences.push_back(std::move(current));
    return sequences;
}

inline std::vector<std::vector<TaggedWord>> load_pretagged(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open pretagged file: " + path);
    return parse_pretagged(in);
}

inline void write_pretagged(std::ostream& out,
                            const std::vector<std::vector<TaggedWord>>& sequences) {
    for (std::size_t s = 0; s < sequences.size(); ++s) {
        if (s > 0) out << '\n';
        for (const TaggedWord& w : sequences[s]) {
            out << w.surface << '\t' << tag_name(w.tag) << '\n';
        }
    }
}

} // namespace poinet
