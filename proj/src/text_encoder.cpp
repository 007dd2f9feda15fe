// SPDX-License-Identifier: MIT

#include "lrf/text_encoder.hpp"

#include <cctype>
#include <fstream>
#include <stdexcept>

namespace lrf {

Vocabulary Vocabulary::build_default() {
    // Fixed grammar word list; order defines the ids, so the mapping is
    // deterministic by construction.
    static const char* kWords[] = {
        "<pad>", "<unk>",
        // structure words
        "the", "a", "that", "is", "at", "about", "than", "of",
        // classes
        "car", "pedestrian", "cyclist",
        // motion / speed
        "moving", "parked", "stationary", "faster", "slower", "speed", "m", "s",
        // depth
        "meters", "away", "closer", "farther",
        // numerals used by the templates
        "1", "2", "3", "4", "5", "6", "7", "8", "9", "10",
        "15", "25", "35", "45", "55",
    };
    Vocabulary v;
    for (const char* w : kWords) {
        v.ids.emplace(w, static_cast<int>(v.tokens.size()));
        v.tokens.emplace_back(w);
    }
    return v;
}

int Vocabulary::id(const std::string& tok) const {
    auto it = ids.find(tok);
    return it == ids.end() ? kUnk : it->second;
}

void Vocabulary::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("vocabulary: cannot write " + path);
    for (const std::string& t : tokens) out << t << "\n";
}

Vocabulary Vocabulary::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("vocabulary: cannot read " + path);
    Vocabulary v;
    std::string line;
    while (std::getline(in, line)) {
        v.ids.emplace(line, static_cast<int>(v.tokens.size()));
        v.tokens.push_back(line);
    }
    if (v.tokens.size() < 2 || v.tokens[0] != "<pad>" || v.tokens[1] != "<unk>")
        throw std::runtime_error("vocabulary: " + path + " lacks <pad>/<unk> header rows");
    return v;
}

std::vector<std::string> split_words(const std::string& text) {
    std::vector<std::string> words;
    std::string cur;
    for (char ch : text) {
        unsigned char u = static_cast<unsigned char>(ch);
        if (std::isalnum(u)) {
            cur.push_back(static_cast<char>(std::tolower(u)));
        } else if (!cur.empty()) {
            words.push_back(cur);
            cur.clear();
        }
    }
    if (!cur.empty()) words.push_back(cur);
    return words;
}

std::vector<int> tokenize(const std::string& prompt, const Vocabulary& vocab) {
    std::vector<std::string> words = split_words(prompt);
    if (words.empty()) throw std::invalid_argument("tokenize: empty prompt");
    std::vector<int> out(kTokenLen, Vocabulary::kPad);
    for (size_t i = 0; i < words.size() && i < kTokenLen; ++i) out[i] = vocab.id(words[i]);
    return out;
}

TextEncoder::TextEncoder(Vocabulary vocab, int channels, std::mt19937_64& rng)
    : vocab_(std::move(vocab)), channels_(channels) {
    table_ = Tensor::param({channels_, vocab_.size()}, channels_, rng);
}

Tensor TextEncoder::embed(const std::vector<int>& tokens) const {
    if (tokens.size() != kTokenLen)
        throw std::invalid_argument("embed: expected " + std::to_string(kTokenLen) +
                                    " token ids, got " + std::to_string(tokens.size()));
    for (int id : tokens)
        if (id < 0 || id >= vocab_.size())
            throw std::invalid_argument("embed: token id " + std::to_string(id) +
                                        " outside vocabulary of size " +
                                        std::to_string(vocab_.size()));
    // The table is [C, V]; viewing it as [C, V, 1] lets the gather primitive
    // pick one column per token with the scatter-add backward for free.
    Tensor view = reshape(table_, {channels_, vocab_.size(), 1});
    return gather_cells(view, tokens);
}

Tensor TextEncoder::embed_prompt(const std::string& prompt) const {
    return embed(tokenize(prompt, vocab_));
}

}  // namespace lrf
