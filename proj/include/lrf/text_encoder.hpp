// SPDX-License-Identifier: MIT
//
// Deterministic text branch: a closed vocabulary built from the synthetic
// prompt grammar, whitespace/punctuation tokenization to a fixed length of
// 30, and a trainable embedding table mapping token ids to a C x 30 feature.

#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "lrf/tensor.hpp"

namespace lrf {

inline constexpr int kTokenLen = 30;

struct Vocabulary {
    // id 0 = PAD, id 1 = UNK, then the grammar words in fixed order.
    std::vector<std::string> tokens;
    std::unordered_map<std::string, int> ids;

    static constexpr int kPad = 0;
    static constexpr int kUnk = 1;

    static Vocabulary build_default();

    int id(const std::string& tok) const;
    int size() const { return static_cast<int>(tokens.size()); }

    // Plain text file, one token per line, line number = id.
    void save(const std::string& path) const;
    static Vocabulary load(const std::string& path);
};

// Lowercase, split on anything that is not a letter or digit.
std::vector<std::string> split_words(const std::string& text);

// Token ids, padded/truncated to exactly kTokenLen. Empty prompts rejected.
std::vector<int> tokenize(const std::string& prompt, const Vocabulary& vocab);

class TextEncoder {
public:
    TextEncoder(Vocabulary vocab, int channels, std::mt19937_64& rng);

    // f_t: [C, kTokenLen]; column i is the table column of token i.
    Tensor embed(const std::vector<int>& tokens) const;
    Tensor embed_prompt(const std::string& prompt) const;

    const Vocabulary& vocab() const { return vocab_; }
    int channels() const { return channels_; }
    Tensor& table() { return table_; }  // [C, V], trainable leaf
    const Tensor& table() const { return table_; }

private:
    Vocabulary vocab_;
    int channels_;
    Tensor table_;
};

}  // namespace lrf
