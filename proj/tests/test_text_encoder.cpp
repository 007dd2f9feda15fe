// SPDX-License-Identifier: MIT

#include "lrf/text_encoder.hpp"

#include <cstdio>
#include <random>

#include "testing.hpp"

using lrf::Tensor;
using lrf::Vocabulary;

namespace {

std::mt19937_64 rng(7);

void test_vocabulary() {
    Vocabulary v = Vocabulary::build_default();
    REQUIRE(v.tokens[0] == "<pad>", "id 0 is PAD");
    REQUIRE(v.tokens[1] == "<unk>", "id 1 is UNK");
    REQUIRE(v.id("car") > 1, "grammar word resolves");
    REQUIRE(v.id("zeppelin") == Vocabulary::kUnk, "out-of-vocabulary word maps to UNK");
    Vocabulary v2 = Vocabulary::build_default();
    REQUIRE(v.tokens == v2.tokens, "vocabulary construction is deterministic");

    const char* path = "vocab_roundtrip.txt";
    v.save(path);
    Vocabulary loaded = Vocabulary::load(path);
    REQUIRE(loaded.tokens == v.tokens, "save/load round trip");
    std::remove(path);
}

void test_tokenize() {
    Vocabulary v = Vocabulary::build_default();
    REQUIRE_THROWS(lrf::tokenize("", v), "empty prompt rejected");
    REQUIRE_THROWS(lrf::tokenize("  ,,  ", v), "punctuation-only prompt rejected");

    auto ids = lrf::tokenize("The moving car", v);
    REQUIRE(ids.size() == lrf::kTokenLen, "token length is exactly 30");
    REQUIRE(ids[0] == v.id("the"), "lowercased match");
    REQUIRE(ids[1] == v.id("moving"), "word split");
    REQUIRE(ids[2] == v.id("car"), "word split");
    REQUIRE(ids[3] == Vocabulary::kPad, "padded with PAD");
    REQUIRE(ids[29] == Vocabulary::kPad, "padded to the end");

    auto ids2 = lrf::tokenize("the zeppelin, about 15 meters away!", v);
    REQUIRE(ids2[1] == Vocabulary::kUnk, "unknown word becomes UNK in place");
    REQUIRE(ids2[3] == v.id("15"), "numerals survive punctuation splitting");

    // Long prompts truncate at 30.
    std::string longp;
    for (int i = 0; i < 40; ++i) longp += "car ";
    auto ids3 = lrf::tokenize(longp, v);
    REQUIRE(ids3.size() == lrf::kTokenLen, "truncation to 30");
    REQUIRE(ids3[29] == v.id("car"), "last slot filled when truncating");

    // Idempotence: re-tokenizing the joined token words changes nothing.
    std::string joined;
    for (int id : ids) {
        if (id == Vocabulary::kPad) break;
        joined += v.tokens[id] + " ";
    }
    REQUIRE(lrf::tokenize(joined, v) == ids, "tokenize is idempotent on tokenized text");
}

void test_embedding() {
    Vocabulary v = Vocabulary::build_default();
    lrf::TextEncoder enc(v, 8, rng);

    auto pads = std::vector<int>(lrf::kTokenLen, Vocabulary::kPad);
    Tensor fpad = enc.embed(pads);
    REQUIRE(fpad.shape() == (std::vector<int>{8, lrf::kTokenLen}), "embedding shape C x 30");
    for (int c = 0; c < 8; ++c)
        for (int i = 1; i < lrf::kTokenLen; ++i)
            REQUIRE_NEAR(fpad.value()[c * lrf::kTokenLen + i],
                         fpad.value()[c * lrf::kTokenLen], 0.0,
                         "all-PAD input gives 30 identical columns");

    // Permuting two non-PAD tokens permutes the corresponding columns.
    auto a = lrf::tokenize("car pedestrian moving", v);
    auto b = lrf::tokenize("pedestrian car moving", v);
    Tensor fa = enc.embed(a);
    Tensor fb = enc.embed(b);
    for (int c = 0; c < 8; ++c) {
        REQUIRE_NEAR(fa.value()[c * 30 + 0], fb.value()[c * 30 + 1], 0.0, "column permutation");
        REQUIRE_NEAR(fa.value()[c * 30 + 1], fb.value()[c * 30 + 0], 0.0, "column permutation");
        REQUIRE_NEAR(fa.value()[c * 30 + 2], fb.value()[c * 30 + 2], 0.0, "untouched column");
    }

    // Distinct ids map to distinct columns on a random table (injectivity).
    Tensor fcar = enc.embed(lrf::tokenize("car", v));
    Tensor fped = enc.embed(lrf::tokenize("pedestrian", v));
    double diff = 0.0;
    for (int c = 0; c < 8; ++c)
        diff += std::abs(fcar.value()[c * 30] - fped.value()[c * 30]);
    REQUIRE(diff > 1e-6, "distinct tokens embed to distinct columns");

    std::vector<int> bad(lrf::kTokenLen, 0);
    bad[3] = v.size() + 5;
    REQUIRE_THROWS(enc.embed(bad), "out-of-range id rejected");
    REQUIRE_THROWS(enc.embed({1, 2, 3}), "wrong token count rejected");
}

void test_embedding_gradient() {
    Vocabulary v = Vocabulary::build_default();
    auto ids = lrf::tokenize("the moving car about 15 meters away", v);
    std::mt19937_64 r2(3);
    Tensor wts = Tensor::uniform({4, lrf::kTokenLen}, -1.0, 1.0, r2);
    lrf::TextEncoder enc(v, 4, r2);
    double err = lrf::grad_check(
        [&](const std::vector<Tensor>& t) {
            Tensor view = lrf::reshape(t[0], {4, v.size(), 1});
            return lrf::sum(lrf::gather_cells(view, ids) * wts);
        },
        {enc.table()});
    REQUIRE(err < 1e-6, "embedding-table gradient matches finite differences");
}

}  // namespace

int main() {
    RUN(test_vocabulary);
    RUN(test_tokenize);
    RUN(test_embedding);
    RUN(test_embedding_gradient);
    return finish("test_text_encoder");
}
