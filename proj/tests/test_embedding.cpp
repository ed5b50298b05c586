#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "doctest.h"
#include "gsadvisor/embedding.hpp"
#include "gsadvisor/random.hpp"
#include "test_support.hpp"

using namespace gsadvisor;
using testing::error_code;

namespace {

const std::string kHeader4 = R"({"schema":"emb.v1","dim":4,"encoder":"test-encoder v0"})";

std::vector<std::string> disjoint_words(std::size_t count, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::string> words;
  for (std::size_t i = 0; i < count; ++i) {
    std::string w;
    const std::size_t len = 4 + rng.below(6);
    for (std::size_t c = 0; c < len; ++c) w.push_back(static_cast<char>('a' + rng.below(26)));
    words.push_back(w + std::to_string(i));  // suffix keeps words distinct
  }
  return words;
}

}  // namespace

TEST_SUITE("embedding") {
  TEST_CASE("load normalizes rows") {
    testing::TempDir dir;
    testing::write_file(dir / "e.jsonl", kHeader4 + "\n" + R"({"id":"p1","v":[3,0,0,0]})" + "\n" +
                                             R"({"id":"p2","v":[1,1,1,1]})" + "\n");
    const auto store = load_embeddings(dir / "e.jsonl");
    CHECK(store.dimension() == 4);
    CHECK(store.provenance() == "test-encoder v0");
    CHECK(store.size() == 2);
    const auto* p1 = store.find("p1");
    REQUIRE(p1 != nullptr);
    CHECK(*p1 == Eigen::Vector4d(1, 0, 0, 0));
    CHECK(store.find("p2")->norm() == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(store.find("P1") == nullptr);
  }

  TEST_CASE("load errors") {
    testing::TempDir dir;
    testing::write_file(dir / "short.jsonl", kHeader4 + "\n" + R"({"id":"p1","v":[3,0,0]})" + "\n");
    CHECK(error_code([&] { load_embeddings(dir / "short.jsonl"); }) == ErrorCode::kDimensionMismatch);

    testing::write_file(dir / "dup.jsonl",
                        kHeader4 + "\n" + R"({"id":"p1","v":[1,0,0,0]})" + "\n" + R"({"id":"p1","v":[0,1,0,0]})" + "\n");
    CHECK(error_code([&] { load_embeddings(dir / "dup.jsonl"); }) == ErrorCode::kDuplicateId);

    testing::write_file(dir / "header.jsonl", R"({"schema":"emb.v0","dim":4})" "\n");
    CHECK(error_code([&] { load_embeddings(dir / "header.jsonl"); }) == ErrorCode::kFormatError);

    testing::write_file(dir / "garbage.jsonl", kHeader4 + "\n{not json\n");
    CHECK(error_code([&] { load_embeddings(dir / "garbage.jsonl"); }) == ErrorCode::kFormatError);

    testing::write_file(dir / "zero.jsonl", kHeader4 + "\n" + R"({"id":"p1","v":[0,0,0,0]})" + "\n");
    CHECK(error_code([&] { load_embeddings(dir / "zero.jsonl"); }) == ErrorCode::kFormatError);
  }

  TEST_CASE("header-only file is an empty store") {
    testing::TempDir dir;
    testing::write_file(dir / "empty.jsonl", kHeader4 + "\n");
    const auto store = load_embeddings(dir / "empty.jsonl");
    CHECK(store.size() == 0);
    CHECK(store.dimension() == 4);
  }

  TEST_CASE("save and load round-trip bit-exactly") {
    testing::TempDir dir;
    EmbeddingStore store(16, "roundtrip");
    Rng rng(11);
    for (int i = 0; i < 50; ++i) {
      Eigen::VectorXd v(16);
      for (auto& x : v) x = rng.normal();
      store.insert("id" + std::to_string(i), v);
    }
    save_embeddings(store, dir / "rt.jsonl");
    const auto loaded = load_embeddings(dir / "rt.jsonl");
    REQUIRE(loaded.size() == store.size());
    for (const auto& [id, v] : store.entries()) {
      const auto* w = loaded.find(id);
      REQUIRE(w != nullptr);
      CHECK(std::equal(v.begin(), v.end(), w->begin()));
    }
  }

  TEST_CASE("hashed embedding is deterministic and unit-norm") {
    for (const std::string raw : {"A white car.", "two red buses near a bridge", "x"}) {
      const auto a = hashed_embedding(tokenize(raw), 4096);
      const auto b = hashed_embedding(tokenize(raw), 4096);
      CHECK(a.vector == b.vector);
      CHECK(a.vector.norm() == doctest::Approx(1.0).epsilon(1e-12));
      CHECK(a.source == EmbeddingSource::kHashed);
    }
    const auto empty = hashed_embedding(tokenize(""), 64);
    CHECK(empty.vector == Eigen::VectorXd::Unit(64, 0));
    CHECK(error_code([] { hashed_embedding(tokenize("a"), 4); }) == ErrorCode::kInvalidArgument);
  }

  TEST_CASE("prompts with no shared tokens are nearly orthogonal") {
    const auto words = disjoint_words(100 * 2 * 6, 3);
    std::size_t k = 0;
    double worst = 0.0;
    for (int pair = 0; pair < 100; ++pair) {
      std::string a;
      std::string b;
      for (int i = 0; i < 6; ++i) a += words[k++] + " ";
      for (int i = 0; i < 6; ++i) b += words[k++] + " ";
      const auto ea = hashed_embedding(tokenize(a), 4096).vector;
      const auto eb = hashed_embedding(tokenize(b), 4096).vector;
      double dot = 0.0;  // explicit loop keeps the oracle independent of Eigen
      for (Eigen::Index i = 0; i < 4096; ++i) dot += ea[i] * eb[i];
      worst = std::max(worst, std::abs(dot));
    }
    CHECK(worst < 0.2);
  }

  TEST_CASE("unigram part ignores order, bigram part does not") {
    const auto ab = tokenize("red apple green pear");
    const auto ba = tokenize("green pear red apple");
    const HashingOptions unigrams{true, false};
    CHECK(hashed_embedding(ab, 512, unigrams).vector == hashed_embedding(ba, 512, unigrams).vector);
    CHECK(hashed_embedding(ab, 512).vector != hashed_embedding(ba, 512).vector);
    const HashingOptions bigrams{false, true};
    CHECK(hashed_embedding(ab, 512, bigrams).vector != hashed_embedding(ba, 512, bigrams).vector);
  }

  TEST_CASE("provider lookup and fallback") {
    EmbeddingStore store(8, "unit");
    store.insert("p1", Eigen::VectorXd::Unit(8, 3) * 2.0);

    const EmbeddingProvider with_fallback(store, true);
    const auto hit = with_fallback.get({"p1", "ignored text"});
    CHECK(hit.source == EmbeddingSource::kFile);
    CHECK(hit.vector == Eigen::VectorXd::Unit(8, 3));
    const auto miss = with_fallback.get({"p2", "a white car"});
    CHECK(miss.source == EmbeddingSource::kHashed);
    CHECK(miss.vector.size() == 8);
    CHECK(miss.vector == hashed_embedding(tokenize("a white car"), 8).vector);

    const EmbeddingProvider strict(store, false);
    CHECK(error_code([&] { strict.get({"p2", "a white car"}); }) == ErrorCode::kMissingEmbedding);

    const EmbeddingProvider hashed;
    CHECK(hashed.dimension() == kDefaultHashedEmbeddingDim);
    CHECK(hashed.get({"x", "a white car"}).vector.norm() == doctest::Approx(1.0));
  }

  TEST_CASE("store rejects bad inserts") {
    EmbeddingStore store(4);
    CHECK(error_code([&] { store.insert("a", Eigen::VectorXd::Ones(3)); }) == ErrorCode::kDimensionMismatch);
    store.insert("a", Eigen::VectorXd::Ones(4));
    CHECK(error_code([&] { store.insert("a", Eigen::VectorXd::Ones(4)); }) == ErrorCode::kDuplicateId);
    Eigen::VectorXd nan = Eigen::VectorXd::Ones(4);
    nan[1] = std::nan("");
    CHECK(error_code([&] { store.insert("b", nan); }) == ErrorCode::kFormatError);
  }
}
