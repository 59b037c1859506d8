#include <catch2/catch_amalgamated.hpp>

#include "support/helpers.hpp"

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

using namespace chainshort;

namespace {

// Independent re-derivation of the bucket hash for oracle checks.
std::uint64_t oracle_hash(const std::string& token) {
  std::uint64_t h = 14695981039346656037ULL ^ 0x9e3779b97f4a7c15ULL;
  for (unsigned char byte : token) {
    h ^= byte;
    h *= 1099511628211ULL;
  }
  return h;
}

std::vector<double> oracle_embed(const std::vector<std::string>& tokens,
                                 std::size_t dimension) {
  std::vector<double> counts(dimension, 0.0);
  for (const std::string& token : tokens) {
    counts[oracle_hash(token) % dimension] += 1.0;
  }
  double norm = 0.0;
  for (double c : counts) norm += c * c;
  norm = std::sqrt(norm);
  if (norm > 0.0) {
    for (double& c : counts) c /= norm;
  }
  return counts;
}

}  // namespace

TEST_CASE("offline embedding matches an independent bucket-count oracle") {
  OfflineEmbedder embedder;
  const auto vector = embedder.embed("alpha beta gamma alpha");
  const auto expected =
      oracle_embed({"alpha", "beta", "gamma", "alpha"}, 256);
  REQUIRE(vector.components.size() == expected.size());
  for (std::size_t i = 0; i < expected.size(); ++i) {
    REQUIRE(vector.components[i] == Catch::Approx(expected[i]).margin(1e-12));
  }
}

TEST_CASE("token order and extra whitespace do not change the embedding") {
  OfflineEmbedder embedder;
  const auto a = embedder.embed("alpha beta");
  const auto b = embedder.embed("  beta \t alpha \n");
  REQUIRE(a == b);
}

TEST_CASE("empty and whitespace-only text embed to the zero vector") {
  OfflineEmbedder embedder;
  REQUIRE(embedder.embed("").is_zero());
  REQUIRE(embedder.embed(" \t\n ").is_zero());
  REQUIRE(embedder.embed("").dimension() == 256);
}

TEST_CASE("non-empty embeddings have unit norm") {
  OfflineEmbedder embedder;
  for (const char* text : {"a", "alpha beta gamma", "x y z w v u t s"}) {
    REQUIRE(embedder.embed(text).norm() == Catch::Approx(1.0).margin(1e-12));
  }
}

TEST_CASE("distinct token multisets give distinct embeddings") {
  OfflineEmbedder embedder;
  REQUIRE(embedder.embed("alpha alpha beta") !=
          embedder.embed("alpha beta beta"));
}

TEST_CASE("embedding dimension is configurable and must be positive") {
  OfflineEmbedder small(8);
  REQUIRE(small.embed("alpha").dimension() == 8);
  REQUIRE_THROWS_MATCHES(OfflineEmbedder(0), Error, Catch::Matchers::Predicate<Error>([](const Error& e) {
                           return e.code() == Errc::invalid_argument;
                         }));
}

TEST_CASE("cosine of a vector with itself is one") {
  OfflineEmbedder embedder;
  const auto v = embedder.embed("self similarity check");
  REQUIRE(cosine(v, v) == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("cosine is symmetric") {
  OfflineEmbedder embedder;
  const auto u = embedder.embed("first text");
  const auto v = embedder.embed("second different text");
  REQUIRE(cosine(u, v) == Catch::Approx(cosine(v, u)).margin(1e-15));
}

TEST_CASE("cosine with a zero vector is zero, not NaN") {
  OfflineEmbedder embedder;
  const auto zero = embedder.embed("");
  const auto v = embedder.embed("non empty");
  REQUIRE(cosine(zero, v) == 0.0);
  REQUIRE(cosine(v, zero) == 0.0);
  REQUIRE(cosine(zero, zero) == 0.0);
}

TEST_CASE("cosine rejects dimension mismatches") {
  EmbeddingVector u{std::vector<double>{1.0, 0.0}};
  EmbeddingVector v{std::vector<double>{1.0, 0.0, 0.0}};
  REQUIRE_THROWS_AS(cosine(u, v), Error);
}

TEST_CASE("cosine can be negative and is not clamped") {
  EmbeddingVector u{std::vector<double>{1.0, 0.0}};
  EmbeddingVector v{std::vector<double>{-1.0, 0.0}};
  REQUIRE(cosine(u, v) == Catch::Approx(-1.0).margin(1e-12));
}
