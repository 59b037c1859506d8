#pragma once

#include <cctype>
#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "chainshort/errors.hpp"

namespace chainshort {

/// Unit-norm text embedding; the all-zero vector stands in for empty text.
struct EmbeddingVector {
  std::vector<double> components;

  bool operator==(const EmbeddingVector&) const = default;

  std::size_t dimension() const { return components.size(); }

  double norm() const {
    double sum = 0.0;
    for (double c : components) sum += c * c;
    return std::sqrt(sum);
  }

  bool is_zero() const {
    for (double c : components) {
      if (c != 0.0) return false;
    }
    return true;
  }
};

/// dot(u,v) / (|u||v|), 0 when either operand has zero norm so degenerate
/// (empty-text) embeddings stay neutral instead of producing NaN.
inline double cosine(const EmbeddingVector& u, const EmbeddingVector& v) {
  if (u.dimension() != v.dimension()) {
    raise(Errc::invalid_argument, "cosine: dimension mismatch");
  }
  double dot = 0.0;
  for (std::size_t i = 0; i < u.components.size(); ++i) {
    dot += u.components[i] * v.components[i];
  }
  const double nu = u.norm();
  const double nv = v.norm();
  if (nu == 0.0 || nv == 0.0) return 0.0;
  return dot / (nu * nv);
}

class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual EmbeddingVector embed(const std::string& text) const = 0;
};

namespace detail {

// FNV-1a, seeded. std::hash is not stable across platforms; this is.
inline std::uint64_t seeded_fnv1a(std::string_view token, std::uint64_t seed) {
  std::uint64_t h = 14695981039346656037ULL ^ seed;
  for (unsigned char byte : token) {
    h ^= byte;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace detail

/// Deterministic bag-of-tokens fallback: whitespace tokens hashed into a
/// fixed number of buckets, counted, L2-normalized. No semantics, but byte
/// identical input gives byte identical output on every platform, which is
/// what offline runs and tests need from a similarity oracle.
class OfflineEmbedder : public Embedder {
 public:
  static constexpr std::size_t kDefaultDimension = 256;
  static constexpr std::uint64_t kSeed = 0x9e3779b97f4a7c15ULL;

  explicit OfflineEmbedder(std::size_t dimension = kDefaultDimension)
      : dimension_(dimension) {
    if (dimension_ == 0) {
      raise(Errc::invalid_argument, "embedding dimension must be positive");
    }
  }

  EmbeddingVector embed(const std::string& text) const override {
    EmbeddingVector out;
    out.components.assign(dimension_, 0.0);
    std::size_t i = 0;
    const std::size_t n = text.size();
    bool any = false;
    while (i < n) {
      while (i < n && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
      std::size_t start = i;
      while (i < n && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
      if (i > start) {
        const auto token = std::string_view(text).substr(start, i - start);
        out.components[detail::seeded_fnv1a(token, kSeed) % dimension_] += 1.0;
        any = true;
      }
    }
    if (!any) return out;  // zero vector for empty/whitespace-only text
    const double norm = out.norm();
    for (double& c : out.components) c /= norm;
    return out;
  }

  std::size_t dimension() const { return dimension_; }

 private:
  std::size_t dimension_;
};

}  // namespace chainshort
