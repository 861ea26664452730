#pragma once

// Syntactic (TF-IDF) and dense-vector features, pairwise cosine similarity
// matrices, and their convex combination.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gemmas/error.hpp"

namespace gemmas {

// ---------------------------------------------------------------------------
// Tokenization

namespace detail {

// Decodes one UTF-8 sequence at text[pos]. Malformed input yields U+FFFD
// and consumes a single byte.
inline char32_t decode_utf8(std::string_view text, std::size_t& pos) {
  const auto byte = [&](std::size_t k) { return static_cast<unsigned char>(text[k]); };
  const unsigned char b0 = byte(pos);
  constexpr char32_t bad = 0xFFFD;
  if (b0 < 0x80) {
    ++pos;
    return b0;
  }
  std::size_t len = 0;
  char32_t cp = 0;
  if ((b0 & 0xE0) == 0xC0) {
    len = 2;
    cp = b0 & 0x1F;
  } else if ((b0 & 0xF0) == 0xE0) {
    len = 3;
    cp = b0 & 0x0F;
  } else if ((b0 & 0xF8) == 0xF0) {
    len = 4;
    cp = b0 & 0x07;
  } else {
    ++pos;
    return bad;
  }
  if (pos + len > text.size()) {
    ++pos;
    return bad;
  }
  for (std::size_t k = 1; k < len; ++k) {
    const unsigned char b = byte(pos + k);
    if ((b & 0xC0) != 0x80) {
      ++pos;
      return bad;
    }
    cp = (cp << 6) | (b & 0x3F);
  }
  pos += len;
  return cp;
}

inline void append_utf8(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

struct CodeRange {
  char32_t lo;
  char32_t hi;
};

// Letter and digit blocks of the scripts we tokenize. Combining marks are
// included so that decomposed accents stay inside their word.
inline constexpr CodeRange word_ranges[] = {
    {U'0', U'9'},         {U'A', U'Z'},         {U'a', U'z'},         {0x00AA, 0x00AA},
    {0x00B2, 0x00B3},     {0x00B5, 0x00B5},     {0x00B9, 0x00BA},     {0x00BC, 0x00BE},
    {0x00C0, 0x00D6},     {0x00D8, 0x00F6},     {0x00F8, 0x02C1},     {0x0300, 0x036F},
    {0x0370, 0x0374},     {0x0376, 0x037D},     {0x037F, 0x037F},     {0x0386, 0x0386},
    {0x0388, 0x03FF},     {0x0400, 0x0481},     {0x0483, 0x052F},     {0x0531, 0x0556},
    {0x0561, 0x0587},     {0x0591, 0x05BD},     {0x05D0, 0x05EA},     {0x0610, 0x061A},
    {0x0620, 0x0669},     {0x066E, 0x06D3},     {0x06D5, 0x06FF},     {0x0900, 0x0963},
    {0x0966, 0x0DFF},     {0x0E01, 0x0E3A},     {0x0E40, 0x0E4E},     {0x0E50, 0x0E59},
    {0x10A0, 0x10FF},     {0x1100, 0x11FF},     {0x1E00, 0x1FBC},     {0x1FC2, 0x1FCC},
    {0x1FD0, 0x1FDB},     {0x1FE0, 0x1FEC},     {0x1FF2, 0x1FFC},     {0x2070, 0x2071},
    {0x2074, 0x2079},     {0x207F, 0x2089},     {0x2160, 0x2188},     {0x2460, 0x249B},
    {0x3005, 0x3007},     {0x3041, 0x3096},     {0x3099, 0x309A},     {0x309D, 0x309F},
    {0x30A1, 0x30FA},     {0x30FC, 0x30FF},     {0x3400, 0x4DBF},     {0x4E00, 0x9FFF},
    {0xAC00, 0xD7A3},     {0xF900, 0xFAFF},     {0xFF10, 0xFF19},     {0xFF21, 0xFF3A},
    {0xFF41, 0xFF5A},     {0xFF66, 0xFFDC},     {0x20000, 0x2FA1F},
};

inline bool is_word_codepoint(char32_t cp) {
  const auto it = std::upper_bound(std::begin(word_ranges), std::end(word_ranges), cp,
                                   [](char32_t c, const CodeRange& r) { return c < r.lo; });
  if (it == std::begin(word_ranges)) return false;
  return cp <= std::prev(it)->hi;
}

// Simple case folding for ASCII, Latin-1, Latin Extended-A, Greek, Cyrillic
// and fullwidth Latin. Other scripts are returned unchanged.
inline char32_t to_lower(char32_t c) {
  if (c < 0x80) return (c >= U'A' && c <= U'Z') ? c + 0x20 : c;
  if ((c >= 0x00C0 && c <= 0x00DE) && c != 0x00D7) return c + 0x20;
  if ((c >= 0x0100 && c <= 0x012F) || (c >= 0x0132 && c <= 0x0137) ||
      (c >= 0x014A && c <= 0x0177)) {
    return (c % 2 == 0) ? c + 1 : c;
  }
  if ((c >= 0x0139 && c <= 0x0148) || (c >= 0x0179 && c <= 0x017E)) {
    return (c % 2 == 1) ? c + 1 : c;
  }
  if (c == 0x0178) return 0x00FF;
  if (c >= 0x0391 && c <= 0x03AB && c != 0x03A2) return c + 0x20;
  if (c == 0x0386) return 0x03AC;
  if (c >= 0x0388 && c <= 0x038A) return c + 0x25;
  if (c == 0x038C) return 0x03CC;
  if (c == 0x038E || c == 0x038F) return c + 0x3F;
  if (c >= 0x0410 && c <= 0x042F) return c + 0x20;
  if (c >= 0x0400 && c <= 0x040F) return c + 0x50;
  if ((c >= 0x0460 && c <= 0x0481) || (c >= 0x048A && c <= 0x04BF)) {
    return (c % 2 == 0) ? c + 1 : c;
  }
  if (c >= 0xFF21 && c <= 0xFF3A) return c + 0x20;
  return c;
}

}  // namespace detail

// Lowercased maximal runs of letters and digits.
inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const char32_t cp = detail::decode_utf8(text, pos);
    if (detail::is_word_codepoint(cp)) {
      detail::append_utf8(current, detail::to_lower(cp));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

// ---------------------------------------------------------------------------
// Feature vectors

// Sparse term weights. Ordered so that dot products sum in a fixed order.
struct TermVector {
  std::map<std::string, double> weights;

  double norm() const {
    double s = 0.0;
    for (const auto& [_, w] : weights) s += w * w;
    return std::sqrt(s);
  }
  bool is_zero() const {
    return std::none_of(weights.begin(), weights.end(), [](const auto& kv) { return kv.second != 0.0; });
  }
};

using EmbeddingVector = std::vector<double>;

// tf = raw count, idf = ln((1+N)/(1+df)) + 1, then L2 normalisation. The
// corpus is exactly the given documents.
inline std::vector<TermVector> tfidf_vectors(std::span<const std::string> documents) {
  const std::size_t n = documents.size();
  std::vector<std::map<std::string, double>> counts(n);
  std::map<std::string, std::size_t> df;
  for (std::size_t d = 0; d < n; ++d) {
    for (auto& tok : tokenize(documents[d])) counts[d][std::move(tok)] += 1.0;
    for (const auto& [term, _] : counts[d]) ++df[term];
  }

  std::vector<TermVector> out(n);
  const double corpus = static_cast<double>(n);
  for (std::size_t d = 0; d < n; ++d) {
    auto& vec = out[d].weights;
    for (const auto& [term, tf] : counts[d]) {
      const double idf = std::log((1.0 + corpus) / (1.0 + static_cast<double>(df[term]))) + 1.0;
      vec.emplace(term, tf * idf);
    }
    const double norm = out[d].norm();
    if (norm > 0.0)
      for (auto& [_, w] : vec) w /= norm;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Similarity matrices

class SimilarityMatrix {
 public:
  SimilarityMatrix() = default;
  explicit SimilarityMatrix(std::size_t n, double fill = 0.0) : n_(n), data_(n * n, fill) {}

  std::size_t size() const noexcept { return n_; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * n_ + j]; }
  double& operator()(std::size_t i, std::size_t j) { return data_[i * n_ + j]; }

  // Sets (i,j) and (j,i).
  void set_symmetric(std::size_t i, std::size_t j, double v) {
    (*this)(i, j) = v;
    (*this)(j, i) = v;
  }

  friend bool operator==(const SimilarityMatrix&, const SimilarityMatrix&) = default;

 private:
  std::size_t n_ = 0;
  std::vector<double> data_;
};

namespace detail {

inline double clamp_unit(double v) { return std::clamp(v, 0.0, 1.0); }

inline double sparse_dot(const TermVector& a, const TermVector& b) {
  double s = 0.0;
  auto ia = a.weights.begin();
  auto ib = b.weights.begin();
  while (ia != a.weights.end() && ib != b.weights.end()) {
    if (ia->first < ib->first) {
      ++ia;
    } else if (ib->first < ia->first) {
      ++ib;
    } else {
      s += ia->second * ib->second;
      ++ia;
      ++ib;
    }
  }
  return s;
}

inline double dense_dot(const EmbeddingVector& a, const EmbeddingVector& b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

template <typename Vec, typename Dot>
SimilarityMatrix cosine_matrix(std::span<const Vec> vectors, Dot dot) {
  const std::size_t n = vectors.size();
  std::vector<double> norms(n);
  for (std::size_t i = 0; i < n; ++i) norms[i] = std::sqrt(dot(vectors[i], vectors[i]));

  SimilarityMatrix m(n);
  for (std::size_t i = 0; i < n; ++i) {
    m(i, i) = norms[i] > 0.0 ? 1.0 : 0.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      double v = 0.0;
      if (norms[i] > 0.0 && norms[j] > 0.0) {
        v = clamp_unit(dot(vectors[i], vectors[j]) / (norms[i] * norms[j]));
      }
      m.set_symmetric(i, j, v);
    }
  }
  return m;
}

}  // namespace detail

// Cosine similarity clamped to [0,1]; pairs involving an all-zero vector
// (diagonal included) are 0.
inline SimilarityMatrix pairwise_similarity(std::span<const TermVector> vectors) {
  return detail::cosine_matrix(vectors, detail::sparse_dot);
}

inline SimilarityMatrix pairwise_similarity(std::span<const EmbeddingVector> vectors) {
  for (const auto& v : vectors) {
    if (v.size() != vectors.front().size()) {
      throw DimensionMismatchError("embedding vectors have differing dimensions (" +
                                   std::to_string(vectors.front().size()) + " vs " +
                                   std::to_string(v.size()) + ")");
    }
  }
  return detail::cosine_matrix(vectors, detail::dense_dot);
}

// Convex weights for the syntactic and semantic channels.
struct LambdaWeights {
  double syntactic = 0.5;
  double semantic = 0.5;

  static LambdaWeights from_syntactic(double lambda1) {
    if (!(lambda1 >= 0.0 && lambda1 <= 1.0)) {
      throw Error("lambda1 must lie in [0,1], got " + std::to_string(lambda1));
    }
    return {lambda1, 1.0 - lambda1};
  }
};

inline SimilarityMatrix combine_similarity(const SimilarityMatrix& syntactic,
                                           const SimilarityMatrix& semantic, LambdaWeights w) {
  if (syntactic.size() != semantic.size()) {
    throw DimensionMismatchError("similarity matrices differ in size: " +
                                 std::to_string(syntactic.size()) + " vs " +
                                 std::to_string(semantic.size()));
  }
  const std::size_t n = syntactic.size();
  SimilarityMatrix out(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      out(i, j) = detail::clamp_unit(w.syntactic * syntactic(i, j) + w.semantic * semantic(i, j));
  return out;
}

}  // namespace gemmas
