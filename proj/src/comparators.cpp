#include "morphtest/comparators.hpp"

#include <algorithm>
#include <cmath>

#include "morphtest/digest.hpp"
#include "morphtest/errors.hpp"
#include "morphtest/text.hpp"

namespace morphtest {

Embedding HashedBagOfWordsEmbedder::embed(std::string_view input) {
  Embedding v(dimensions_, 0.0);
  std::string token;
  auto flush = [&] {
    if (!token.empty()) {
      v[fnv1a64(token) % dimensions_] += 1.0;
      token.clear();
    }
  };
  for (char c : input) {
    const auto u = static_cast<unsigned char>(c);
    if ((c >= '0' && c <= '9') || text::is_ascii_alpha(c) || u >= 0x80) {
      token.push_back((c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c);
    } else {
      flush();
    }
  }
  flush();
  return v;
}

void ComparatorConfig::validate() const {
  if (!(equivalence_threshold > 0.0 && equivalence_threshold <= 1.0)) {
    throw InvalidConfig("equivalence_threshold must lie in (0, 1]");
  }
  if (!(difference_threshold >= 0.0 && difference_threshold < 1.0)) {
    throw InvalidConfig("difference_threshold must lie in [0, 1)");
  }
  if (!(difference_threshold < equivalence_threshold)) {
    throw InvalidConfig("difference_threshold must be below equivalence_threshold");
  }
  if (!(numeric_window >= 0.0) || !std::isfinite(numeric_window)) {
    throw InvalidConfig("numeric_window must be a finite non-negative number");
  }
}

std::string_view to_string(RelationVerdict v) {
  switch (v) {
    case RelationVerdict::Satisfied: return "SATISFIED";
    case RelationVerdict::Violated: return "VIOLATED";
    case RelationVerdict::Indeterminate: return "INDETERMINATE";
  }
  return "?";
}

RelationVerdict verdict_from_string(std::string_view s) {
  if (s == "SATISFIED") return RelationVerdict::Satisfied;
  if (s == "VIOLATED") return RelationVerdict::Violated;
  if (s == "INDETERMINATE") return RelationVerdict::Indeterminate;
  throw Error("unknown relation verdict '" + std::string(s) + "'");
}

std::string_view to_string(SetRelation r) {
  switch (r) {
    case SetRelation::SetEqual: return "SET_EQUAL";
    case SetRelation::Subset: return "SUBSET";
    case SetRelation::Superset: return "SUPERSET";
    case SetRelation::Disjoint: return "DISJOINT";
    case SetRelation::Overlap: return "OVERLAP";
  }
  return "?";
}

bool exact_equal(std::string_view a, std::string_view b) {
  return text::to_lower_ascii(text::trim(a)) == text::to_lower_ascii(text::trim(b));
}

SetRelation set_compare(const TupleSet& a, const TupleSet& b) {
  if (a == b) return SetRelation::SetEqual;
  const bool a_in_b = std::includes(b.begin(), b.end(), a.begin(), a.end());
  if (a_in_b) return SetRelation::Subset;
  const bool b_in_a = std::includes(a.begin(), a.end(), b.begin(), b.end());
  if (b_in_a) return SetRelation::Superset;
  const bool shared = std::any_of(a.begin(), a.end(),
                                  [&](const auto& t) { return b.contains(t); });
  return shared ? SetRelation::Overlap : SetRelation::Disjoint;
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw EmbeddingUnavailable("embedding dimensions differ");
  }
  double dot = 0.0;
  double na = 0.0;
  double nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const double denom = std::sqrt(na) * std::sqrt(nb);
  if (denom == 0.0) return 0.0;
  return std::clamp(dot / denom, -1.0, 1.0);
}

double semantic_similarity(std::string_view a, std::string_view b,
                           EmbeddingProvider* provider) {
  if (a == b) return 1.0;
  if (provider == nullptr) {
    throw EmbeddingUnavailable("no embedding provider configured");
  }
  const auto ea = provider->embed(a);
  const auto eb = provider->embed(b);
  return cosine_similarity(ea, eb);
}

RelationVerdict semantic_verdict(double score, SemanticExpectation expectation,
                                 const ComparatorConfig& cfg) {
  const bool similar = score >= cfg.equivalence_threshold;
  const bool dissimilar = score <= cfg.difference_threshold;
  if (expectation == SemanticExpectation::Equivalent) {
    if (similar) return RelationVerdict::Satisfied;
    if (dissimilar) return RelationVerdict::Violated;
  } else {
    if (dissimilar) return RelationVerdict::Satisfied;
    if (similar) return RelationVerdict::Violated;
  }
  return RelationVerdict::Indeterminate;
}

bool numeric_equivalent(double a, double b, double window) {
  if (!std::isfinite(a) || !std::isfinite(b) || !std::isfinite(window)) {
    throw NonFiniteInput("numeric comparison requires finite values");
  }
  // Scores arrive as decimal text, so 0.8 - 0.7 lands one ulp above 0.1.
  // The slack keeps the inclusive boundary inclusive for such inputs.
  constexpr double kSlack = 1e-9;
  return std::fabs(a - b) <= window + kSlack;
}

}  // namespace morphtest
