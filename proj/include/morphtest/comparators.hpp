#pragma once

#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "morphtest/task.hpp"

namespace morphtest {

using Embedding = std::vector<double>;

/// Anything that can turn text into a fixed-dimension vector. Implementations
/// must tolerate concurrent calls.
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual Embedding embed(std::string_view text) = 0;
  virtual std::size_t dimensions() const = 0;
};

/// Offline bag-of-words provider: lower-cased alphanumeric tokens hashed
/// into `dimensions` buckets. Order-free and deterministic.
class HashedBagOfWordsEmbedder final : public EmbeddingProvider {
 public:
  static constexpr std::size_t kDefaultDimensions = 512;

  explicit HashedBagOfWordsEmbedder(std::size_t dimensions = kDefaultDimensions)
      : dimensions_(dimensions) {}

  Embedding embed(std::string_view text) override;
  std::size_t dimensions() const override { return dimensions_; }

 private:
  std::size_t dimensions_;
};

struct ComparatorConfig {
  double equivalence_threshold = 0.8;
  double difference_threshold = 0.4;
  double numeric_window = 0.1;
  std::shared_ptr<EmbeddingProvider> embedding_provider;

  /// Throws InvalidConfig when the thresholds are out of range or unordered.
  void validate() const;
};

enum class RelationVerdict { Satisfied, Violated, Indeterminate };
enum class SemanticExpectation { Equivalent, Different };
enum class SetRelation { SetEqual, Subset, Superset, Disjoint, Overlap };

std::string_view to_string(RelationVerdict v);
RelationVerdict verdict_from_string(std::string_view s);
std::string_view to_string(SetRelation r);

/// Equality after trimming and ASCII case folding.
bool exact_equal(std::string_view a, std::string_view b);

/// Strict subset is reported as Subset; two empty sets are SetEqual; an empty
/// set against a non-empty one is Subset (or Superset when reversed).
SetRelation set_compare(const TupleSet& a, const TupleSet& b);

/// Cosine similarity; 0 when either vector has zero norm. Clamped to [-1, 1].
double cosine_similarity(std::span<const double> a, std::span<const double> b);

/// Byte-identical inputs return 1.0 without consulting the provider.
/// Throws EmbeddingUnavailable when no provider is configured.
double semantic_similarity(std::string_view a, std::string_view b,
                           EmbeddingProvider* provider);

/// Inclusive thresholds. The open interval between the difference and
/// equivalence thresholds is the dead zone and yields Indeterminate.
RelationVerdict semantic_verdict(double score, SemanticExpectation expectation,
                                 const ComparatorConfig& cfg);

/// |a - b| <= window. Throws NonFiniteInput for NaN or infinities.
bool numeric_equivalent(double a, double b, double window);

}  // namespace morphtest
