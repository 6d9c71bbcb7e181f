#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "morphtest/comparators.hpp"
#include "morphtest/gateway.hpp"
#include "morphtest/task.hpp"

namespace morphtest {

enum class OutputRelationKind { Equivalent, Different, SetEqual, NumericEqual };
enum class InputTargetPolicy { EachSlot, AllSlots, EachAndAll };
enum class TransformationKind { Functional, LlmPrompted };
enum class VerificationPhase { Input, Output };

std::string_view to_string(OutputRelationKind k);
std::string_view to_string(InputTargetPolicy p);
std::string_view to_string(TransformationKind k);

struct FewShotExample {
  std::string input;
  std::string output;
  bool operator==(const FewShotExample&) const = default;
};

struct TransformationSpec {
  TransformationKind kind = TransformationKind::Functional;
  std::string function_id;         // Functional only
  std::string prompt_template_id;  // LlmPrompted only
  std::vector<FewShotExample> few_shot_examples;  // LlmPrompted, non-empty

  static TransformationSpec functional(std::string function_id);
  static TransformationSpec prompted(std::string template_id,
                                     std::vector<FewShotExample> examples);
  bool operator==(const TransformationSpec&) const = default;
};

/// A metamorphic relation: how to derive follow-ups, what must hold between
/// the outputs, and which groups count as valid tests.
struct RelationDescriptor {
  std::string id;
  std::string name;
  std::set<std::string> applicable_tasks;
  TransformationSpec transformation;
  OutputRelationKind output_relation = OutputRelationKind::Equivalent;
  std::vector<std::string> verifications;  // predicate names
  InputTargetPolicy input_target_policy = InputTargetPolicy::EachSlot;

  bool applies_to(std::string_view task_id) const {
    return applicable_tasks.contains(std::string(task_id));
  }
  bool operator==(const RelationDescriptor&) const = default;
};

using TransformFunction = std::function<std::string(std::string_view, std::uint64_t)>;

/// Verification predicates understood by the engine. Input-phase predicates
/// only look at inputs; output-phase predicates need the model outputs.
///   source_non_empty       (input)  every source slot has visible text
///   followup_differs       (input)  every follow-up differs from the source
///   multi_sentence_source  (input)  targeted source slots hold >= 2 sentences
///   outputs_parsed         (output) every output parsed under its task
std::span<const std::pair<std::string_view, VerificationPhase>> known_verifications();
bool is_known_verification(std::string_view name);
VerificationPhase verification_phase(std::string_view name);

/// Relations plus the transform functions and prompt templates they refer
/// to. Build it once, then share it read-only between workers.
class RelationRegistry {
 public:
  /// Empty relation set; built-in functions and prompt templates are known.
  RelationRegistry();

  /// Built-in functions, templates and the bundled relation catalog.
  static RelationRegistry with_builtins();

  /// Throws DuplicateRelationId, UnknownFunctionId, UnknownVerification or
  /// InvalidRelation.
  void add(RelationDescriptor descriptor);

  void add_function(std::string id, TransformFunction fn);
  void add_prompt_template(std::string id, std::string tmpl);

  const RelationDescriptor* find(std::string_view id) const;
  /// Relations applicable to `task_id`, in registration order.
  std::vector<const RelationDescriptor*> for_task(std::string_view task_id) const;
  std::span<const RelationDescriptor> all() const { return relations_; }
  std::size_t size() const { return relations_.size(); }

  const TransformFunction* function(std::string_view id) const;
  const std::string* prompt_template(std::string_view id) const;
  const std::map<std::string, std::string, std::less<>>& prompt_templates() const {
    return templates_;
  }

 private:
  std::vector<RelationDescriptor> relations_;
  std::map<std::string, TransformFunction, std::less<>> functions_;
  std::map<std::string, std::string, std::less<>> templates_;
};

/// Value-style registration: returns `registry` with `descriptor` added.
RelationRegistry register_relation(RelationDescriptor descriptor,
                                   RelationRegistry registry);

/// The bundled relation catalog.
std::vector<RelationDescriptor> builtin_relations();
/// Built-in transformation prompt templates, keyed by template id.
std::map<std::string, std::string, std::less<>> builtin_prompt_templates();

nlohmann::json relation_to_json(const RelationDescriptor& r);
RelationDescriptor relation_from_json(const nlohmann::json& j);
/// Relation list file: a JSON array of relation objects.
std::vector<RelationDescriptor> load_relations(const std::filesystem::path& path);
/// Transformation prompt templates file: a JSON object id -> template.
std::map<std::string, std::string, std::less<>> load_prompt_templates(
    const std::filesystem::path& path);

struct FollowupDerivation {
  std::vector<InputTuple> followup_inputs;
  /// Sorted slot indices transformed in the matching follow-up.
  std::vector<std::vector<std::size_t>> transformed_slots;
  std::uint64_t seed_used = 0;

  bool operator==(const FollowupDerivation&) const = default;
};

/// What LLM-prompted transformations need. Unused by functional ones.
struct TransformContext {
  LlmGateway* gateway = nullptr;
  const LlmHandle* transformer = nullptr;
};

/// Applies `mr` to the slots chosen by its target policy. Each slot is
/// transformed at most once (with a slot-specific seed), so a multi-slot
/// follow-up agrees with the single-slot follow-ups on every slot.
/// Throws NotApplicable, ArityMismatch or TransformationFailed.
FollowupDerivation derive_followups(const RelationDescriptor& mr,
                                    const InputTuple& source, const TaskSpec& task,
                                    std::uint64_t seed,
                                    const RelationRegistry& registry,
                                    const TransformContext& ctx = {});

/// Formats the few-shot examples into the template's {EXAMPLES} slot and the
/// text into {INPUT}.
std::string render_transformation_prompt(std::string_view tmpl,
                                         std::span<const FewShotExample> examples,
                                         std::string_view text);

/// Queries the transformer model and cleans the answer (trim, then one pair
/// of surrounding quotes). Throws TransformationFailed when nothing usable
/// comes back; LlmUnreachable and AuthFailure propagate.
std::string transform_llm_prompted(std::string_view text, std::string_view tmpl,
                                   std::span<const FewShotExample> examples,
                                   LlmGateway& gateway, const LlmHandle& transformer);

/// Paraphrase using the built-in template and examples.
std::string transform_paraphrase_llm(std::string_view text, LlmGateway& gateway,
                                     const LlmHandle& transformer);

/// Throws OutputKindMismatch when the outputs (or the relation) do not fit
/// together. Unparsed outputs give Indeterminate.
RelationVerdict check_output_relation(const RelationDescriptor& mr,
                                      const TaskOutput& source_output,
                                      const TaskOutput& followup_output,
                                      const ComparatorConfig& comparators);

struct GroupOutputs {
  TaskOutput source;
  std::vector<TaskOutput> followups;
};

/// True when some verification predicate fails. Output-phase predicates are
/// evaluated only when `outputs` is non-null. Throws UnknownVerification.
bool run_verifications(const RelationDescriptor& mr, const InputTuple& source,
                       const FollowupDerivation& followups,
                       const GroupOutputs* outputs = nullptr);

}  // namespace morphtest
