#include "morphtest/relation.hpp"

#include <algorithm>
#include <array>
#include <optional>

#include "morphtest/digest.hpp"
#include "morphtest/errors.hpp"
#include "morphtest/io.hpp"
#include "morphtest/text.hpp"
#include "morphtest/transforms.hpp"

namespace morphtest {
namespace {

using nlohmann::json;

constexpr std::array<std::pair<std::string_view, VerificationPhase>, 4> kVerifications = {{
    {"source_non_empty", VerificationPhase::Input},
    {"followup_differs", VerificationPhase::Input},
    {"multi_sentence_source", VerificationPhase::Input},
    {"outputs_parsed", VerificationPhase::Output},
}};

constexpr std::string_view kParaphraseTemplateId = "paraphrase";

const std::vector<FewShotExample>& paraphrase_examples() {
  static const std::vector<FewShotExample> examples = {
      {"The service at the restaurant was slow but friendly.",
       "Although the restaurant's service was slow, the staff were friendly."},
      {"Paris is the capital of France.", "France's capital city is Paris."},
      {"A man is playing a guitar on stage.", "On stage, a man plays the guitar."},
  };
  return examples;
}

template <typename Enum, std::size_t N>
Enum enum_from_string(std::string_view s,
                      const std::array<std::pair<std::string_view, Enum>, N>& table,
                      std::string_view what) {
  for (const auto& [name, value] : table) {
    if (name == s) return value;
  }
  throw InvalidRelation("unknown " + std::string(what) + " '" + std::string(s) + "'");
}

constexpr std::array<std::pair<std::string_view, OutputRelationKind>, 4> kRelationKinds = {{
    {"EQUIVALENT", OutputRelationKind::Equivalent},
    {"DIFFERENT", OutputRelationKind::Different},
    {"SET_EQUAL", OutputRelationKind::SetEqual},
    {"NUMERIC_EQUAL", OutputRelationKind::NumericEqual},
}};

constexpr std::array<std::pair<std::string_view, InputTargetPolicy>, 3> kPolicies = {{
    {"EACH_SLOT", InputTargetPolicy::EachSlot},
    {"ALL_SLOTS", InputTargetPolicy::AllSlots},
    {"EACH_AND_ALL", InputTargetPolicy::EachAndAll},
}};

constexpr std::array<std::pair<std::string_view, TransformationKind>, 2> kTransformKinds = {{
    {"FUNCTIONAL", TransformationKind::Functional},
    {"LLM_PROMPTED", TransformationKind::LlmPrompted},
}};

std::vector<std::vector<std::size_t>> slot_combinations(InputTargetPolicy policy,
                                                        std::size_t arity) {
  std::vector<std::vector<std::size_t>> out;
  std::vector<std::size_t> all(arity);
  for (std::size_t k = 0; k < arity; ++k) all[k] = k;
  if (policy != InputTargetPolicy::AllSlots) {
    for (std::size_t k = 0; k < arity; ++k) out.push_back({k});
  }
  if (policy != InputTargetPolicy::EachSlot &&
      std::find(out.begin(), out.end(), all) == out.end()) {
    out.push_back(all);
  }
  return out;
}

RelationVerdict from_bool(bool satisfied) {
  return satisfied ? RelationVerdict::Satisfied : RelationVerdict::Violated;
}

}  // namespace

std::string_view to_string(OutputRelationKind k) {
  for (const auto& [name, value] : kRelationKinds) {
    if (value == k) return name;
  }
  return "?";
}

std::string_view to_string(InputTargetPolicy p) {
  for (const auto& [name, value] : kPolicies) {
    if (value == p) return name;
  }
  return "?";
}

std::string_view to_string(TransformationKind k) {
  for (const auto& [name, value] : kTransformKinds) {
    if (value == k) return name;
  }
  return "?";
}

TransformationSpec TransformationSpec::functional(std::string function_id) {
  TransformationSpec s;
  s.kind = TransformationKind::Functional;
  s.function_id = std::move(function_id);
  return s;
}

TransformationSpec TransformationSpec::prompted(std::string template_id,
                                                std::vector<FewShotExample> examples) {
  TransformationSpec s;
  s.kind = TransformationKind::LlmPrompted;
  s.prompt_template_id = std::move(template_id);
  s.few_shot_examples = std::move(examples);
  return s;
}

std::span<const std::pair<std::string_view, VerificationPhase>> known_verifications() {
  return kVerifications;
}

bool is_known_verification(std::string_view name) {
  return std::any_of(kVerifications.begin(), kVerifications.end(),
                     [&](const auto& v) { return v.first == name; });
}

VerificationPhase verification_phase(std::string_view name) {
  for (const auto& [n, phase] : kVerifications) {
    if (n == name) return phase;
  }
  throw UnknownVerification("unknown verification '" + std::string(name) + "'");
}

// --- registry ---------------------------------------------------------------

RelationRegistry::RelationRegistry() {
  add_function("insert_random_spaces", transforms::insert_random_spaces);
  add_function("concat_random_sentence", transforms::concat_random_sentence);
  add_function("to_uppercase", transforms::to_uppercase);
  add_function("substitute_synonym", transforms::substitute_synonym);
  add_function("swap_adjacent_characters", transforms::swap_adjacent_characters);
  add_function("append_punctuation", transforms::append_punctuation);
  add_function("shuffle_sentences", transforms::shuffle_sentences);
  for (auto& [id, tmpl] : builtin_prompt_templates()) add_prompt_template(id, tmpl);
}

RelationRegistry RelationRegistry::with_builtins() {
  RelationRegistry r;
  for (auto& d : builtin_relations()) r.add(std::move(d));
  return r;
}

void RelationRegistry::add(RelationDescriptor d) {
  if (d.id.empty()) throw InvalidRelation("relation without an id");
  if (find(d.id) != nullptr) {
    throw DuplicateRelationId("relation '" + d.id + "' is already registered");
  }
  if (d.applicable_tasks.empty()) {
    throw InvalidRelation("relation '" + d.id + "' applies to no task");
  }
  const auto& t = d.transformation;
  if (t.kind == TransformationKind::Functional) {
    if (!t.prompt_template_id.empty()) {
      throw InvalidRelation("relation '" + d.id + "': functional spec names a prompt template");
    }
    if (function(t.function_id) == nullptr) {
      throw UnknownFunctionId("relation '" + d.id + "': no transform function '" +
                              t.function_id + "'");
    }
  } else {
    if (!t.function_id.empty()) {
      throw InvalidRelation("relation '" + d.id + "': prompted spec names a function");
    }
    if (prompt_template(t.prompt_template_id) == nullptr) {
      throw InvalidRelation("relation '" + d.id + "': no prompt template '" +
                            t.prompt_template_id + "'");
    }
    if (t.few_shot_examples.empty()) {
      throw InvalidRelation("relation '" + d.id + "': prompted spec needs few-shot examples");
    }
  }
  for (const auto& v : d.verifications) {
    if (!is_known_verification(v)) {
      throw UnknownVerification("relation '" + d.id + "': unknown verification '" + v + "'");
    }
  }
  relations_.push_back(std::move(d));
}

void RelationRegistry::add_function(std::string id, TransformFunction fn) {
  functions_[std::move(id)] = std::move(fn);
}

void RelationRegistry::add_prompt_template(std::string id, std::string tmpl) {
  templates_[std::move(id)] = std::move(tmpl);
}

const RelationDescriptor* RelationRegistry::find(std::string_view id) const {
  for (const auto& r : relations_) {
    if (r.id == id) return &r;
  }
  return nullptr;
}

std::vector<const RelationDescriptor*> RelationRegistry::for_task(
    std::string_view task_id) const {
  std::vector<const RelationDescriptor*> out;
  for (const auto& r : relations_) {
    if (r.applies_to(task_id)) out.push_back(&r);
  }
  return out;
}

const TransformFunction* RelationRegistry::function(std::string_view id) const {
  auto it = functions_.find(id);
  return it == functions_.end() ? nullptr : &it->second;
}

const std::string* RelationRegistry::prompt_template(std::string_view id) const {
  auto it = templates_.find(id);
  return it == templates_.end() ? nullptr : &it->second;
}

RelationRegistry register_relation(RelationDescriptor descriptor,
                                   RelationRegistry registry) {
  registry.add(std::move(descriptor));
  return registry;
}

std::map<std::string, std::string, std::less<>> builtin_prompt_templates() {
  return {{std::string(kParaphraseTemplateId),
           "Paraphrase the text below. Keep its meaning and every fact it states, "
           "but change the wording. Reply with the paraphrase only.\n\n"
           "{EXAMPLES}Input: {INPUT}\nOutput:"}};
}

std::vector<RelationDescriptor> builtin_relations() {
  using OR = OutputRelationKind;
  using P = InputTargetPolicy;
  using TS = TransformationSpec;
  std::vector<RelationDescriptor> r;
  r.push_back({"MR-51", "Paraphrasing", {"qa", "nli", "sa", "re"},
               TS::prompted(std::string(kParaphraseTemplateId), paraphrase_examples()),
               OR::Equivalent, {"source_non_empty", "followup_differs"}, P::EachAndAll});
  r.push_back({"MR-84", "Concatenating a random sentence", {"qa", "sa"},
               TS::functional("concat_random_sentence"), OR::Equivalent,
               {"source_non_empty"}, P::EachSlot});
  r.push_back({"MR-spaces", "Adding random spaces", {"qa", "nli", "sa", "re"},
               TS::functional("insert_random_spaces"), OR::Equivalent,
               {"source_non_empty"}, P::AllSlots});
  // The relations below extend the catalog beyond the three above.
  r.push_back({"MR-uppercase", "Converting the input to upper case", {"qa", "nli", "sa"},
               TS::functional("to_uppercase"), OR::Equivalent,
               {"source_non_empty", "followup_differs"}, P::AllSlots});
  r.push_back({"MR-synonym", "Replacing a word with a synonym", {"qa", "nli", "sa"},
               TS::functional("substitute_synonym"), OR::Equivalent,
               {"followup_differs"}, P::EachAndAll});
  r.push_back({"MR-typo", "Swapping two adjacent characters", {"qa", "nli", "sa", "re"},
               TS::functional("swap_adjacent_characters"), OR::Equivalent,
               {"followup_differs"}, P::EachSlot});
  r.push_back({"MR-punct", "Appending trailing punctuation", {"sa"},
               TS::functional("append_punctuation"), OR::NumericEqual,
               {"source_non_empty"}, P::EachSlot});
  r.push_back({"MR-shuffle", "Shuffling sentence order", {"re"},
               TS::functional("shuffle_sentences"), OR::SetEqual,
               {"multi_sentence_source", "followup_differs"}, P::EachSlot});
  return r;
}

// --- JSON -------------------------------------------------------------------

json relation_to_json(const RelationDescriptor& r) {
  json t{{"kind", to_string(r.transformation.kind)}};
  if (r.transformation.kind == TransformationKind::Functional) {
    t["function_id"] = r.transformation.function_id;
  } else {
    t["prompt_template_id"] = r.transformation.prompt_template_id;
    json ex = json::array();
    for (const auto& e : r.transformation.few_shot_examples) {
      ex.push_back({{"input", e.input}, {"output", e.output}});
    }
    t["few_shot_examples"] = std::move(ex);
  }
  return json{{"id", r.id},
              {"name", r.name},
              {"applicable_tasks", r.applicable_tasks},
              {"transformation", std::move(t)},
              {"output_relation", to_string(r.output_relation)},
              {"verifications", r.verifications},
              {"input_target_policy", to_string(r.input_target_policy)}};
}

RelationDescriptor relation_from_json(const json& j) {
  static const std::set<std::string> kFields = {
      "id", "name", "applicable_tasks", "transformation",
      "output_relation", "verifications", "input_target_policy"};
  try {
    for (const auto& [key, _] : j.items()) {
      if (!kFields.contains(key)) {
        throw InvalidRelation("relation field '" + key + "' is not recognised");
      }
    }
    RelationDescriptor r;
    r.id = j.at("id").get<std::string>();
    r.name = j.value("name", r.id);
    r.applicable_tasks = j.at("applicable_tasks").get<std::set<std::string>>();
    const auto& t = j.at("transformation");
    r.transformation.kind =
        enum_from_string(t.at("kind").get<std::string>(), kTransformKinds, "transformation kind");
    r.transformation.function_id = t.value("function_id", std::string());
    r.transformation.prompt_template_id = t.value("prompt_template_id", std::string());
    for (const auto& e : t.value("few_shot_examples", json::array())) {
      r.transformation.few_shot_examples.push_back(
          {e.at("input").get<std::string>(), e.at("output").get<std::string>()});
    }
    r.output_relation = enum_from_string(j.at("output_relation").get<std::string>(),
                                         kRelationKinds, "output relation");
    r.verifications = j.value("verifications", std::vector<std::string>{});
    r.input_target_policy = enum_from_string(
        j.value("input_target_policy", std::string("EACH_SLOT")), kPolicies,
        "input target policy");
    return r;
  } catch (const json::exception& e) {
    throw InvalidRelation(std::string("malformed relation: ") + e.what());
  }
}

std::vector<RelationDescriptor> load_relations(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw InvalidRelation(path.string() + ": " + e.what());
  }
  if (!j.is_array()) throw InvalidRelation(path.string() + ": expected a JSON array");
  std::vector<RelationDescriptor> out;
  for (const auto& e : j) out.push_back(relation_from_json(e));
  return out;
}

std::map<std::string, std::string, std::less<>> load_prompt_templates(
    const std::filesystem::path& path) {
  try {
    const auto j = json::parse(read_file(path));
    std::map<std::string, std::string, std::less<>> out;
    for (const auto& [id, tmpl] : j.items()) out.emplace(id, tmpl.get<std::string>());
    return out;
  } catch (const json::exception& e) {
    throw InvalidRelation(path.string() + ": " + e.what());
  }
}

// --- transformation ---------------------------------------------------------

std::string render_transformation_prompt(std::string_view tmpl,
                                         std::span<const FewShotExample> examples,
                                         std::string_view text) {
  std::string shots;
  for (const auto& e : examples) {
    shots += "Input: " + e.input + "\nOutput: " + e.output + "\n\n";
  }
  std::string out;
  std::size_t pos = 0;
  while (pos < tmpl.size()) {
    const auto brace = tmpl.find('{', pos);
    if (brace == std::string_view::npos) {
      out.append(tmpl.substr(pos));
      break;
    }
    out.append(tmpl.substr(pos, brace - pos));
    if (tmpl.substr(brace).starts_with("{EXAMPLES}")) {
      out += shots;
      pos = brace + 10;
    } else if (tmpl.substr(brace).starts_with("{INPUT}")) {
      out.append(text);
      pos = brace + 7;
    } else {
      out.push_back('{');
      pos = brace + 1;
    }
  }
  return out;
}

std::string transform_llm_prompted(std::string_view text, std::string_view tmpl,
                                   std::span<const FewShotExample> examples,
                                   LlmGateway& gateway, const LlmHandle& transformer) {
  std::string raw;
  try {
    raw = gateway.complete(transformer, render_transformation_prompt(tmpl, examples, text));
  } catch (const LlmUnreachable&) {
    throw;
  } catch (const AuthFailure&) {
    throw;
  } catch (const Error& e) {
    throw TransformationFailed(std::string("transformer LLM: ") + e.what());
  }
  auto cleaned = text::strip_quotes(raw);
  if (cleaned.empty()) {
    throw TransformationFailed("transformer LLM returned no usable text");
  }
  return cleaned;
}

std::string transform_paraphrase_llm(std::string_view text, LlmGateway& gateway,
                                     const LlmHandle& transformer) {
  static const auto templates = builtin_prompt_templates();
  return transform_llm_prompted(text, templates.at(std::string(kParaphraseTemplateId)),
                                paraphrase_examples(), gateway, transformer);
}

FollowupDerivation derive_followups(const RelationDescriptor& mr,
                                    const InputTuple& source, const TaskSpec& task,
                                    std::uint64_t seed,
                                    const RelationRegistry& registry,
                                    const TransformContext& ctx) {
  if (!mr.applies_to(task.id)) {
    throw NotApplicable("relation '" + mr.id + "' does not apply to task '" + task.id + "'");
  }
  if (source.size() != task.arity()) {
    throw ArityMismatch("task '" + task.id + "' expects " + std::to_string(task.arity()) +
                        " inputs, got " + std::to_string(source.size()));
  }

  const auto combos = slot_combinations(mr.input_target_policy, task.arity());
  std::vector<std::optional<std::string>> transformed(task.arity());
  for (const auto& combo : combos) {
    for (auto slot : combo) {
      if (transformed[slot]) continue;
      const auto& t = mr.transformation;
      if (t.kind == TransformationKind::Functional) {
        const auto* fn = registry.function(t.function_id);
        if (fn == nullptr) throw UnknownFunctionId("no transform function '" + t.function_id + "'");
        transformed[slot] = (*fn)(source[slot], combine_seed(seed, slot));
      } else {
        const auto* tmpl = registry.prompt_template(t.prompt_template_id);
        if (tmpl == nullptr) {
          throw TransformationFailed("no prompt template '" + t.prompt_template_id + "'");
        }
        if (ctx.gateway == nullptr || ctx.transformer == nullptr) {
          throw TransformationFailed("relation '" + mr.id + "' needs a transformer LLM");
        }
        transformed[slot] = transform_llm_prompted(source[slot], *tmpl, t.few_shot_examples,
                                                   *ctx.gateway, *ctx.transformer);
      }
    }
  }

  FollowupDerivation d;
  d.seed_used = seed;
  for (const auto& combo : combos) {
    InputTuple tuple = source;
    for (auto slot : combo) tuple[slot] = *transformed[slot];
    d.followup_inputs.push_back(std::move(tuple));
    d.transformed_slots.push_back(combo);
  }
  return d;
}

// --- output relation --------------------------------------------------------

RelationVerdict check_output_relation(const RelationDescriptor& mr,
                                      const TaskOutput& source_output,
                                      const TaskOutput& followup_output,
                                      const ComparatorConfig& comparators) {
  if (source_output.kind != followup_output.kind) {
    throw OutputKindMismatch("outputs of different kinds cannot be compared");
  }
  const auto kind = source_output.kind;
  if (mr.output_relation == OutputRelationKind::NumericEqual &&
      kind != OutputKind::NumericScore) {
    throw OutputKindMismatch("relation '" + mr.id + "' needs numeric outputs, got " +
                             std::string(to_string(kind)));
  }
  if (mr.output_relation == OutputRelationKind::SetEqual && kind != OutputKind::TupleSet) {
    throw OutputKindMismatch("relation '" + mr.id + "' needs tuple-set outputs, got " +
                             std::string(to_string(kind)));
  }
  if (!source_output.parse_ok || !followup_output.parse_ok) {
    return RelationVerdict::Indeterminate;
  }

  const bool expect_same = mr.output_relation != OutputRelationKind::Different;
  switch (kind) {
    case OutputKind::FreeText: {
      const auto& a = std::get<std::string>(source_output.parsed);
      const auto& b = std::get<std::string>(followup_output.parsed);
      if (exact_equal(a, b)) return from_bool(expect_same);
      const double score =
          semantic_similarity(a, b, comparators.embedding_provider.get());
      return semantic_verdict(score,
                              expect_same ? SemanticExpectation::Equivalent
                                          : SemanticExpectation::Different,
                              comparators);
    }
    case OutputKind::Label: {
      const bool same = std::get<std::string>(source_output.parsed) ==
                        std::get<std::string>(followup_output.parsed);
      return from_bool(same == expect_same);
    }
    case OutputKind::NumericScore: {
      const bool same = numeric_equivalent(std::get<double>(source_output.parsed),
                                           std::get<double>(followup_output.parsed),
                                           comparators.numeric_window);
      return from_bool(same == expect_same);
    }
    case OutputKind::TupleSet: {
      const bool same = set_compare(std::get<TupleSet>(source_output.parsed),
                                    std::get<TupleSet>(followup_output.parsed)) ==
                        SetRelation::SetEqual;
      return from_bool(same == expect_same);
    }
  }
  return RelationVerdict::Indeterminate;
}

// --- verifications ----------------------------------------------------------

bool run_verifications(const RelationDescriptor& mr, const InputTuple& source,
                       const FollowupDerivation& followups, const GroupOutputs* outputs) {
  for (const auto& name : mr.verifications) {
    const auto phase = verification_phase(name);
    if (phase == VerificationPhase::Output && outputs == nullptr) continue;

    bool ok = true;
    if (name == "source_non_empty") {
      ok = std::all_of(source.begin(), source.end(),
                       [](const auto& s) { return !text::trim(s).empty(); });
    } else if (name == "followup_differs") {
      ok = std::none_of(followups.followup_inputs.begin(), followups.followup_inputs.end(),
                        [&](const auto& f) { return f == source; });
    } else if (name == "multi_sentence_source") {
      for (const auto& slots : followups.transformed_slots) {
        for (auto slot : slots) {
          if (text::split_sentences(source.at(slot)).size() < 2) ok = false;
        }
      }
    } else if (name == "outputs_parsed") {
      ok = outputs->source.parse_ok &&
           std::all_of(outputs->followups.begin(), outputs->followups.end(),
                       [](const auto& o) { return o.parse_ok; });
    }
    if (!ok) return true;
  }
  return false;
}

}  // namespace morphtest
