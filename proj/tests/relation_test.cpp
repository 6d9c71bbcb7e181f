#include <gtest/gtest.h>

#include <fstream>

#include "morphtest/errors.hpp"
#include "morphtest/gateway.hpp"
#include "morphtest/relation.hpp"
#include "morphtest/task.hpp"
#include "test_support.hpp"

using namespace morphtest;
using nlohmann::json;

namespace {

const TaskSpec& task(std::string_view id) { return *find_task(builtin_tasks(), id); }

RelationDescriptor mr84() {
  return {"MR-84", "Concatenating a random sentence", {"qa", "sa"},
          TransformationSpec::functional("concat_random_sentence"),
          OutputRelationKind::Equivalent, {}, InputTargetPolicy::EachSlot};
}

TaskOutput out(std::string_view task_id, std::string_view raw) {
  return parse_output(task(task_id), raw);
}

ComparatorConfig offline_comparators() {
  ComparatorConfig c;
  c.embedding_provider = std::make_shared<HashedBagOfWordsEmbedder>();
  return c;
}

}  // namespace

// --- registry ---------------------------------------------------------------

TEST(Registry, RegisterIntoEmpty) {
  const auto reg = register_relation(mr84(), RelationRegistry{});
  EXPECT_EQ(reg.size(), 1u);
  ASSERT_NE(reg.find("MR-84"), nullptr);
  EXPECT_EQ(*reg.find("MR-84"), mr84());
}

TEST(Registry, DuplicateId) {
  auto reg = register_relation(mr84(), RelationRegistry{});
  EXPECT_THROW(register_relation(mr84(), reg), DuplicateRelationId);
}

TEST(Registry, UnknownFunctionAndOtherInvalidDescriptors) {
  auto bad = mr84();
  bad.transformation.function_id = "no_such_function";
  EXPECT_THROW(register_relation(bad, RelationRegistry{}), UnknownFunctionId);

  auto no_tasks = mr84();
  no_tasks.applicable_tasks.clear();
  EXPECT_THROW(register_relation(no_tasks, RelationRegistry{}), InvalidRelation);

  auto unknown_check = mr84();
  unknown_check.verifications = {"is_sunny"};
  EXPECT_THROW(register_relation(unknown_check, RelationRegistry{}), UnknownVerification);

  auto both = mr84();
  both.transformation.prompt_template_id = "paraphrase";
  EXPECT_THROW(register_relation(both, RelationRegistry{}), InvalidRelation);

  RelationDescriptor prompted{"P", "p", {"qa"}, TransformationSpec::prompted("paraphrase", {}),
                              OutputRelationKind::Equivalent, {}, InputTargetPolicy::EachSlot};
  EXPECT_THROW(register_relation(prompted, RelationRegistry{}), InvalidRelation);
  prompted.transformation.few_shot_examples = {{"a", "b"}};
  prompted.transformation.prompt_template_id = "missing-template";
  EXPECT_THROW(register_relation(prompted, RelationRegistry{}), InvalidRelation);
}

TEST(Registry, ForTaskFiltersOnApplicability) {
  const auto reg = RelationRegistry::with_builtins();
  // Oracle: filter the catalog by hand.
  std::vector<std::string> expected;
  for (const auto& r : builtin_relations()) {
    if (r.applicable_tasks.contains("sa")) expected.push_back(r.id);
  }
  std::vector<std::string> got;
  for (const auto* r : reg.for_task("sa")) got.push_back(r->id);
  EXPECT_EQ(got, expected);
  EXPECT_FALSE(got.empty());
  for (const auto* r : reg.for_task("sa")) EXPECT_TRUE(r->applies_to("sa"));
}

TEST(Registry, BuiltinsIncludeTheNamedRelations) {
  const auto reg = RelationRegistry::with_builtins();
  for (const char* id : {"MR-51", "MR-84", "MR-spaces"}) EXPECT_NE(reg.find(id), nullptr) << id;
  EXPECT_EQ(reg.find("MR-51")->transformation.kind, TransformationKind::LlmPrompted);
  EXPECT_EQ(reg.find("MR-51")->input_target_policy, InputTargetPolicy::EachAndAll);
}

TEST(RelationFiles, BundledFilesMatchTheBuiltins) {
  const auto dir = morphtest::testing::source_dir() / "config";
  EXPECT_EQ(load_relations(dir / "list_relations.json"), builtin_relations());
  EXPECT_EQ(load_prompt_templates(dir / "template" / "it_prompt_templates.json"),
            builtin_prompt_templates());
}

TEST(RelationFiles, JsonRoundTripAndStrictFields) {
  for (const auto& r : builtin_relations()) {
    EXPECT_EQ(relation_from_json(relation_to_json(r)), r) << r.id;
    const auto j = relation_to_json(r);
    for (const char* key : {"id", "name", "applicable_tasks", "transformation",
                            "output_relation", "verifications", "input_target_policy"}) {
      EXPECT_TRUE(j.contains(key)) << key;
    }
    EXPECT_EQ(j.size(), 7u);
  }
  auto j = relation_to_json(mr84());
  j["colour"] = "blue";
  EXPECT_THROW(relation_from_json(j), InvalidRelation);
  auto k = relation_to_json(mr84());
  k["output_relation"] = "SIMILAR";
  EXPECT_THROW(relation_from_json(k), InvalidRelation);
}

// --- follow-up derivation ---------------------------------------------------

TEST(DeriveFollowups, EachAndAllOnNliGivesThree) {
  const auto reg = RelationRegistry::with_builtins();
  const auto* mr = reg.find("MR-uppercase");
  auto each_and_all = *mr;
  each_and_all.input_target_policy = InputTargetPolicy::EachAndAll;
  const InputTuple src{"A man plays.", "Someone makes music."};
  const auto d = derive_followups(each_and_all, src, task("nli"), 5, reg);
  ASSERT_EQ(d.followup_inputs.size(), 3u);
  EXPECT_EQ(d.transformed_slots,
            (std::vector<std::vector<std::size_t>>{{0}, {1}, {0, 1}}));
  EXPECT_EQ(d.followup_inputs[0], (InputTuple{"A MAN PLAYS.", "Someone makes music."}));
  EXPECT_EQ(d.followup_inputs[1], (InputTuple{"A man plays.", "SOMEONE MAKES MUSIC."}));
  EXPECT_EQ(d.followup_inputs[2], (InputTuple{"A MAN PLAYS.", "SOMEONE MAKES MUSIC."}));
  EXPECT_EQ(d.seed_used, 5u);
}

TEST(DeriveFollowups, PoliciesOnPairsAndSingles) {
  const auto reg = RelationRegistry::with_builtins();
  const InputTuple pair{"First text here.", "Second text here."};
  auto mr = *reg.find("MR-typo");
  mr.applicable_tasks.insert("nli");
  mr.input_target_policy = InputTargetPolicy::EachSlot;
  EXPECT_EQ(derive_followups(mr, pair, task("nli"), 1, reg).followup_inputs.size(), 2u);
  mr.input_target_policy = InputTargetPolicy::AllSlots;
  EXPECT_EQ(derive_followups(mr, pair, task("nli"), 1, reg).followup_inputs.size(), 1u);
  // On a 1-tuple every policy collapses to one follow-up.
  for (auto p : {InputTargetPolicy::EachSlot, InputTargetPolicy::AllSlots,
                 InputTargetPolicy::EachAndAll}) {
    mr.input_target_policy = p;
    EXPECT_EQ(derive_followups(mr, {"Only one slot."}, task("sa"), 1, reg).followup_inputs.size(),
              1u);
  }
}

TEST(DeriveFollowups, CombinedFollowupAgreesWithSingleSlotOnes) {
  const auto reg = RelationRegistry::with_builtins();
  auto mr = *reg.find("MR-spaces");
  mr.input_target_policy = InputTargetPolicy::EachAndAll;
  const auto d = derive_followups(mr, {"premise text", "hypothesis text"}, task("nli"), 77, reg);
  ASSERT_EQ(d.followup_inputs.size(), 3u);
  EXPECT_EQ(d.followup_inputs[2][0], d.followup_inputs[0][0]);
  EXPECT_EQ(d.followup_inputs[2][1], d.followup_inputs[1][1]);
}

TEST(DeriveFollowups, DeterministicForFunctional) {
  const auto reg = RelationRegistry::with_builtins();
  const auto* mr = reg.find("MR-84");
  const InputTuple src{"The area in which a glacier forms is called a cirque.", "Why?"};
  EXPECT_EQ(derive_followups(*mr, src, task("qa"), 99, reg),
            derive_followups(*mr, src, task("qa"), 99, reg));
}

TEST(DeriveFollowups, Errors) {
  const auto reg = RelationRegistry::with_builtins();
  EXPECT_THROW(derive_followups(*reg.find("MR-punct"), {"a", "b"}, task("qa"), 1, reg),
               NotApplicable);
  EXPECT_THROW(derive_followups(*reg.find("MR-84"), {"only one"}, task("qa"), 1, reg),
               ArityMismatch);
  // Prompted relation without a transformer model.
  EXPECT_THROW(derive_followups(*reg.find("MR-51"), {"text"}, task("sa"), 1, reg),
               TransformationFailed);
}

// --- LLM-prompted transformation ---------------------------------------------

TEST(Paraphrase, ReturnsTheMockAnswer) {
  auto script = std::make_shared<MockScript>("unused");
  script->on_substring("Input: The movie was great\nOutput:", "The film was excellent");
  LlmGateway gw;
  const auto handle = LlmHandle::mock("transformer", script);
  EXPECT_EQ(transform_paraphrase_llm("The movie was great", gw, handle), "The film was excellent");
  ASSERT_EQ(script->call_count(), 1u);
  const auto prompt = script->call_log().front();
  // Every few-shot example is in the prompt.
  EXPECT_NE(prompt.find("Paris is the capital of France."), std::string::npos);
  EXPECT_NE(prompt.find("On stage, a man plays the guitar."), std::string::npos);
}

TEST(Paraphrase, StripsWhitespaceAndQuotes) {
  LlmGateway gw;
  const auto handle = LlmHandle::mock("t", std::make_shared<MockScript>("  \"X\"  "));
  EXPECT_EQ(transform_paraphrase_llm("anything", gw, handle), "X");
}

TEST(Paraphrase, EmptyAnswerIsTransformationFailed) {
  LlmGateway gw;
  EXPECT_THROW(transform_paraphrase_llm("x", gw, LlmHandle::mock("t", std::make_shared<MockScript>(""))),
               TransformationFailed);
  EXPECT_THROW(
      transform_paraphrase_llm("x", gw, LlmHandle::mock("t", std::make_shared<MockScript>("\"\""))),
      TransformationFailed);
}

TEST(Paraphrase, UnreachableTransformerPropagates) {
  GatewayOptions opts;
  opts.retry.max_attempts = 2;
  opts.sleeper = [](auto) {};
  LlmGateway gw(opts);
  auto script = std::make_shared<MockScript>("fine");
  script->inject_failures(5);
  EXPECT_THROW(transform_paraphrase_llm("x", gw, LlmHandle::mock("t", script)), LlmUnreachable);
}

TEST(TransformationPrompt, Layout) {
  const std::vector<FewShotExample> ex{{"a", "b"}};
  EXPECT_EQ(render_transformation_prompt("P\n{EXAMPLES}Input: {INPUT}\nOutput:", ex, "c"),
            "P\nInput: a\nOutput: b\n\nInput: c\nOutput:");
}

// --- output relation ----------------------------------------------------------

TEST(CheckOutputRelation, GlacierAnswersViolateEquivalence) {
  const auto reg = RelationRegistry::with_builtins();
  EXPECT_EQ(check_output_relation(*reg.find("MR-spaces"), out("qa", "unknown"),
                                  out("qa", "cirque"), offline_comparators()),
            RelationVerdict::Violated);
}

TEST(CheckOutputRelation, ReflexiveForEveryKind) {
  const auto reg = RelationRegistry::with_builtins();
  const auto comps = offline_comparators();
  const std::vector<std::pair<std::string, std::string>> samples{
      {"qa", "unknown"}, {"qa", "A cirque."}, {"nli", "neutral"},
      {"sa", "0.3"},     {"re", "a | r | b"}, {"re", "none"}};
  for (const auto& [task_id, raw] : samples) {
    const auto x = out(task_id, raw);
    EXPECT_EQ(check_output_relation(*reg.find("MR-spaces"), x, x, comps),
              RelationVerdict::Satisfied)
        << task_id << " " << raw;
  }
}

TEST(CheckOutputRelation, NumericAndSetAndLabel) {
  const auto reg = RelationRegistry::with_builtins();
  const auto comps = offline_comparators();
  const auto& punct = *reg.find("MR-punct");
  EXPECT_EQ(check_output_relation(punct, out("sa", "0.50"), out("sa", "0.55"), comps),
            RelationVerdict::Satisfied);
  EXPECT_EQ(check_output_relation(punct, out("sa", "0.20"), out("sa", "0.35"), comps),
            RelationVerdict::Violated);
  const auto& shuffle = *reg.find("MR-shuffle");
  EXPECT_EQ(check_output_relation(shuffle, out("re", "a | r | b\nc | s | d"),
                                  out("re", "c | s | d\na | r | b"), comps),
            RelationVerdict::Satisfied);
  EXPECT_EQ(check_output_relation(shuffle, out("re", "a | r | b"), out("re", "none"), comps),
            RelationVerdict::Violated);
  const auto& typo = *reg.find("MR-typo");
  EXPECT_EQ(check_output_relation(typo, out("nli", "Entailment."), out("nli", "neutral"), comps),
            RelationVerdict::Violated);
}

TEST(CheckOutputRelation, DifferentExpectation) {
  RelationDescriptor diff{"D", "d", {"qa"}, TransformationSpec::functional("to_uppercase"),
                          OutputRelationKind::Different, {}, InputTargetPolicy::EachSlot};
  const auto comps = offline_comparators();
  EXPECT_EQ(check_output_relation(diff, out("qa", "unknown"), out("qa", "cirque"), comps),
            RelationVerdict::Satisfied);
  EXPECT_EQ(check_output_relation(diff, out("qa", "same"), out("qa", "same"), comps),
            RelationVerdict::Violated);
}

TEST(CheckOutputRelation, KindMismatchAndUnparsed) {
  const auto reg = RelationRegistry::with_builtins();
  const auto comps = offline_comparators();
  EXPECT_THROW(check_output_relation(*reg.find("MR-spaces"), out("qa", "x"), out("sa", "0.1"), comps),
               OutputKindMismatch);
  EXPECT_THROW(check_output_relation(*reg.find("MR-punct"), out("qa", "x"), out("qa", "y"), comps),
               OutputKindMismatch);
  EXPECT_EQ(check_output_relation(*reg.find("MR-punct"), out("sa", "n/a"), out("sa", "0.1"), comps),
            RelationVerdict::Indeterminate);
}

TEST(CheckOutputRelation, SemanticDeadZoneIsIndeterminate) {
  auto stub = std::make_shared<morphtest::testing::StubEmbedder>(
      std::map<std::string, Embedding, std::less<>>{{"alpha", {1, 0}}, {"beta", {0.6, 0.8}}});
  ComparatorConfig comps;
  comps.embedding_provider = stub;
  const auto reg = RelationRegistry::with_builtins();
  EXPECT_EQ(check_output_relation(*reg.find("MR-spaces"), out("qa", "alpha"), out("qa", "beta"),
                                  comps),
            RelationVerdict::Indeterminate);
}

// --- verifications ------------------------------------------------------------

TEST(Verifications, EchoingParaphraserFailsFollowupDiffers) {
  const auto reg = RelationRegistry::with_builtins();
  const auto& mr51 = *reg.find("MR-51");
  auto script = std::make_shared<MockScript>();
  // Echo: answer every paraphrase request with the text being paraphrased.
  script->on_substring("Input: The movie was great\nOutput:", "The movie was great");
  LlmGateway gw;
  const auto handle = LlmHandle::mock("t", script);
  const InputTuple src{"The movie was great"};
  const auto d = derive_followups(mr51, src, task("sa"), 1, reg, {&gw, &handle});
  EXPECT_TRUE(run_verifications(mr51, src, d));
}

TEST(Verifications, EmptyListIsVacuous) {
  auto mr = mr84();
  mr.verifications.clear();
  const auto reg = RelationRegistry::with_builtins();
  const auto d = derive_followups(mr, {""}, task("sa"), 1, reg);
  EXPECT_FALSE(run_verifications(mr, {""}, d));
}

TEST(Verifications, SourceNonEmptyOnEmptyText) {
  const auto reg = RelationRegistry::with_builtins();
  const auto& spaces = *reg.find("MR-spaces");
  const auto d = derive_followups(spaces, {""}, task("sa"), 1, reg);
  EXPECT_TRUE(run_verifications(spaces, {""}, d));
}

TEST(Verifications, MultiSentenceAndOutputPhase) {
  const auto reg = RelationRegistry::with_builtins();
  const auto& shuffle = *reg.find("MR-shuffle");
  const auto one = derive_followups(shuffle, {"Just one."}, task("re"), 1, reg);
  EXPECT_TRUE(run_verifications(shuffle, {"Just one."}, one));
  const auto two = derive_followups(shuffle, {"First. Second."}, task("re"), 1, reg);
  EXPECT_FALSE(run_verifications(shuffle, {"First. Second."}, two));

  RelationDescriptor parsed{"P", "p", {"sa"}, TransformationSpec::functional("to_uppercase"),
                            OutputRelationKind::NumericEqual, {"outputs_parsed"},
                            InputTargetPolicy::EachSlot};
  const auto d = derive_followups(parsed, {"ok"}, task("sa"), 1, reg);
  GroupOutputs good{out("sa", "0.4"), {out("sa", "0.5")}};
  GroupOutputs bad{out("sa", "0.4"), {out("sa", "meh")}};
  EXPECT_FALSE(run_verifications(parsed, {"ok"}, d));  // output phase skipped
  EXPECT_FALSE(run_verifications(parsed, {"ok"}, d, &good));
  EXPECT_TRUE(run_verifications(parsed, {"ok"}, d, &bad));

  RelationDescriptor unknown = parsed;
  unknown.verifications = {"nope"};
  EXPECT_THROW(run_verifications(unknown, {"ok"}, d), UnknownVerification);
  EXPECT_EQ(verification_phase("outputs_parsed"), VerificationPhase::Output);
  EXPECT_EQ(verification_phase("source_non_empty"), VerificationPhase::Input);
}
