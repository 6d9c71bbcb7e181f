#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>

#include "morphtest/config.hpp"
#include "morphtest/errors.hpp"
#include "test_support.hpp"

using namespace morphtest;
using morphtest::testing::TempDir;
using ojson = nlohmann::ordered_json;

namespace {

std::vector<std::string> args(std::initializer_list<const char*> a) { return {a.begin(), a.end()}; }

std::filesystem::path write_config(const TempDir& dir, const std::string& body) {
  const auto p = dir / "run_config.json";
  std::ofstream(p) << body;
  return p;
}

std::vector<std::string> ids(const PlannedTask& p) {
  std::vector<std::string> out;
  for (const auto* r : p.relations) out.push_back(r->id);
  return out;
}

}  // namespace

TEST(ParseCli, FiveArguments) {
  const auto catalog = Catalog::builtin();
  const auto cfg = parse_cli(
      args({"--llm", "m", "--task", "qa", "--mr", "MR-84", "--input_data", "d.json", "--base_dir", "out"}),
      catalog);
  EXPECT_EQ(cfg.llm_list, std::vector<std::string>{"m"});
  ASSERT_EQ(cfg.tasks.size(), 1u);
  EXPECT_EQ(cfg.tasks[0].first, "qa");
  EXPECT_EQ(cfg.tasks[0].second, std::vector<std::string>{"MR-84"});
  EXPECT_EQ(cfg.input_data, "d.json");
  EXPECT_EQ(cfg.base_dir, "out");
  // Everything else keeps its default.
  RunConfig defaults;
  EXPECT_EQ(cfg.checkpoint_interval, defaults.checkpoint_interval);
  EXPECT_EQ(cfg.llm_endpoint, defaults.llm_endpoint);
  EXPECT_FALSE(cfg.llm_for_transformation.has_value());
  EXPECT_EQ(cfg.seed, 0u);
  EXPECT_EQ(cfg.max_concurrent_requests, 4u);
}

TEST(ParseCli, EqualsFormIsAccepted) {
  const auto cfg = parse_cli(args({"--llm=m", "--task=sa", "--mr=MR-punct", "--input_data=x.json",
                                   "--base_dir=o"}),
                             Catalog::builtin());
  EXPECT_EQ(cfg.tasks[0].second, std::vector<std::string>{"MR-punct"});
}

TEST(ParseCli, MissingArgumentNamesIt) {
  try {
    parse_cli(args({"--llm", "m", "--mr", "MR-84", "--input_data", "d.json", "--base_dir", "out"}),
              Catalog::builtin());
    FAIL();
  } catch (const MissingArgument& e) {
    EXPECT_NE(std::string(e.what()).find("'task'"), std::string::npos) << e.what();
  }
}

TEST(ParseCli, UnknownNames) {
  const auto catalog = Catalog::builtin();
  EXPECT_THROW(parse_cli(args({"--llm", "m", "--task", "qa", "--mr", "NOPE", "--input_data", "d",
                               "--base_dir", "o"}),
                         catalog),
               UnknownRelation);
  EXPECT_THROW(parse_cli(args({"--llm", "m", "--task", "xx", "--mr", "MR-84", "--input_data", "d",
                               "--base_dir", "o"}),
                         catalog),
               UnknownTask);
  // MR-punct exists but does not apply to qa.
  EXPECT_THROW(parse_cli(args({"--llm", "m", "--task", "qa", "--mr", "MR-punct", "--input_data",
                               "d", "--base_dir", "o"}),
                         catalog),
               UnknownRelation);
  EXPECT_THROW(parse_cli(args({"--llm", "m", "--task", "qa", "--mr", "MR-84", "--input_data", "d",
                               "--base_dir", "o", "--bogus", "1"}),
                         catalog),
               MalformedConfig);
}

TEST(LoadConfig, EveryDocumentedKey) {
  TempDir dir;
  const auto path = write_config(dir, R"({
    "llm_list": ["gpt-a", "gpt-b"],
    "tasks": {"sa": [], "qa": ["MR-84"]},
    "input_data": "inputs.json",
    "base_dir": "results-here",
    "checkpoint_interval": 7,
    "continue_from_checkpoint": true,
    "llm_endpoint": "http://localhost:9/v1",
    "llm_for_transformation": "gpt-t"
  })");
  const auto catalog = Catalog::builtin();
  const auto cfg = load_config(path, catalog);
  EXPECT_EQ(cfg.llm_list, (std::vector<std::string>{"gpt-a", "gpt-b"}));
  EXPECT_EQ(cfg.checkpoint_interval, 7u);
  EXPECT_TRUE(cfg.continue_from_checkpoint);
  EXPECT_EQ(cfg.llm_endpoint, "http://localhost:9/v1");
  EXPECT_EQ(cfg.transformer_for("gpt-a"), "gpt-t");
  EXPECT_EQ(cfg.base_dir, "results-here");

  const auto plan = expand_plan(cfg, catalog);
  ASSERT_EQ(plan.size(), 2u);
  EXPECT_EQ(plan[0].task->id, "sa");  // file order kept
  std::vector<std::string> expected_sa;
  for (const auto* r : catalog.relations.for_task("sa")) expected_sa.push_back(r->id);
  EXPECT_EQ(ids(plan[0]), expected_sa);
  EXPECT_EQ(ids(plan[1]), std::vector<std::string>{"MR-84"});
}

TEST(LoadConfig, TransformerDefaultsToModelUnderTest) {
  TempDir dir;
  const auto cfg = load_config(write_config(dir, R"({"llm_list": ["m1", "m2"],
      "tasks": {"qa": []}, "input_data": "d.json"})"),
                               Catalog::builtin());
  EXPECT_FALSE(cfg.llm_for_transformation.has_value());
  EXPECT_EQ(cfg.transformer_for("m1"), "m1");
  EXPECT_EQ(cfg.transformer_for("m2"), "m2");
}

TEST(LoadConfig, EmptyListExpandsOnlyToCompatibleRelations) {
  // A catalog with exactly three relations for sa.
  Catalog catalog;
  catalog.tasks = builtin_tasks();
  for (const auto& r : builtin_relations()) {
    if (r.id == "MR-84" || r.id == "MR-punct" || r.id == "MR-typo") catalog.relations.add(r);
  }
  RunConfig cfg;
  cfg.llm_list = {"m"};
  cfg.tasks = {{"sa", {}}};
  cfg.input_data = "d.json";
  const auto plan = expand_plan(cfg, catalog);
  EXPECT_EQ(ids(plan[0]), (std::vector<std::string>{"MR-84", "MR-typo", "MR-punct"}));
  // re cannot use the numeric relation even if it were tagged for it.
  cfg.tasks = {{"re", {}}};
  const auto builtin = Catalog::builtin();
  const auto re_plan = expand_plan(cfg, builtin);
  for (const auto* r : re_plan[0].relations) {
    EXPECT_NE(r->output_relation, OutputRelationKind::NumericEqual);
  }
}

TEST(LoadConfig, Rejections) {
  TempDir dir;
  const auto catalog = Catalog::builtin();
  const auto bad = [&](const std::string& body) { return load_config(write_config(dir, body), catalog); };
  EXPECT_THROW(bad(R"({"llm_list": ["m"], "tasks": {"qa": []}, "input_data": "d", "checkpoint_interval": 0})"),
               MalformedConfig);
  try {
    bad(R"({"llm_list": ["m"], "tasks": {"qa": []}, "input_data": "d", "checkpoint_intreval": 5})");
    FAIL();
  } catch (const MalformedConfig& e) {
    EXPECT_NE(std::string(e.what()).find("checkpoint_intreval"), std::string::npos);
  }
  EXPECT_THROW(bad(R"({"llm_list": [], "tasks": {"qa": []}, "input_data": "d"})"), MalformedConfig);
  EXPECT_THROW(bad(R"({"tasks": {"qa": []}, "input_data": "d"})"), MalformedConfig);
  EXPECT_THROW(bad(R"({"llm_list": ["m"], "tasks": {"zz": []}, "input_data": "d"})"), UnknownTask);
  EXPECT_THROW(bad(R"({"llm_list": ["m"], "tasks": {"qa": ["MR-0"]}, "input_data": "d"})"),
               UnknownRelation);
  EXPECT_THROW(bad(R"({"llm_list": ["m"], "tasks": {"qa": []}, "input_data": "d",
                       "equivalence_threshold": 0.3})"),
               MalformedConfig);
  EXPECT_THROW(bad(R"({"llm_list": ["m"], "tasks": {"qa": []}, "input_data": "d", "seed": "x"})"),
               MalformedConfig);
  EXPECT_THROW(bad("{not json"), MalformedConfig);
  EXPECT_THROW(load_config(dir / "missing.json", catalog), MalformedConfig);
  EXPECT_THROW(bad(R"({"llm_list": ["m"], "tasks": {"qa": []}, "input_data": {"sa": "x"}})"),
               MalformedConfig);
}

TEST(LoadConfig, ArtifactExtensions) {
  TempDir dir;
  const auto cfg = load_config(write_config(dir, R"({
    "llm_list": ["m"], "tasks": {"qa": [], "sa": ["MR-punct"]},
    "input_data": {"*": "all.json", "sa": "sa.json"},
    "seed": 42, "equivalence_threshold": 0.9, "difference_threshold": 0.3,
    "numeric_window": 0.05, "max_concurrent_requests": 2,
    "embedding_model": "offline", "use_cache": false, "max_attempts": 5
  })"),
                               Catalog::builtin());
  EXPECT_EQ(cfg.seed, 42u);
  EXPECT_EQ(cfg.input_path_for("qa"), "all.json");
  EXPECT_EQ(cfg.input_path_for("sa"), "sa.json");
  const auto comps = comparator_config(cfg);
  EXPECT_EQ(comps.equivalence_threshold, 0.9);
  EXPECT_EQ(comps.difference_threshold, 0.3);
  EXPECT_EQ(comps.numeric_window, 0.05);
  const auto gw = gateway_options(cfg);
  EXPECT_FALSE(gw.cache_dir.has_value());
  EXPECT_EQ(gw.retry.max_attempts, 5);
  EXPECT_EQ(gw.max_concurrent_requests, 2u);
}

TEST(ConfigJson, RoundTrip) {
  RunConfig cfg;
  cfg.llm_list = {"a", "b"};
  cfg.tasks = {{"sa", {"MR-84"}}, {"qa", {}}};
  cfg.input_data = "in.json";
  cfg.input_data_by_task = {{"qa", "qa.json"}};
  cfg.llm_for_transformation = "t";
  cfg.seed = 12345678901234ULL;
  cfg.embedding_endpoint = "http://e";
  cfg.catalog_dir = "cat";
  EXPECT_EQ(config_from_json(config_to_json(cfg)), cfg);
}

TEST(ConfigEquivalence, CliAndFileAgree) {
  TempDir dir;
  const auto catalog = Catalog::builtin();
  const auto from_cli = parse_cli(
      args({"--llm", "m", "--task", "qa", "--mr", "MR-84", "--input_data", "d.json", "--base_dir", "out"}),
      catalog);
  const auto from_file = load_config(
      write_config(dir, R"({"llm_list": ["m"], "tasks": {"qa": ["MR-84"]},
                            "input_data": "d.json", "base_dir": "out"})"),
      catalog);
  EXPECT_EQ(from_cli, from_file);
  EXPECT_EQ(config_digest(from_cli), config_digest(from_file));
}

TEST(ConfigDigest, IgnoresResumeFlagAndParallelism) {
  RunConfig a;
  a.llm_list = {"m"};
  a.tasks = {{"qa", {}}};
  a.input_data = "d";
  auto b = a;
  b.continue_from_checkpoint = true;
  b.max_concurrent_requests = 16;
  EXPECT_EQ(config_digest(a), config_digest(b));
  auto c = a;
  c.seed = 1;
  EXPECT_NE(config_digest(a), config_digest(c));
}

TEST(Catalog, LoadsBundledDirectory) {
  const auto catalog = Catalog::load(morphtest::testing::source_dir() / "config");
  EXPECT_EQ(catalog.tasks, builtin_tasks());
  EXPECT_EQ(catalog.relations.size(), builtin_relations().size());
  EXPECT_NE(catalog.relations.prompt_template("paraphrase"), nullptr);
}

TEST(Catalog, BundledRunConfigValidates) {
  const auto cfg = load_config(morphtest::testing::source_dir() / "config" / "run_config.json",
                               Catalog::builtin());
  EXPECT_FALSE(cfg.llm_list.empty());
  EXPECT_NO_THROW(load_config(morphtest::testing::source_dir() / "config" / "example_mock_config.json",
                              Catalog::builtin()));
}

TEST(AuthToken, EnvironmentOverride) {
  ::unsetenv("MORPHTEST_TOKEN_PATH");
  EXPECT_EQ(auth_token_path(), "security/token-key.jwt");
  ::setenv("MORPHTEST_TOKEN_PATH", "/tmp/other.jwt", 1);
  EXPECT_EQ(auth_token_path(), "/tmp/other.jwt");
  ::unsetenv("MORPHTEST_TOKEN_PATH");
}
