#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "morphtest/comparators.hpp"
#include "morphtest/gateway.hpp"
#include "morphtest/relation.hpp"
#include "morphtest/task.hpp"

namespace morphtest {

/// Tasks and relations a run can refer to.
struct Catalog {
  std::vector<TaskSpec> tasks;
  RelationRegistry relations;

  static Catalog builtin();
  /// Reads list_tasks.json, list_relations.json and the template/ directory
  /// (sut_prompt_templates.json, it_prompt_templates.json) under `dir`.
  static Catalog load(const std::filesystem::path& dir);
};

inline constexpr std::string_view kOfflineEmbedding = "offline";
inline constexpr std::string_view kTokenPathEnv = "MORPHTEST_TOKEN_PATH";

struct RunConfig {
  std::vector<std::string> llm_list;
  /// Task id -> relation ids, in file order. An empty list means every
  /// registered relation that applies to the task.
  std::vector<std::pair<std::string, std::vector<std::string>>> tasks;
  /// One data file for every task, optionally overridden per task.
  std::filesystem::path input_data;
  std::map<std::string, std::filesystem::path> input_data_by_task;
  std::filesystem::path base_dir = "output";
  std::size_t checkpoint_interval = 100;
  bool continue_from_checkpoint = false;
  std::string llm_endpoint{kDefaultEndpoint};
  std::optional<std::string> llm_for_transformation;
  std::uint64_t seed = 0;
  double equivalence_threshold = 0.8;
  double difference_threshold = 0.4;
  double numeric_window = 0.1;
  std::size_t max_concurrent_requests = 4;
  /// "offline" selects the hashed bag-of-words provider.
  std::string embedding_model = "paraphrase-MiniLM-L6-v2";
  std::optional<std::string> embedding_endpoint;  // defaults to llm_endpoint
  bool use_cache = true;
  int max_attempts = 3;
  std::optional<std::filesystem::path> catalog_dir;

  /// The model used for LLM-prompted transformations when testing `model`.
  std::string transformer_for(const std::string& model) const {
    return llm_for_transformation.value_or(model);
  }
  const std::filesystem::path& input_path_for(const std::string& task_id) const;

  bool operator==(const RunConfig&) const = default;
};

/// Every key, defaults included. Ordered so `tasks` keeps its order.
nlohmann::ordered_json config_to_json(const RunConfig& cfg);
/// Rejects unknown keys by name. Throws MalformedConfig.
RunConfig config_from_json(const nlohmann::ordered_json& j);

/// Checks the config against itself and the catalog. Throws MalformedConfig,
/// UnknownTask or UnknownRelation.
void validate_config(const RunConfig& cfg, const Catalog& catalog);

/// Reads, parses and validates a configuration file.
RunConfig load_config(const std::filesystem::path& path, const Catalog& catalog);

/// The five-argument command line: --llm, --task, --mr, --input_data,
/// --base_dir (the `--key=value` form is accepted too). Throws
/// MissingArgument, UnknownTask, UnknownRelation or MalformedConfig.
RunConfig parse_cli(std::span<const std::string> args, const Catalog& catalog);

/// Digest of the settings that shape the results. Resume bookkeeping
/// (continue_from_checkpoint) and parallelism are left out.
std::string config_digest(const RunConfig& cfg);

struct PlannedTask {
  const TaskSpec* task;
  std::vector<const RelationDescriptor*> relations;
};

/// Resolves ids against the catalog and expands empty relation lists.
std::vector<PlannedTask> expand_plan(const RunConfig& cfg, const Catalog& catalog);

ComparatorConfig comparator_config(const RunConfig& cfg);
GatewayOptions gateway_options(const RunConfig& cfg);

/// $MORPHTEST_TOKEN_PATH if set, else security/token-key.jwt.
std::filesystem::path auth_token_path();

}  // namespace morphtest
