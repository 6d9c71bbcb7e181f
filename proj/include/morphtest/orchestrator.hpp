#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "morphtest/config.hpp"
#include "morphtest/io.hpp"
#include "morphtest/record.hpp"
#include "morphtest/relation.hpp"
#include "morphtest/report.hpp"

namespace morphtest {

/// Shared, read-only collaborators of a test group.
struct GroupContext {
  const RelationRegistry& registry;
  LlmGateway& gateway;
  const LlmHandle& transformer;
  const ComparatorConfig& comparators;
};

/// Transform, query the model under test on the source and on every
/// follow-up, check verifications and the output relation.
///
/// LlmUnreachable, AuthFailure and EmbeddingUnavailable propagate: without
/// the endpoint the campaign cannot continue. Any other harness error
/// (failed transformation, empty answer, incompatible outputs) is contained:
/// the record comes back with verification_failure set, `error` filled in
/// and its follow-up lists padded to equal length.
TestRecord run_test_group(const LlmHandle& llm, const TaskSpec& task,
                          const RelationDescriptor& mr, const InputTuple& source,
                          std::uint64_t seed, const GroupContext& ctx,
                          std::size_t input_index = 0);

struct Checkpoint {
  std::string campaign_id;
  std::size_t processed_count = 0;
  std::vector<TestRecord> records;
  std::string created_at;
  std::string config_digest;

  bool operator==(const Checkpoint&) const = default;
};

/// Atomically writes
/// `{base_dir}/checkpoints/ckpt-{campaign_id}-{processed_count}-{timestamp}.json`
/// where timestamp is microseconds since the epoch, zero-padded. Throws
/// IoFailure.
std::filesystem::path save_checkpoint(const Checkpoint& state,
                                      const std::filesystem::path& base_dir,
                                      const BeforeRenameHook& before_rename = {});

/// Throws CorruptCheckpoint.
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Newest checkpoint (by the timestamp in its name, then processed count)
/// whose digest matches `config`. Unreadable files are skipped. Returns
/// nullopt when there is none; throws ConfigMismatch when checkpoints exist
/// but none matches, and CorruptCheckpoint when none can be read.
std::optional<Checkpoint> resume_latest(const std::filesystem::path& base_dir,
                                        const RunConfig& config);

/// First 16 hex digits of config_digest(cfg).
std::string campaign_id(const RunConfig& cfg);

struct CampaignOptions {
  /// Overrides how model ids become handles (default:
  /// LlmHandle::from_endpoint with cfg.llm_endpoint and auth_token_path()).
  std::function<LlmHandle(const std::string& model_id)> make_handle;
  /// Overrides the embedding provider for free-text comparisons.
  std::shared_ptr<EmbeddingProvider> embedding_provider;
  /// Stop after this many processed groups without writing results, as if
  /// the process had been killed there.
  std::optional<std::size_t> stop_after;
};

struct CampaignResult {
  RunReport report;
  bool complete = false;
  std::optional<std::filesystem::path> results_path;
  std::vector<std::filesystem::path> checkpoints;
  std::size_t resumed_from = 0;
};

/// Runs every (llm, task, relation, input) group in that nesting order,
/// saving a checkpoint each time the processed count reaches a multiple of
/// checkpoint_interval, and writes the results file at the end.
/// Throws InvalidConfig, ConfigMismatch, and the abort errors listed for
/// run_test_group.
CampaignResult run_campaign(const RunConfig& config, const Catalog& catalog,
                            LlmGateway& gateway, const CampaignOptions& options = {});

}  // namespace morphtest
