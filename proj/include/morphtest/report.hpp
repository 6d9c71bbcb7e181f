#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "morphtest/record.hpp"

namespace morphtest {

/// Counts over metamorphic groups. A group is excluded when its
/// verification failed, and violated when it is not excluded and at least
/// one follow-up verdict is VIOLATED. Indeterminate-only groups are not
/// violated but are counted separately.
struct SummaryCounts {
  std::size_t groups_total = 0;
  std::size_t groups_excluded = 0;
  std::size_t groups_violated = 0;
  std::size_t indeterminate_groups = 0;
  /// groups_violated / (groups_total - groups_excluded); 0 for an empty
  /// denominator.
  double failure_rate = 0.0;

  bool operator==(const SummaryCounts&) const = default;
};

struct RelationSummary {
  std::string task_id;
  std::string mr_id;
  SummaryCounts counts;
  bool operator==(const RelationSummary&) const = default;
};

struct Summary {
  SummaryCounts overall;
  std::vector<RelationSummary> by_relation;  // sorted by (task_id, mr_id)
  bool operator==(const Summary&) const = default;
};

struct ReportMetadata {
  std::string campaign_id;
  std::vector<std::string> model_ids;
  std::string started_at;
  std::string finished_at;
  nlohmann::json config;  // snapshot of the run configuration
  bool operator==(const ReportMetadata&) const = default;
};

struct RunReport {
  ReportMetadata metadata;
  std::vector<TestRecord> records;
  Summary summary;
  bool operator==(const RunReport&) const = default;
};

Summary summarize(std::span<const TestRecord> records);

nlohmann::json report_to_json(const RunReport& report);
RunReport report_from_json(const nlohmann::json& j);

/// Writes `{base_dir}/results/results-{campaign_id}.json` atomically and
/// returns its path. Throws IoFailure.
std::filesystem::path write_results(const RunReport& report,
                                    const std::filesystem::path& base_dir);
RunReport read_results(const std::filesystem::path& path);

}  // namespace morphtest
