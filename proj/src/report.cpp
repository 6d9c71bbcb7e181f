#include "morphtest/report.hpp"

#include <map>
#include <utility>

#include "morphtest/errors.hpp"
#include "morphtest/io.hpp"

namespace morphtest {
namespace {

using nlohmann::json;

void count(SummaryCounts& c, const TestRecord& r) {
  ++c.groups_total;
  if (r.verification_failure) {
    ++c.groups_excluded;
  } else if (r.any_violated()) {
    ++c.groups_violated;
  } else if (r.any_indeterminate()) {
    ++c.indeterminate_groups;
  }
}

void finish(SummaryCounts& c) {
  const auto valid = c.groups_total - c.groups_excluded;
  c.failure_rate =
      valid == 0 ? 0.0 : static_cast<double>(c.groups_violated) / static_cast<double>(valid);
}

json counts_to_json(const SummaryCounts& c) {
  return json{{"groups_total", c.groups_total},
              {"groups_excluded", c.groups_excluded},
              {"groups_violated", c.groups_violated},
              {"indeterminate_groups", c.indeterminate_groups},
              {"failure_rate", c.failure_rate}};
}

SummaryCounts counts_from_json(const json& j) {
  return SummaryCounts{j.at("groups_total").get<std::size_t>(),
                       j.at("groups_excluded").get<std::size_t>(),
                       j.at("groups_violated").get<std::size_t>(),
                       j.at("indeterminate_groups").get<std::size_t>(),
                       j.at("failure_rate").get<double>()};
}

}  // namespace

Summary summarize(std::span<const TestRecord> records) {
  Summary s;
  std::map<std::pair<std::string, std::string>, SummaryCounts> per;
  for (const auto& r : records) {
    count(s.overall, r);
    count(per[{r.task_id, r.mr_id}], r);
  }
  finish(s.overall);
  for (auto& [key, counts] : per) {
    finish(counts);
    s.by_relation.push_back({key.first, key.second, counts});
  }
  return s;
}

json report_to_json(const RunReport& report) {
  json records = json::array();
  json context = json::array();
  for (const auto& r : report.records) {
    records.push_back(record_fields_to_json(r));
    context.push_back(record_context_to_json(r));
  }
  json by_relation = json::array();
  for (const auto& rs : report.summary.by_relation) {
    json entry = counts_to_json(rs.counts);
    entry["task_id"] = rs.task_id;
    entry["mr_id"] = rs.mr_id;
    by_relation.push_back(std::move(entry));
  }
  const auto& m = report.metadata;
  return json{{"metadata",
               {{"campaign_id", m.campaign_id},
                {"model_ids", m.model_ids},
                {"started_at", m.started_at},
                {"finished_at", m.finished_at},
                {"config", m.config}}},
              {"summary",
               {{"overall", counts_to_json(report.summary.overall)},
                {"by_relation", std::move(by_relation)}}},
              {"records", std::move(records)},
              {"record_context", std::move(context)}};
}

RunReport report_from_json(const json& j) {
  RunReport report;
  const auto& m = j.at("metadata");
  report.metadata.campaign_id = m.at("campaign_id").get<std::string>();
  report.metadata.model_ids = m.at("model_ids").get<std::vector<std::string>>();
  report.metadata.started_at = m.at("started_at").get<std::string>();
  report.metadata.finished_at = m.at("finished_at").get<std::string>();
  report.metadata.config = m.at("config");

  const auto& records = j.at("records");
  const auto& context = j.at("record_context");
  if (records.size() != context.size()) {
    throw Error("results file: records and record_context differ in length");
  }
  for (std::size_t i = 0; i < records.size(); ++i) {
    report.records.push_back(record_from_json(records[i], context[i]));
  }

  const auto& s = j.at("summary");
  report.summary.overall = counts_from_json(s.at("overall"));
  for (const auto& e : s.at("by_relation")) {
    report.summary.by_relation.push_back(
        {e.at("task_id").get<std::string>(), e.at("mr_id").get<std::string>(),
         counts_from_json(e)});
  }
  return report;
}

std::filesystem::path write_results(const RunReport& report,
                                    const std::filesystem::path& base_dir) {
  const auto path =
      base_dir / "results" / ("results-" + report.metadata.campaign_id + ".json");
  write_file_atomic(path, report_to_json(report).dump(2) + "\n");
  return path;
}

RunReport read_results(const std::filesystem::path& path) {
  try {
    return report_from_json(json::parse(read_file(path)));
  } catch (const json::exception& e) {
    throw IoFailure("cannot read results " + path.string() + ": " + e.what());
  }
}

}  // namespace morphtest
