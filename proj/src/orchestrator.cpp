#include "morphtest/orchestrator.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdio>
#include <exception>
#include <future>

#include "morphtest/digest.hpp"
#include "morphtest/errors.hpp"

namespace morphtest {
namespace {

using nlohmann::json;

void pad_record(TestRecord& rec, OutputKind kind) {
  const auto n = rec.followup_inputs.size();
  while (rec.followup_outputs.size() < n) {
    rec.followup_outputs.push_back(TaskOutput{kind, {}, {}, false});
  }
  rec.followup_outputs.resize(n);
  while (rec.relation.size() < n) rec.relation.push_back(RelationVerdict::Indeterminate);
  rec.relation.resize(n);
}

struct CheckpointName {
  std::string campaign_id;
  std::size_t processed = 0;
  std::uint64_t micros = 0;
};

// ckpt-{campaign_id}-{processed}-{micros}.json; campaign ids are hex.
std::optional<CheckpointName> parse_checkpoint_name(const std::string& name) {
  if (!name.starts_with("ckpt-") || !name.ends_with(".json")) return std::nullopt;
  const std::string body = name.substr(5, name.size() - 10);
  const auto last = body.rfind('-');
  if (last == std::string::npos || last == 0) return std::nullopt;
  const auto mid = body.rfind('-', last - 1);
  if (mid == std::string::npos) return std::nullopt;
  CheckpointName out;
  out.campaign_id = body.substr(0, mid);
  const auto num = [](std::string_view s, auto& value) {
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    return ec == std::errc() && p == s.data() + s.size();
  };
  if (!num(std::string_view(body).substr(mid + 1, last - mid - 1), out.processed) ||
      !num(std::string_view(body).substr(last + 1), out.micros)) {
    return std::nullopt;
  }
  return out;
}

std::uint64_t now_micros() {
  using namespace std::chrono;
  return static_cast<std::uint64_t>(
      duration_cast<microseconds>(system_clock::now().time_since_epoch()).count());
}

json checkpoint_to_json(const Checkpoint& c) {
  json records = json::array();
  for (const auto& r : c.records) {
    records.push_back({{"record", record_fields_to_json(r)},
                       {"context", record_context_to_json(r)}});
  }
  return json{{"campaign_id", c.campaign_id},
              {"processed_count", c.processed_count},
              {"created_at", c.created_at},
              {"config_digest", c.config_digest},
              {"records", std::move(records)}};
}

struct GroupRef {
  std::size_t model = 0;
  const TaskSpec* task = nullptr;
  const RelationDescriptor* mr = nullptr;
  std::size_t input_index = 0;
};

}  // namespace

TestRecord run_test_group(const LlmHandle& llm, const TaskSpec& task,
                          const RelationDescriptor& mr, const InputTuple& source,
                          std::uint64_t seed, const GroupContext& ctx,
                          std::size_t input_index) {
  TestRecord rec;
  rec.source_input = source;
  rec.source_output = TaskOutput{task.output.kind, {}, {}, false};
  rec.mr_id = mr.id;
  rec.task_id = task.id;
  rec.model_id = llm.model_id;
  rec.input_index = input_index;
  rec.seed_used = seed;

  try {
    const auto derivation = derive_followups(mr, source, task, seed, ctx.registry,
                                             TransformContext{&ctx.gateway, &ctx.transformer});
    rec.followup_inputs = derivation.followup_inputs;
    bool failed = run_verifications(mr, source, derivation);

    GroupOutputs outputs;
    outputs.source = parse_output(task, ctx.gateway.complete(llm, render_prompt(task, source)));
    rec.source_output = outputs.source;
    for (const auto& followup : derivation.followup_inputs) {
      outputs.followups.push_back(
          parse_output(task, ctx.gateway.complete(llm, render_prompt(task, followup))));
      rec.followup_outputs.push_back(outputs.followups.back());
    }
    failed = run_verifications(mr, source, derivation, &outputs) || failed;
    // An output that does not parse can never support a verdict.
    if (!outputs.source.parse_ok ||
        std::any_of(outputs.followups.begin(), outputs.followups.end(),
                    [](const auto& o) { return !o.parse_ok; })) {
      failed = true;
    }
    for (const auto& out : outputs.followups) {
      rec.relation.push_back(check_output_relation(mr, outputs.source, out, ctx.comparators));
    }
    rec.verification_failure = failed;
  } catch (const LlmUnreachable&) {
    throw;
  } catch (const AuthFailure&) {
    throw;
  } catch (const EmbeddingUnavailable&) {
    throw;
  } catch (const Error& e) {
    rec.verification_failure = true;
    rec.error = e.what();
    pad_record(rec, task.output.kind);
  } catch (const nlohmann::json::exception& e) {
    rec.verification_failure = true;
    rec.error = e.what();
    pad_record(rec, task.output.kind);
  }
  return rec;
}

std::string campaign_id(const RunConfig& cfg) { return config_digest(cfg).substr(0, 16); }

std::filesystem::path save_checkpoint(const Checkpoint& state,
                                      const std::filesystem::path& base_dir,
                                      const BeforeRenameHook& before_rename) {
  char stamp[24];
  std::snprintf(stamp, sizeof stamp, "%016llu",
                static_cast<unsigned long long>(now_micros()));
  const auto path = base_dir / "checkpoints" /
                    ("ckpt-" + state.campaign_id + "-" +
                     std::to_string(state.processed_count) + "-" + stamp + ".json");
  write_file_atomic(path, checkpoint_to_json(state).dump(2) + "\n", before_rename);
  return path;
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  try {
    const auto j = json::parse(read_file(path));
    Checkpoint c;
    c.campaign_id = j.at("campaign_id").get<std::string>();
    c.processed_count = j.at("processed_count").get<std::size_t>();
    c.created_at = j.at("created_at").get<std::string>();
    c.config_digest = j.at("config_digest").get<std::string>();
    for (const auto& e : j.at("records")) {
      c.records.push_back(record_from_json(e.at("record"), e.at("context")));
    }
    if (c.records.size() != c.processed_count) {
      throw CorruptCheckpoint(path.string() + ": processed_count disagrees with records");
    }
    return c;
  } catch (const CorruptCheckpoint&) {
    throw;
  } catch (const std::exception& e) {
    throw CorruptCheckpoint(path.string() + ": " + e.what());
  }
}

std::optional<Checkpoint> resume_latest(const std::filesystem::path& base_dir,
                                        const RunConfig& config) {
  const auto dir = base_dir / "checkpoints";
  std::error_code ec;
  if (!std::filesystem::is_directory(dir, ec)) return std::nullopt;

  std::vector<std::pair<CheckpointName, std::filesystem::path>> found;
  for (const auto& entry : std::filesystem::directory_iterator(dir, ec)) {
    if (auto name = parse_checkpoint_name(entry.path().filename().string())) {
      found.emplace_back(*name, entry.path());
    }
  }
  if (found.empty()) return std::nullopt;
  std::sort(found.begin(), found.end(), [](const auto& a, const auto& b) {
    return std::tie(a.first.micros, a.first.processed) >
           std::tie(b.first.micros, b.first.processed);
  });

  const auto digest = config_digest(config);
  std::size_t readable = 0;
  std::string last_error;
  for (const auto& [name, path] : found) {
    try {
      auto ckpt = load_checkpoint(path);
      ++readable;
      if (ckpt.config_digest == digest) return ckpt;
    } catch (const CorruptCheckpoint& e) {
      last_error = e.what();
    }
  }
  if (readable == 0) throw CorruptCheckpoint("no readable checkpoint: " + last_error);
  throw ConfigMismatch("checkpoints in " + dir.string() +
                       " were written by a different configuration");
}

CampaignResult run_campaign(const RunConfig& config, const Catalog& catalog,
                            LlmGateway& gateway, const CampaignOptions& options) {
  validate_config(config, catalog);
  const auto plan = expand_plan(config, catalog);
  const auto id = campaign_id(config);
  const auto digest = config_digest(config);

  std::map<std::string, std::vector<InputTuple>> inputs;
  for (const auto& p : plan) {
    auto data = load_inputs(config.input_path_for(p.task->id));
    for (std::size_t i = 0; i < data.size(); ++i) {
      if (data[i].size() != p.task->arity()) {
        throw InvalidConfig("input " + std::to_string(i) + " for task '" + p.task->id +
                            "' has " + std::to_string(data[i].size()) + " slot(s), expected " +
                            std::to_string(p.task->arity()));
      }
    }
    inputs[p.task->id] = std::move(data);
  }

  auto make_handle = options.make_handle;
  if (!make_handle) {
    make_handle = [&config](const std::string& model) {
      return LlmHandle::from_endpoint(model, config.llm_endpoint, auth_token_path());
    };
  }
  std::vector<LlmHandle> under_test;
  std::vector<LlmHandle> transformers;
  for (const auto& model : config.llm_list) {
    under_test.push_back(make_handle(model));
    transformers.push_back(make_handle(config.transformer_for(model)));
  }

  ComparatorConfig comparators = comparator_config(config);
  comparators.embedding_provider = options.embedding_provider;
  if (!comparators.embedding_provider) {
    const auto endpoint = config.embedding_endpoint.value_or(config.llm_endpoint);
    if (config.embedding_model == kOfflineEmbedding || endpoint.starts_with(kMockScheme)) {
      comparators.embedding_provider = std::make_shared<HashedBagOfWordsEmbedder>();
    } else {
      auto handle = LlmHandle::remote(config.embedding_model, endpoint);
      handle.auth_token_source = auth_token_path();
      comparators.embedding_provider = std::make_shared<GatewayEmbedder>(gateway, handle);
    }
  }

  std::vector<GroupRef> groups;
  for (std::size_t m = 0; m < config.llm_list.size(); ++m) {
    for (const auto& p : plan) {
      for (const auto* mr : p.relations) {
        for (std::size_t i = 0; i < inputs[p.task->id].size(); ++i) {
          groups.push_back({m, p.task, mr, i});
        }
      }
    }
  }

  CampaignResult result;
  result.report.metadata.campaign_id = id;
  result.report.metadata.model_ids = config.llm_list;
  result.report.metadata.config = json::parse(config_to_json(config).dump());
  result.report.metadata.started_at = iso8601_now();
  auto& records = result.report.records;

  std::size_t processed = 0;
  if (config.continue_from_checkpoint) {
    if (auto ckpt = resume_latest(config.base_dir, config)) {
      if (ckpt->processed_count > groups.size()) {
        throw ConfigMismatch("checkpoint holds more groups than the campaign has");
      }
      records = std::move(ckpt->records);
      processed = ckpt->processed_count;
      result.resumed_from = processed;
    }
  }

  const auto interval = config.checkpoint_interval;
  const auto workers = std::max<std::size_t>(1, config.max_concurrent_requests);
  while (processed < groups.size()) {
    if (options.stop_after && processed >= *options.stop_after) return result;
    std::size_t end = std::min({groups.size(), processed + workers,
                                (processed / interval + 1) * interval});
    if (options.stop_after) end = std::min(end, *options.stop_after);

    std::vector<std::future<TestRecord>> batch;
    for (std::size_t g = processed; g < end; ++g) {
      const auto& ref = groups[g];
      batch.push_back(std::async(std::launch::async, [&, ref] {
        const GroupContext ctx{catalog.relations, gateway, transformers[ref.model], comparators};
        const auto seed = derive_group_seed(config.seed, ref.input_index, ref.mr->id);
        return run_test_group(under_test[ref.model], *ref.task, *ref.mr,
                              inputs.at(ref.task->id)[ref.input_index], seed, ctx,
                              ref.input_index);
      }));
    }
    std::exception_ptr failure;
    for (auto& f : batch) {
      try {
        records.push_back(f.get());
      } catch (...) {
        if (!failure) failure = std::current_exception();
      }
    }
    if (failure) std::rethrow_exception(failure);
    processed = end;

    if (processed % interval == 0) {
      Checkpoint ckpt{id, processed, records, iso8601_now(), digest};
      result.checkpoints.push_back(save_checkpoint(ckpt, config.base_dir));
    }
  }

  result.report.summary = summarize(records);
  result.report.metadata.finished_at = iso8601_now();
  result.results_path = write_results(result.report, config.base_dir);
  result.complete = true;
  return result;
}

}  // namespace morphtest
