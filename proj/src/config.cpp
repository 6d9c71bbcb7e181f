#include "morphtest/config.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdlib>
#include <set>

#include "morphtest/digest.hpp"
#include "morphtest/errors.hpp"
#include "morphtest/io.hpp"

namespace morphtest {
namespace {

using ojson = nlohmann::ordered_json;

const std::set<std::string, std::less<>>& known_keys() {
  static const std::set<std::string, std::less<>> keys = {
      "llm_list",              "tasks",
      "input_data",            "base_dir",
      "checkpoint_interval",   "continue_from_checkpoint",
      "llm_endpoint",          "llm_for_transformation",
      "seed",                  "equivalence_threshold",
      "difference_threshold",  "numeric_window",
      "max_concurrent_requests", "embedding_model",
      "embedding_endpoint",    "use_cache",
      "max_attempts",          "catalog_dir",
  };
  return keys;
}

template <typename T>
T get_key(const ojson& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const ojson::exception& e) {
    throw MalformedConfig(std::string("config key '") + key + "': " + e.what());
  }
}

bool relation_fits(const RelationDescriptor& mr, const TaskSpec& task) {
  switch (mr.output_relation) {
    case OutputRelationKind::NumericEqual:
      return task.output.kind == OutputKind::NumericScore;
    case OutputRelationKind::SetEqual:
      return task.output.kind == OutputKind::TupleSet;
    default:
      return true;
  }
}

}  // namespace

Catalog Catalog::builtin() {
  return Catalog{builtin_tasks(), RelationRegistry::with_builtins()};
}

Catalog Catalog::load(const std::filesystem::path& dir) {
  Catalog c;
  c.tasks = load_tasks(dir / "list_tasks.json",
                       dir / "template" / "sut_prompt_templates.json");
  const auto it_templates = dir / "template" / "it_prompt_templates.json";
  if (std::filesystem::exists(it_templates)) {
    for (auto& [id, tmpl] : load_prompt_templates(it_templates)) {
      c.relations.add_prompt_template(id, tmpl);
    }
  }
  for (auto& r : load_relations(dir / "list_relations.json")) c.relations.add(std::move(r));
  return c;
}

const std::filesystem::path& RunConfig::input_path_for(const std::string& task_id) const {
  if (auto it = input_data_by_task.find(task_id); it != input_data_by_task.end()) {
    return it->second;
  }
  return input_data;
}

ojson config_to_json(const RunConfig& cfg) {
  ojson tasks = ojson::object();
  for (const auto& [task, mrs] : cfg.tasks) tasks[task] = mrs;
  ojson input_data;
  if (cfg.input_data_by_task.empty()) {
    input_data = cfg.input_data.string();
  } else {
    input_data = ojson::object();
    if (!cfg.input_data.empty()) input_data["*"] = cfg.input_data.string();
    for (const auto& [task, path] : cfg.input_data_by_task) input_data[task] = path.string();
  }
  ojson j;
  j["llm_list"] = cfg.llm_list;
  j["tasks"] = std::move(tasks);
  j["input_data"] = std::move(input_data);
  j["base_dir"] = cfg.base_dir.string();
  j["checkpoint_interval"] = cfg.checkpoint_interval;
  j["continue_from_checkpoint"] = cfg.continue_from_checkpoint;
  j["llm_endpoint"] = cfg.llm_endpoint;
  j["llm_for_transformation"] =
      cfg.llm_for_transformation ? ojson(*cfg.llm_for_transformation) : ojson(nullptr);
  j["seed"] = cfg.seed;
  j["equivalence_threshold"] = cfg.equivalence_threshold;
  j["difference_threshold"] = cfg.difference_threshold;
  j["numeric_window"] = cfg.numeric_window;
  j["max_concurrent_requests"] = cfg.max_concurrent_requests;
  j["embedding_model"] = cfg.embedding_model;
  j["embedding_endpoint"] =
      cfg.embedding_endpoint ? ojson(*cfg.embedding_endpoint) : ojson(nullptr);
  j["use_cache"] = cfg.use_cache;
  j["max_attempts"] = cfg.max_attempts;
  j["catalog_dir"] = cfg.catalog_dir ? ojson(cfg.catalog_dir->string()) : ojson(nullptr);
  return j;
}

RunConfig config_from_json(const ojson& j) {
  if (!j.is_object()) throw MalformedConfig("configuration must be a JSON object");
  std::vector<std::string> unknown;
  for (const auto& [key, _] : j.items()) {
    if (!known_keys().contains(key)) unknown.push_back(key);
  }
  if (!unknown.empty()) {
    std::string names;
    for (const auto& k : unknown) names += (names.empty() ? "" : ", ") + k;
    throw MalformedConfig("unknown configuration key(s): " + names);
  }
  for (const char* key : {"llm_list", "tasks", "input_data"}) {
    if (!j.contains(key)) throw MalformedConfig(std::string("missing configuration key '") + key + "'");
  }

  RunConfig cfg;
  cfg.llm_list = get_key<std::vector<std::string>>(j, "llm_list", {});
  const auto& tasks = j.at("tasks");
  if (!tasks.is_object()) throw MalformedConfig("'tasks' must map task ids to relation lists");
  for (const auto& [task, mrs] : tasks.items()) {
    if (!mrs.is_array()) throw MalformedConfig("'tasks." + task + "' must be a list");
    try {
      cfg.tasks.emplace_back(task, mrs.get<std::vector<std::string>>());
    } catch (const ojson::exception& e) {
      throw MalformedConfig("'tasks." + task + "': " + e.what());
    }
  }
  const auto& input = j.at("input_data");
  if (input.is_string()) {
    cfg.input_data = input.get<std::string>();
  } else if (input.is_object()) {
    for (const auto& [task, path] : input.items()) {
      if (!path.is_string()) throw MalformedConfig("'input_data." + task + "' must be a path");
      if (task == "*") {
        cfg.input_data = path.get<std::string>();
      } else {
        cfg.input_data_by_task[task] = path.get<std::string>();
      }
    }
  } else {
    throw MalformedConfig("'input_data' must be a path or a task -> path map");
  }
  cfg.base_dir = get_key<std::string>(j, "base_dir", cfg.base_dir.string());
  const auto interval = get_key<long long>(j, "checkpoint_interval",
                                           static_cast<long long>(cfg.checkpoint_interval));
  if (interval <= 0) throw MalformedConfig("'checkpoint_interval' must be positive");
  cfg.checkpoint_interval = static_cast<std::size_t>(interval);
  cfg.continue_from_checkpoint = get_key<bool>(j, "continue_from_checkpoint", false);
  cfg.llm_endpoint = get_key<std::string>(j, "llm_endpoint", cfg.llm_endpoint);
  if (j.contains("llm_for_transformation") && !j.at("llm_for_transformation").is_null()) {
    cfg.llm_for_transformation = get_key<std::string>(j, "llm_for_transformation", "");
  }
  cfg.seed = get_key<std::uint64_t>(j, "seed", 0);
  cfg.equivalence_threshold = get_key<double>(j, "equivalence_threshold", cfg.equivalence_threshold);
  cfg.difference_threshold = get_key<double>(j, "difference_threshold", cfg.difference_threshold);
  cfg.numeric_window = get_key<double>(j, "numeric_window", cfg.numeric_window);
  const auto workers = get_key<long long>(j, "max_concurrent_requests",
                                          static_cast<long long>(cfg.max_concurrent_requests));
  if (workers <= 0) throw MalformedConfig("'max_concurrent_requests' must be positive");
  cfg.max_concurrent_requests = static_cast<std::size_t>(workers);
  cfg.embedding_model = get_key<std::string>(j, "embedding_model", cfg.embedding_model);
  if (j.contains("embedding_endpoint") && !j.at("embedding_endpoint").is_null()) {
    cfg.embedding_endpoint = get_key<std::string>(j, "embedding_endpoint", "");
  }
  cfg.use_cache = get_key<bool>(j, "use_cache", cfg.use_cache);
  cfg.max_attempts = get_key<int>(j, "max_attempts", cfg.max_attempts);
  if (j.contains("catalog_dir") && !j.at("catalog_dir").is_null()) {
    cfg.catalog_dir = get_key<std::string>(j, "catalog_dir", "");
  }
  return cfg;
}

void validate_config(const RunConfig& cfg, const Catalog& catalog) {
  if (cfg.llm_list.empty()) throw MalformedConfig("'llm_list' must name at least one model");
  for (const auto& m : cfg.llm_list) {
    if (m.empty()) throw MalformedConfig("'llm_list' contains an empty model id");
  }
  if (cfg.llm_for_transformation && cfg.llm_for_transformation->empty()) {
    throw MalformedConfig("'llm_for_transformation' is empty");
  }
  if (cfg.tasks.empty()) throw MalformedConfig("'tasks' selects no task");
  if (cfg.checkpoint_interval == 0) throw MalformedConfig("'checkpoint_interval' must be positive");
  if (cfg.max_concurrent_requests == 0) {
    throw MalformedConfig("'max_concurrent_requests' must be positive");
  }
  if (cfg.max_attempts < 1) throw MalformedConfig("'max_attempts' must be at least 1");
  if (cfg.llm_endpoint.empty()) throw MalformedConfig("'llm_endpoint' is empty");
  if (cfg.base_dir.empty()) throw MalformedConfig("'base_dir' is empty");
  try {
    comparator_config(cfg).validate();
  } catch (const InvalidConfig& e) {
    throw MalformedConfig(e.what());
  }

  std::set<std::string> seen;
  for (const auto& [task_id, mrs] : cfg.tasks) {
    const auto* task = find_task(catalog.tasks, task_id);
    if (task == nullptr) throw UnknownTask("unknown task '" + task_id + "'");
    if (!seen.insert(task_id).second) throw MalformedConfig("task '" + task_id + "' listed twice");
    if (cfg.input_path_for(task_id).empty()) {
      throw MalformedConfig("no input data for task '" + task_id + "'");
    }
    for (const auto& mr_id : mrs) {
      const auto* mr = catalog.relations.find(mr_id);
      if (mr == nullptr) throw UnknownRelation("unknown relation '" + mr_id + "'");
      if (!mr->applies_to(task_id)) {
        throw UnknownRelation("relation '" + mr_id + "' does not apply to task '" + task_id + "'");
      }
      if (!relation_fits(*mr, *task)) {
        throw MalformedConfig("relation '" + mr_id + "' cannot compare outputs of task '" +
                              task_id + "'");
      }
    }
  }
  for (const auto& [task_id, _] : cfg.input_data_by_task) {
    if (!seen.contains(task_id)) {
      throw MalformedConfig("'input_data' names task '" + task_id + "' which is not run");
    }
  }
}

RunConfig load_config(const std::filesystem::path& path, const Catalog& catalog) {
  ojson j;
  try {
    j = ojson::parse(read_file(path));
  } catch (const ojson::parse_error& e) {
    throw MalformedConfig(path.string() + ": " + e.what());
  } catch (const IoFailure& e) {
    throw MalformedConfig(e.what());
  }
  auto cfg = config_from_json(j);
  validate_config(cfg, catalog);
  return cfg;
}

RunConfig parse_cli(std::span<const std::string> args, const Catalog& catalog) {
  CLI::App app{"metamorphic test run"};
  std::string llm, task, mr, input_data, base_dir;
  app.add_option("--llm", llm, "ID of the LLM to test");
  app.add_option("--task", task, "NLP task to test on");
  app.add_option("--mr", mr, "metamorphic relation to test with");
  app.add_option("--input_data", input_data, "JSON file with the source inputs");
  app.add_option("--base_dir", base_dir, "directory for caches and outputs");
  app.set_help_flag();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    throw MalformedConfig(std::string("command line: ") + e.what());
  }
  for (const char* name : {"llm", "task", "mr", "input_data", "base_dir"}) {
    if (app.get_option(std::string("--") + name)->count() == 0) {
      throw MissingArgument(std::string("missing required argument '") + name + "'");
    }
  }

  RunConfig cfg;
  cfg.llm_list = {llm};
  cfg.tasks = {{task, {mr}}};
  cfg.input_data = input_data;
  cfg.base_dir = base_dir;
  validate_config(cfg, catalog);
  return cfg;
}

std::string config_digest(const RunConfig& cfg) {
  auto j = config_to_json(cfg);
  j.erase("continue_from_checkpoint");
  j.erase("max_concurrent_requests");
  return sha256_hex(j.dump());
}

std::vector<PlannedTask> expand_plan(const RunConfig& cfg, const Catalog& catalog) {
  std::vector<PlannedTask> plan;
  for (const auto& [task_id, mrs] : cfg.tasks) {
    const auto* task = find_task(catalog.tasks, task_id);
    if (task == nullptr) throw UnknownTask("unknown task '" + task_id + "'");
    PlannedTask p{task, {}};
    if (mrs.empty()) {
      for (const auto* mr : catalog.relations.for_task(task_id)) {
        if (relation_fits(*mr, *task)) p.relations.push_back(mr);
      }
    } else {
      for (const auto& id : mrs) {
        const auto* mr = catalog.relations.find(id);
        if (mr == nullptr) throw UnknownRelation("unknown relation '" + id + "'");
        p.relations.push_back(mr);
      }
    }
    plan.push_back(std::move(p));
  }
  return plan;
}

ComparatorConfig comparator_config(const RunConfig& cfg) {
  ComparatorConfig c;
  c.equivalence_threshold = cfg.equivalence_threshold;
  c.difference_threshold = cfg.difference_threshold;
  c.numeric_window = cfg.numeric_window;
  return c;
}

GatewayOptions gateway_options(const RunConfig& cfg) {
  GatewayOptions o;
  if (cfg.use_cache) o.cache_dir = cfg.base_dir / "cache";
  o.retry.max_attempts = cfg.max_attempts;
  o.max_concurrent_requests = cfg.max_concurrent_requests;
  return o;
}

std::filesystem::path auth_token_path() {
  if (const char* env = std::getenv(kTokenPathEnv.data()); env != nullptr && *env != '\0') {
    return env;
  }
  return std::filesystem::path(kDefaultTokenPath);
}

}  // namespace morphtest
