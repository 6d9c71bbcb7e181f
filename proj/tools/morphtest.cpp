// Command-line entry point.
//
//   morphtest --llm <id> --task <task> --mr <relation> --input_data <file> --base_dir <dir>
//   morphtest [--config <run_config.json>]   (default config/run_config.json)
//   morphtest --list
//   morphtest --export-catalog <dir>
//
// Exit codes: 0 success, 1 validation error, 2 runtime abort.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "morphtest/config.hpp"
#include "morphtest/errors.hpp"
#include "morphtest/io.hpp"
#include "morphtest/orchestrator.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kValidationError = 1;
constexpr int kRuntimeAbort = 2;
constexpr const char* kDefaultConfigPath = "config/run_config.json";

void list_catalog(const morphtest::Catalog& catalog) {
  std::cout << "tasks:\n";
  for (const auto& t : catalog.tasks) {
    std::cout << "  " << t.id << "  (" << t.arity() << " input"
              << (t.arity() == 1 ? "" : "s") << ", " << morphtest::to_string(t.output.kind)
              << ")\n";
  }
  std::cout << "relations:\n";
  for (const auto& r : catalog.relations.all()) {
    std::cout << "  " << r.id << "  " << r.name << "  [";
    bool first = true;
    for (const auto& t : r.applicable_tasks) {
      std::cout << (first ? "" : ", ") << t;
      first = false;
    }
    std::cout << "]\n";
  }
}

// Writes the built-in catalog in the layout Catalog::load reads.
void export_catalog(const morphtest::Catalog& catalog, const std::filesystem::path& dir) {
  nlohmann::json templates = nlohmann::json::object();
  for (const auto& t : catalog.tasks) templates[t.id] = t.prompt_template;
  nlohmann::json relations = nlohmann::json::array();
  for (const auto& r : catalog.relations.all()) relations.push_back(morphtest::relation_to_json(r));
  nlohmann::json it_templates(catalog.relations.prompt_templates());
  morphtest::write_file_atomic(dir / "list_tasks.json",
                               morphtest::tasks_to_json(catalog.tasks).dump(2) + "\n");
  morphtest::write_file_atomic(dir / "template" / "sut_prompt_templates.json",
                               templates.dump(2) + "\n");
  morphtest::write_file_atomic(dir / "list_relations.json", relations.dump(2) + "\n");
  morphtest::write_file_atomic(dir / "template" / "it_prompt_templates.json",
                               it_templates.dump(2) + "\n");
}

morphtest::RunConfig read_config_file(const std::string& path, morphtest::Catalog& catalog) {
  nlohmann::ordered_json j;
  try {
    j = nlohmann::ordered_json::parse(morphtest::read_file(path));
  } catch (const nlohmann::ordered_json::parse_error& e) {
    throw morphtest::MalformedConfig(path + ": " + e.what());
  } catch (const morphtest::IoFailure& e) {
    throw morphtest::MalformedConfig(e.what());
  }
  auto cfg = morphtest::config_from_json(j);
  if (cfg.catalog_dir) catalog = morphtest::Catalog::load(*cfg.catalog_dir);
  morphtest::validate_config(cfg, catalog);
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Metamorphic testing of LLMs on NLP tasks"};
  std::string config_path;
  bool list = false;
  std::string export_dir;
  app.add_option("--config", config_path, "run configuration file");
  app.add_flag("--list", list, "list built-in tasks and relations");
  app.add_option("--export-catalog", export_dir, "write the built-in catalog files to a directory");
  app.allow_extras();
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kValidationError;
  }

  auto catalog = morphtest::Catalog::builtin();
  if (list) {
    list_catalog(catalog);
    return kOk;
  }
  if (!export_dir.empty()) {
    try {
      export_catalog(catalog, export_dir);
    } catch (const morphtest::Error& e) {
      std::cerr << "error: " << e.what() << '\n';
      return kRuntimeAbort;
    }
    return kOk;
  }

  morphtest::RunConfig cfg;
  try {
    const auto extras = app.remaining();
    if (config_path.empty() && extras.empty()) config_path = kDefaultConfigPath;
    if (!config_path.empty()) {
      if (!extras.empty()) {
        throw morphtest::MalformedConfig("--config cannot be combined with other arguments");
      }
      cfg = read_config_file(config_path, catalog);
    } else {
      cfg = morphtest::parse_cli(extras, catalog);
    }
  } catch (const morphtest::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kValidationError;
  }

  try {
    morphtest::LlmGateway gateway(morphtest::gateway_options(cfg));
    const auto result = morphtest::run_campaign(cfg, catalog, gateway);
    const auto& overall = result.report.summary.overall;
    std::cout << "groups: " << overall.groups_total << "  excluded: " << overall.groups_excluded
              << "  violated: " << overall.groups_violated
              << "  indeterminate: " << overall.indeterminate_groups
              << "  failure rate: " << overall.failure_rate << '\n';
    if (result.results_path) std::cout << "results: " << result.results_path->string() << '\n';
    return kOk;
  } catch (const morphtest::InvalidConfig& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kValidationError;
  } catch (const morphtest::MalformedTaskFile& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kValidationError;
  } catch (const std::exception& e) {
    std::cerr << "aborted: " << e.what() << '\n';
    return kRuntimeAbort;
  }
}
