#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

namespace morphtest {

/// One source or follow-up input. Arity equals the task's slot count.
using InputTuple = std::vector<std::string>;

enum class OutputKind { FreeText, Label, NumericScore, TupleSet };

std::string_view to_string(OutputKind kind);
OutputKind output_kind_from_string(std::string_view name);

/// How raw model text is interpreted for a task.
struct OutputSpec {
  OutputKind kind = OutputKind::FreeText;
  std::vector<std::string> labels;  // Label: lower-case vocabulary
  double min = 0.0;                 // NumericScore: closed range
  double max = 1.0;
  std::string delimiter = "|";      // TupleSet: field separator
  std::size_t tuple_fields = 3;     // TupleSet: fields per line

  bool operator==(const OutputSpec&) const = default;
};

struct TaskSpec {
  std::string id;
  std::vector<std::string> slot_names;
  /// Contains `{INPUT_k}` exactly once for every k < arity().
  std::string prompt_template;
  OutputSpec output;

  std::size_t arity() const { return slot_names.size(); }
  bool operator==(const TaskSpec&) const = default;
};

using OutputTuple = std::vector<std::string>;
using TupleSet = std::set<OutputTuple>;
using ParsedValue = std::variant<std::monostate, std::string, double, TupleSet>;

/// A model response interpreted under its task's output kind. When
/// `parse_ok` is false `parsed` holds monostate.
struct TaskOutput {
  OutputKind kind = OutputKind::FreeText;
  std::string text;
  ParsedValue parsed;
  bool parse_ok = false;

  bool operator==(const TaskOutput&) const = default;
};

/// Throws MalformedTaskFile naming the task when an invariant fails.
void validate_task(const TaskSpec& task);

/// `list` is an array of task objects; `templates` maps task id to prompt
/// template (an entry may also carry an inline "prompt_template").
std::vector<TaskSpec> tasks_from_json(const nlohmann::json& list,
                                      const nlohmann::json& templates);
nlohmann::json tasks_to_json(std::span<const TaskSpec> tasks);

/// Reads the task list and, unless entries carry inline templates,
/// `template/sut_prompt_templates.json` next to it.
std::vector<TaskSpec> load_tasks(const std::filesystem::path& list_path);
std::vector<TaskSpec> load_tasks(const std::filesystem::path& list_path,
                                 const std::filesystem::path& templates_path);

/// The four bundled tasks: qa, nli, sa, re.
const std::vector<TaskSpec>& builtin_tasks();

const TaskSpec* find_task(std::span<const TaskSpec> tasks, std::string_view id);

/// Single left-to-right pass; substituted text is never rescanned, so
/// inputs that themselves contain `{INPUT_k}` come through verbatim.
std::string render_prompt(const TaskSpec& task, const InputTuple& inputs);

/// Never throws on model text; failures are reported through parse_ok.
TaskOutput parse_output(const TaskSpec& task, std::string_view raw);

/// Input data file: a JSON array whose elements are strings (1-tuples) or
/// arrays of strings.
std::vector<InputTuple> inputs_from_json(const nlohmann::json& data);
std::vector<InputTuple> load_inputs(const std::filesystem::path& path);

nlohmann::json input_to_json(const InputTuple& input);
InputTuple input_from_json(const nlohmann::json& j);

nlohmann::json task_output_to_json(const TaskOutput& out);
TaskOutput task_output_from_json(const nlohmann::json& j);

}  // namespace morphtest
