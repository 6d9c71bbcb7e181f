#include "morphtest/task.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "morphtest/errors.hpp"
#include "morphtest/text.hpp"

namespace morphtest {
namespace {

using nlohmann::json;

std::string placeholder(std::size_t k) {
  return "{INPUT_" + std::to_string(k) + "}";
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw MalformedTaskFile("cannot open task file " + path.string());
  }
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw MalformedTaskFile(path.string() + ": " + e.what());
  }
}

bool is_edge_punct(char c) {
  switch (c) {
    case '.': case ',': case '!': case '?': case ';': case ':':
    case '"': case '\'': case '`': case '(': case ')': case '*':
      return true;
    default:
      return text::is_space(c);
  }
}

std::string_view strip_edge_punct(std::string_view s) {
  while (!s.empty() && is_edge_punct(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_edge_punct(s.back())) s.remove_suffix(1);
  return s;
}

TaskOutput parse_label(const OutputSpec& spec, std::string_view raw) {
  TaskOutput out{OutputKind::Label, std::string(raw), {}, false};
  const std::string norm = text::to_lower_ascii(strip_edge_punct(raw));
  if (std::find(spec.labels.begin(), spec.labels.end(), norm) !=
      spec.labels.end()) {
    out.parsed = norm;
    out.parse_ok = true;
    return out;
  }
  // Fall back to a unique whole-word mention, e.g. "The answer is neutral."
  std::set<std::string> mentioned;
  std::string word;
  auto flush = [&] {
    if (!word.empty() &&
        std::find(spec.labels.begin(), spec.labels.end(), word) !=
            spec.labels.end()) {
      mentioned.insert(word);
    }
    word.clear();
  };
  for (char c : norm) {
    if (text::is_ascii_alpha(c) || c == '_' || c == '-') {
      word.push_back(c);
    } else {
      flush();
    }
  }
  flush();
  if (mentioned.size() == 1) {
    out.parsed = *mentioned.begin();
    out.parse_ok = true;
  }
  return out;
}

std::optional<double> first_decimal(std::string_view s) {
  auto is_digit = [](char c) { return c >= '0' && c <= '9'; };
  for (std::size_t i = 0; i < s.size(); ++i) {
    std::size_t start = i;
    std::size_t j = i;
    if (s[j] == '-' || s[j] == '+') ++j;
    const bool leading_dot = j < s.size() && s[j] == '.';
    if (leading_dot) ++j;
    if (j >= s.size() || !is_digit(s[j])) continue;
    while (j < s.size() && is_digit(s[j])) ++j;
    if (!leading_dot && j + 1 < s.size() && s[j] == '.' && is_digit(s[j + 1])) {
      ++j;
      while (j < s.size() && is_digit(s[j])) ++j;
    }
    std::string literal(s.substr(start, j - start));
    if (literal.front() == '+') literal.erase(0, 1);
    if (literal.front() == '.') literal.insert(0, "0");
    if (literal.starts_with("-.")) literal.insert(1, "0");
    double value = 0.0;
    auto [ptr, ec] =
        std::from_chars(literal.data(), literal.data() + literal.size(), value);
    if (ec == std::errc()) return value;
  }
  return std::nullopt;
}

TaskOutput parse_numeric(const OutputSpec& spec, std::string_view raw) {
  TaskOutput out{OutputKind::NumericScore, std::string(raw), {}, false};
  if (auto v = first_decimal(raw); v && *v >= spec.min && *v <= spec.max) {
    out.parsed = *v;
    out.parse_ok = true;
  }
  return out;
}

TaskOutput parse_tuples(const OutputSpec& spec, std::string_view raw) {
  TaskOutput out{OutputKind::TupleSet, std::string(raw), {}, false};
  TupleSet tuples;
  std::istringstream lines{std::string(raw)};
  std::string line;
  while (std::getline(lines, line)) {
    std::string_view rest = text::trim(line);
    while (!rest.empty() && (rest.front() == '-' || rest.front() == '*' ||
                             text::is_space(rest.front()))) {
      rest.remove_prefix(1);
    }
    if (rest.find(spec.delimiter) == std::string_view::npos) continue;
    OutputTuple fields;
    std::size_t pos = 0;
    while (true) {
      const auto next = rest.find(spec.delimiter, pos);
      auto field = text::trim(rest.substr(pos, next == std::string_view::npos
                                                   ? std::string_view::npos
                                                   : next - pos));
      if (field.empty()) return out;
      fields.push_back(text::to_lower_ascii(field));
      if (next == std::string_view::npos) break;
      pos = next + spec.delimiter.size();
    }
    if (fields.size() != spec.tuple_fields) return out;
    tuples.insert(std::move(fields));
  }
  out.parsed = std::move(tuples);
  out.parse_ok = true;
  return out;
}

json output_spec_to_json(const OutputSpec& spec) {
  json j{{"kind", to_string(spec.kind)}};
  switch (spec.kind) {
    case OutputKind::Label:
      j["labels"] = spec.labels;
      break;
    case OutputKind::NumericScore:
      j["min"] = spec.min;
      j["max"] = spec.max;
      break;
    case OutputKind::TupleSet:
      j["delimiter"] = spec.delimiter;
      j["fields"] = spec.tuple_fields;
      break;
    case OutputKind::FreeText:
      break;
  }
  return j;
}

OutputSpec output_spec_from_json(const json& j) {
  OutputSpec spec;
  spec.kind = output_kind_from_string(j.at("kind").get<std::string>());
  if (spec.kind == OutputKind::Label) {
    for (const auto& l : j.at("labels")) {
      spec.labels.push_back(text::to_lower_ascii(l.get<std::string>()));
    }
  } else if (spec.kind == OutputKind::NumericScore) {
    spec.min = j.at("min").get<double>();
    spec.max = j.at("max").get<double>();
  } else if (spec.kind == OutputKind::TupleSet) {
    spec.delimiter = j.value("delimiter", std::string("|"));
    spec.tuple_fields = j.value("fields", std::size_t{3});
  }
  return spec;
}

}  // namespace

std::string_view to_string(OutputKind kind) {
  switch (kind) {
    case OutputKind::FreeText: return "FREE_TEXT";
    case OutputKind::Label: return "LABEL";
    case OutputKind::NumericScore: return "NUMERIC_SCORE";
    case OutputKind::TupleSet: return "TUPLE_SET";
  }
  return "?";
}

OutputKind output_kind_from_string(std::string_view name) {
  if (name == "FREE_TEXT") return OutputKind::FreeText;
  if (name == "LABEL") return OutputKind::Label;
  if (name == "NUMERIC_SCORE") return OutputKind::NumericScore;
  if (name == "TUPLE_SET") return OutputKind::TupleSet;
  throw MalformedTaskFile("unknown output kind '" + std::string(name) + "'");
}

void validate_task(const TaskSpec& task) {
  auto fail = [&](const std::string& why) {
    throw MalformedTaskFile("task '" + task.id + "': " + why);
  };
  if (task.id.empty()) fail("empty id");
  if (task.arity() == 0) fail("no input slots");
  for (std::size_t k = 0; k < task.arity(); ++k) {
    const auto ph = placeholder(k);
    const auto first = task.prompt_template.find(ph);
    if (first == std::string::npos) fail("template lacks " + ph);
    if (task.prompt_template.find(ph, first + 1) != std::string::npos) {
      fail("template repeats " + ph);
    }
  }
  // Placeholders beyond the arity would survive rendering.
  const std::string_view tmpl = task.prompt_template;
  for (auto hit = tmpl.find("{INPUT_"); hit != std::string_view::npos;
       hit = tmpl.find("{INPUT_", hit + 1)) {
    const auto close = tmpl.find('}', hit);
    if (close == std::string_view::npos) break;
    std::size_t index = 0;
    const char* last = tmpl.data() + close;
    auto [ptr, ec] = std::from_chars(tmpl.data() + hit + 7, last, index);
    if (ec == std::errc() && ptr == last && index >= task.arity()) {
      fail("template references " + placeholder(index) +
           " beyond the task arity");
    }
  }
  const auto& out = task.output;
  if (out.kind == OutputKind::Label && out.labels.empty()) {
    fail("label vocabulary is empty");
  }
  if (out.kind == OutputKind::NumericScore && !(out.min < out.max)) {
    fail("numeric range requires min < max");
  }
  if (out.kind == OutputKind::TupleSet &&
      (out.delimiter.empty() || out.tuple_fields == 0)) {
    fail("tuple output needs a delimiter and a field count");
  }
}

std::vector<TaskSpec> tasks_from_json(const json& list, const json& templates) {
  if (!list.is_array()) throw MalformedTaskFile("task list must be a JSON array");
  std::vector<TaskSpec> tasks;
  for (const auto& entry : list) {
    TaskSpec task;
    try {
      task.id = entry.at("id").get<std::string>();
      task.slot_names = entry.at("slot_names").get<std::vector<std::string>>();
      if (entry.contains("input_arity") &&
          entry.at("input_arity").get<std::size_t>() != task.slot_names.size()) {
        throw MalformedTaskFile("task '" + task.id +
                                "': input_arity disagrees with slot_names");
      }
      if (entry.contains("prompt_template")) {
        task.prompt_template = entry.at("prompt_template").get<std::string>();
      } else if (templates.is_object() && templates.contains(task.id)) {
        task.prompt_template = templates.at(task.id).get<std::string>();
      } else {
        throw MalformedTaskFile("task '" + task.id + "': no prompt template");
      }
      task.output = output_spec_from_json(entry.at("output"));
    } catch (const json::exception& e) {
      throw MalformedTaskFile("task '" + task.id + "': " + e.what());
    }
    validate_task(task);
    if (find_task(tasks, task.id) != nullptr) {
      throw MalformedTaskFile("task '" + task.id + "' defined twice");
    }
    tasks.push_back(std::move(task));
  }
  return tasks;
}

json tasks_to_json(std::span<const TaskSpec> tasks) {
  json list = json::array();
  for (const auto& t : tasks) {
    list.push_back({{"id", t.id},
                    {"slot_names", t.slot_names},
                    {"output", output_spec_to_json(t.output)}});
  }
  return list;
}

std::vector<TaskSpec> load_tasks(const std::filesystem::path& list_path) {
  const json list = read_json_file(list_path);
  const auto templates_path =
      list_path.parent_path() / "template" / "sut_prompt_templates.json";
  json templates = json::object();
  if (std::filesystem::exists(templates_path)) {
    templates = read_json_file(templates_path);
  }
  return tasks_from_json(list, templates);
}

std::vector<TaskSpec> load_tasks(const std::filesystem::path& list_path,
                                 const std::filesystem::path& templates_path) {
  return tasks_from_json(read_json_file(list_path),
                         read_json_file(templates_path));
}

const std::vector<TaskSpec>& builtin_tasks() {
  static const std::vector<TaskSpec> tasks = [] {
    std::vector<TaskSpec> t;
    t.push_back(TaskSpec{
        "qa",
        {"context", "question"},
        "Here is some information: \"{INPUT_0}\" Using only this information, "
        "nothing else, answer the following question: \"{INPUT_1}\" Keep your "
        "answer to a short sentence. If you cannot give an answer, write "
        "'unknown'.",
        OutputSpec{}});
    t.push_back(TaskSpec{
        "nli",
        {"premise", "hypothesis"},
        "Premise: \"{INPUT_0}\" Hypothesis: \"{INPUT_1}\" Decide whether the "
        "premise entails the hypothesis, contradicts it, or is neutral towards "
        "it. Answer with exactly one word: entailment, contradiction, or "
        "neutral.",
        OutputSpec{OutputKind::Label, {"entailment", "contradiction", "neutral"}}});
    t.push_back(TaskSpec{
        "sa",
        {"text"},
        "Rate the sentiment of the following text on a continuous scale from 0 "
        "(very negative) to 1 (very positive): \"{INPUT_0}\" Reply with only "
        "the number, using two decimal places.",
        OutputSpec{OutputKind::NumericScore, {}, 0.0, 1.0}});
    t.push_back(TaskSpec{
        "re",
        {"text"},
        "Extract every relation between entities stated in the following text: "
        "\"{INPUT_0}\" Write one relation per line in the form: entity1 | "
        "relation | entity2. If there are no relations, write 'none'.",
        OutputSpec{OutputKind::TupleSet, {}, 0.0, 1.0, "|", 3}});
    for (const auto& task : t) validate_task(task);
    return t;
  }();
  return tasks;
}

const TaskSpec* find_task(std::span<const TaskSpec> tasks, std::string_view id) {
  for (const auto& t : tasks) {
    if (t.id == id) return &t;
  }
  return nullptr;
}

std::string render_prompt(const TaskSpec& task, const InputTuple& inputs) {
  if (inputs.size() != task.arity()) {
    throw ArityMismatch("task '" + task.id + "' expects " +
                        std::to_string(task.arity()) + " inputs, got " +
                        std::to_string(inputs.size()));
  }
  static constexpr std::string_view kOpen = "{INPUT_";
  const std::string_view tmpl = task.prompt_template;
  std::string out;
  out.reserve(tmpl.size() + 64);
  std::size_t pos = 0;
  while (pos < tmpl.size()) {
    const auto hit = tmpl.find(kOpen, pos);
    if (hit == std::string_view::npos) {
      out.append(tmpl.substr(pos));
      break;
    }
    out.append(tmpl.substr(pos, hit - pos));
    const auto close = tmpl.find('}', hit);
    std::size_t index = 0;
    const char* first = tmpl.data() + hit + kOpen.size();
    const char* last = tmpl.data() + (close == std::string_view::npos ? tmpl.size() : close);
    auto [ptr, ec] = std::from_chars(first, last, index);
    if (close != std::string_view::npos && ec == std::errc() && ptr == last &&
        index < inputs.size()) {
      out.append(inputs[index]);
      pos = close + 1;
    } else {
      out.append(kOpen);
      pos = hit + kOpen.size();
    }
  }
  return out;
}

TaskOutput parse_output(const TaskSpec& task, std::string_view raw) {
  switch (task.output.kind) {
    case OutputKind::FreeText:
      return TaskOutput{OutputKind::FreeText, std::string(raw),
                        std::string(text::trim(raw)), true};
    case OutputKind::Label:
      return parse_label(task.output, raw);
    case OutputKind::NumericScore:
      return parse_numeric(task.output, raw);
    case OutputKind::TupleSet:
      return parse_tuples(task.output, raw);
  }
  return {};
}

InputTuple input_from_json(const json& j) {
  if (j.is_string()) return {j.get<std::string>()};
  if (j.is_array() && !j.empty() &&
      std::all_of(j.begin(), j.end(), [](const json& e) { return e.is_string(); })) {
    return j.get<InputTuple>();
  }
  throw MalformedTaskFile("input must be a string or a non-empty array of strings");
}

json input_to_json(const InputTuple& input) {
  if (input.size() == 1) return input.front();
  return input;
}

std::vector<InputTuple> inputs_from_json(const json& data) {
  if (!data.is_array()) throw MalformedTaskFile("input data must be a JSON array");
  std::vector<InputTuple> out;
  out.reserve(data.size());
  for (const auto& e : data) out.push_back(input_from_json(e));
  return out;
}

std::vector<InputTuple> load_inputs(const std::filesystem::path& path) {
  return inputs_from_json(read_json_file(path));
}

json task_output_to_json(const TaskOutput& out) {
  json parsed = std::visit(
      [](const auto& v) -> json {
        using V = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<V, std::monostate>) {
          return nullptr;
        } else if constexpr (std::is_same_v<V, TupleSet>) {
          json arr = json::array();
          for (const auto& t : v) arr.push_back(t);
          return arr;
        } else {
          return v;
        }
      },
      out.parsed);
  return json{{"kind", to_string(out.kind)},
              {"text", out.text},
              {"parse_ok", out.parse_ok},
              {"parsed", std::move(parsed)}};
}

TaskOutput task_output_from_json(const json& j) {
  TaskOutput out;
  out.kind = output_kind_from_string(j.at("kind").get<std::string>());
  out.text = j.at("text").get<std::string>();
  out.parse_ok = j.at("parse_ok").get<bool>();
  const auto& p = j.at("parsed");
  if (p.is_null()) {
    out.parsed = std::monostate{};
  } else if (p.is_string()) {
    out.parsed = p.get<std::string>();
  } else if (p.is_number()) {
    out.parsed = p.get<double>();
  } else {
    TupleSet set;
    for (const auto& t : p) set.insert(t.get<OutputTuple>());
    out.parsed = std::move(set);
  }
  return out;
}

}  // namespace morphtest
