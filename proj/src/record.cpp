#include "morphtest/record.hpp"

#include <algorithm>

#include "morphtest/errors.hpp"

namespace morphtest {

using nlohmann::json;

bool TestRecord::any_violated() const {
  return std::find(relation.begin(), relation.end(), RelationVerdict::Violated) !=
         relation.end();
}

bool TestRecord::any_indeterminate() const {
  return std::find(relation.begin(), relation.end(), RelationVerdict::Indeterminate) !=
         relation.end();
}

json record_fields_to_json(const TestRecord& r) {
  json followup_inputs = json::array();
  for (const auto& f : r.followup_inputs) followup_inputs.push_back(input_to_json(f));
  json followup_outputs = json::array();
  for (const auto& o : r.followup_outputs) followup_outputs.push_back(task_output_to_json(o));
  json relation = json::array();
  for (auto v : r.relation) relation.push_back(to_string(v));
  return json{{"source_input", input_to_json(r.source_input)},
              {"source_output", task_output_to_json(r.source_output)},
              {"followup_inputs", std::move(followup_inputs)},
              {"followup_outputs", std::move(followup_outputs)},
              {"relation", std::move(relation)},
              {"verification_failure", r.verification_failure}};
}

json record_context_to_json(const TestRecord& r) {
  json j{{"model_id", r.model_id},
         {"task_id", r.task_id},
         {"mr_id", r.mr_id},
         {"input_index", r.input_index},
         {"seed_used", r.seed_used}};
  if (!r.error.empty()) j["error"] = r.error;
  return j;
}

TestRecord record_from_json(const json& fields, const json& context) {
  TestRecord r;
  r.source_input = input_from_json(fields.at("source_input"));
  r.source_output = task_output_from_json(fields.at("source_output"));
  for (const auto& f : fields.at("followup_inputs")) r.followup_inputs.push_back(input_from_json(f));
  for (const auto& o : fields.at("followup_outputs")) {
    r.followup_outputs.push_back(task_output_from_json(o));
  }
  for (const auto& v : fields.at("relation")) {
    r.relation.push_back(verdict_from_string(v.get<std::string>()));
  }
  r.verification_failure = fields.at("verification_failure").get<bool>();
  r.model_id = context.at("model_id").get<std::string>();
  r.task_id = context.at("task_id").get<std::string>();
  r.mr_id = context.at("mr_id").get<std::string>();
  r.input_index = context.at("input_index").get<std::size_t>();
  r.seed_used = context.at("seed_used").get<std::uint64_t>();
  r.error = context.value("error", std::string());
  if (r.relation.size() != r.followup_inputs.size() ||
      r.followup_outputs.size() != r.followup_inputs.size()) {
    throw Error("record for " + r.mr_id + " has misaligned follow-up lists");
  }
  return r;
}

}  // namespace morphtest
