#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "morphtest/comparators.hpp"
#include "morphtest/task.hpp"

namespace morphtest {

/// One metamorphic group: a source input, its follow-ups, the model's
/// answers to all of them and a verdict per follow-up.
struct TestRecord {
  InputTuple source_input;
  TaskOutput source_output;
  std::vector<InputTuple> followup_inputs;
  std::vector<TaskOutput> followup_outputs;
  std::vector<RelationVerdict> relation;  // aligned with followup_inputs
  bool verification_failure = false;

  std::string mr_id;
  std::string task_id;
  std::string model_id;
  std::size_t input_index = 0;
  std::uint64_t seed_used = 0;
  std::string error;  // why the group degraded, if it did

  bool any_violated() const;
  bool any_indeterminate() const;
  bool operator==(const TestRecord&) const = default;
};

/// Exactly the six result fields: source_input, source_output,
/// followup_inputs, followup_outputs, relation, verification_failure.
nlohmann::json record_fields_to_json(const TestRecord& r);
/// model_id, task_id, mr_id, input_index, seed_used and (if set) error.
nlohmann::json record_context_to_json(const TestRecord& r);
TestRecord record_from_json(const nlohmann::json& fields, const nlohmann::json& context);

}  // namespace morphtest
