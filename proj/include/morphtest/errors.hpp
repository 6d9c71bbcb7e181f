#pragma once

#include <stdexcept>
#include <string>

namespace morphtest {

// Root of every error the harness raises on purpose.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define MORPHTEST_DEFINE_ERROR(Name, Base) \
  class Name : public Base {               \
   public:                                 \
    using Base::Base;                      \
  }

// mr-engine
MORPHTEST_DEFINE_ERROR(DuplicateRelationId, Error);
MORPHTEST_DEFINE_ERROR(UnknownFunctionId, Error);
MORPHTEST_DEFINE_ERROR(InvalidRelation, Error);
MORPHTEST_DEFINE_ERROR(TransformationFailed, Error);
MORPHTEST_DEFINE_ERROR(NotApplicable, Error);
MORPHTEST_DEFINE_ERROR(OutputKindMismatch, Error);
MORPHTEST_DEFINE_ERROR(UnknownVerification, Error);

// task-catalog
MORPHTEST_DEFINE_ERROR(MalformedTaskFile, Error);
MORPHTEST_DEFINE_ERROR(ArityMismatch, Error);

// comparators
MORPHTEST_DEFINE_ERROR(NonFiniteInput, Error);

// llm-gateway
MORPHTEST_DEFINE_ERROR(GatewayError, Error);
MORPHTEST_DEFINE_ERROR(LlmUnreachable, GatewayError);
MORPHTEST_DEFINE_ERROR(AuthFailure, GatewayError);
MORPHTEST_DEFINE_ERROR(EmptyResponse, GatewayError);
MORPHTEST_DEFINE_ERROR(RequestRejected, GatewayError);
MORPHTEST_DEFINE_ERROR(EmbeddingUnavailable, GatewayError);
// Raised by a single attempt; with_retry turns exhaustion into LlmUnreachable.
MORPHTEST_DEFINE_ERROR(TransientError, GatewayError);

// orchestrator / reporting
MORPHTEST_DEFINE_ERROR(IoFailure, Error);
MORPHTEST_DEFINE_ERROR(ConfigMismatch, Error);
MORPHTEST_DEFINE_ERROR(CorruptCheckpoint, Error);
MORPHTEST_DEFINE_ERROR(InvalidConfig, Error);

// cli-config
MORPHTEST_DEFINE_ERROR(MalformedConfig, InvalidConfig);
MORPHTEST_DEFINE_ERROR(MissingArgument, InvalidConfig);
MORPHTEST_DEFINE_ERROR(UnknownTask, InvalidConfig);
MORPHTEST_DEFINE_ERROR(UnknownRelation, InvalidConfig);

#undef MORPHTEST_DEFINE_ERROR

}  // namespace morphtest
