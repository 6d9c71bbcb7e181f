#pragma once

#include <algorithm>
#include <chrono>
#include <functional>
#include <string>
#include <thread>

#include "morphtest/errors.hpp"

namespace morphtest {

struct RetryPolicy {
  int max_attempts = 3;
  std::chrono::milliseconds initial_delay{250};
  std::chrono::milliseconds max_delay{8000};
  double multiplier = 2.0;

  /// Delay before retry number `attempt` (0-based: the wait after the first
  /// failed attempt is backoff(0)).
  std::chrono::milliseconds backoff(int attempt) const {
    double d = static_cast<double>(initial_delay.count());
    for (int i = 0; i < attempt && d < static_cast<double>(max_delay.count()); ++i) {
      d *= multiplier;
    }
    return std::min(max_delay,
                    std::chrono::milliseconds(static_cast<long long>(d)));
  }
};

using Sleeper = std::function<void(std::chrono::milliseconds)>;

inline void sleep_for(std::chrono::milliseconds d) { std::this_thread::sleep_for(d); }

/// Runs `call` until it succeeds, it throws something other than
/// TransientError, or `policy.max_attempts` attempts have been made.
/// AuthFailure and every other error propagate on the first occurrence.
/// Exhaustion raises LlmUnreachable carrying the last transient message.
template <typename Call>
auto with_retry(Call&& call, const RetryPolicy& policy,
                const Sleeper& sleeper = sleep_for) -> decltype(call()) {
  if (policy.max_attempts < 1) {
    throw InvalidConfig("retry policy needs max_attempts >= 1");
  }
  std::string last_error;
  for (int attempt = 0; attempt < policy.max_attempts; ++attempt) {
    try {
      return call();
    } catch (const TransientError& e) {
      last_error = e.what();
    }
    if (attempt + 1 < policy.max_attempts) sleeper(policy.backoff(attempt));
  }
  throw LlmUnreachable("gave up after " + std::to_string(policy.max_attempts) +
                       " attempt(s): " + last_error);
}

}  // namespace morphtest
