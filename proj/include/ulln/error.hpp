// Copyright 2026 The ulln Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace ulln {

// Base of every error the library raises. kind() is a stable identifier that
// the CLI prints and tests match against.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(kind + ": " + what), kind_(std::move(kind)), message_(what) {}
  const std::string& kind() const noexcept { return kind_; }
  // what() without the kind prefix.
  const std::string& message() const noexcept { return message_; }

 private:
  std::string kind_;
  std::string message_;
};

#define ULLN_DEFINE_ERROR(Name, Tag)                                  \
  class Name : public Error {                                         \
   public:                                                            \
    explicit Name(const std::string& what) : Error(Tag, what) {}      \
  };

ULLN_DEFINE_ERROR(InvalidParameter, "invalid-parameter")
ULLN_DEFINE_ERROR(BudgetExceeded, "budget-exceeded")
ULLN_DEFINE_ERROR(ContinuousKind, "continuous-kind")
ULLN_DEFINE_ERROR(GridOverflow, "grid-overflow")
ULLN_DEFINE_ERROR(MixedMonotonicity, "mixed-monotonicity")
ULLN_DEFINE_ERROR(IntegrationError, "integration-error")
ULLN_DEFINE_ERROR(AnalyticUnavailable, "analytic-unavailable")
ULLN_DEFINE_ERROR(NonFiniteValue, "non-finite-value")
ULLN_DEFINE_ERROR(CapExceeded, "cap-exceeded")
ULLN_DEFINE_ERROR(ZeroSummary, "zero-summary")
ULLN_DEFINE_ERROR(OutsideHypotheses, "outside-hypotheses")
ULLN_DEFINE_ERROR(PrecheckFailed, "precheck-failed")

#undef ULLN_DEFINE_ERROR

// Config errors carry the dotted field path ("experiment.p") of the offender.
class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& what)
      : Error("config-error", field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

}  // namespace ulln
