// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace pot
{

enum class ErrorCode
{
    InvalidArgument,
    InvalidConfig,
    Io,

    // llm
    ContextOverflow,
    ProviderExhausted,
    ProviderEmpty,
    ProviderError,
    ScriptExhausted,
    CacheMiss,

    // prompts
    UnknownTemplate,
    MissingBinding,

    // pathway
    UnparseableAction,
    DisallowedAction,

    // aggregate / baselines
    EmptyProfile,
    InvalidSelection,
    EmptyCandidates,
    AllPathwaysFailed,
    AllSamplesFailed,

    // eval
    UnparseableScore,
    NonpositiveBaseline,
    LengthMismatch,

    // harness
    MalformedRecord,
    MissingField,
    QuestionSetMismatch,
};

std::string_view to_string(ErrorCode code) noexcept;

class Error: public std::runtime_error
{
  public:
    Error(ErrorCode code, const std::string& message):
        std::runtime_error(std::string(to_string(code)) + ": " + message), _code(code)
    {
    }

    [[nodiscard]] ErrorCode code() const noexcept { return _code; }

  private:
    ErrorCode _code;
};

} // namespace pot
