// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "pot/llm.hpp"
#include "pot/prompts.hpp"

namespace pot
{

/// What every model-facing operation needs: a backend to call and the templates to
/// build prompts from. Both are shared, thread-safe and outlive the operation.
struct Runtime
{
    llm::Backend& backend;
    const prompts::TemplateRegistry& prompts;
};

} // namespace pot
