// SPDX-License-Identifier: Apache-2.0
#include "pot/llm.hpp"

#include "pot/digest.hpp"
#include "pot/error.hpp"
#include "pot/serialization.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

namespace pot::llm
{

std::string_view to_string(Role role) noexcept
{
    switch (role)
    {
        case Role::System: return "system";
        case Role::User: return "user";
        case Role::Assistant: return "assistant";
    }
    return "user";
}

CompletionRequest CompletionRequest::user(std::string text, SamplingParams sampling, std::string tag, std::string lane)
{
    return CompletionRequest {
        .messages = {Message {Role::User, std::move(text)}},
        .sampling = sampling,
        .tag = std::move(tag),
        .lane = std::move(lane),
    };
}

std::string cache_key(const CompletionRequest& request)
{
    auto messages = nlohmann::json::array();
    for (auto const& m: request.messages)
        messages.push_back(nlohmann::json::array({to_string(m.role), m.text}));
    auto const canonical = nlohmann::json {
        {"messages", std::move(messages)},
        {"temperature", request.sampling.temperature},
        {"nucleus_p", request.sampling.nucleus_p},
        {"seed", request.sampling.seed},
        {"max_output_tokens", request.sampling.max_output_tokens},
    };
    return sha256_hex(canonical.dump());
}

std::size_t approximate_tokens(std::string_view text) noexcept
{
    return (text.size() + 3) / 4;
}

std::size_t estimated_request_tokens(const CompletionRequest& request, const ContextLimits& limits)
{
    // A few tokens of role framing per message.
    constexpr auto perMessageOverhead = std::size_t {4};
    auto tokens = std::size_t {0};
    for (auto const& m: request.messages)
        tokens += limits.estimator(m.text) + perMessageOverhead;
    return static_cast<std::size_t>(std::ceil(static_cast<double>(tokens) * (1.0 + limits.safety_margin)));
}

CompletionResult Backend::complete(const CompletionRequest& request)
{
    auto const estimate = estimated_request_tokens(request, _limits);
    if (estimate > _limits.context_limit)
        throw Error(ErrorCode::ContextOverflow,
                    "request '" + request.tag + "' needs ~" + std::to_string(estimate) + " tokens, limit is "
                        + std::to_string(_limits.context_limit));

    auto backoff = _retry.initial_backoff;
    auto attempts = 0;
    auto emptyReplies = 0;
    auto lastError = std::string {};
    while (true)
    {
        ++attempts;
        try
        {
            auto result = do_complete(request);
            if (result.text.empty())
            {
                if (++emptyReplies <= 1)
                    continue;
                throw Error(ErrorCode::ProviderEmpty, "empty reply for request '" + request.tag + "'");
            }
            result.attempts = attempts - 1 + std::max(1, result.attempts);
            return result;
        }
        catch (const TransientError& e)
        {
            lastError = e.what();
        }

        if (attempts - emptyReplies > _retry.retry_max)
            throw Error(ErrorCode::ProviderExhausted,
                        "giving up after " + std::to_string(attempts) + " attempts: " + lastError);
        if (_retry.sleep)
            _retry.sleep(backoff);
        else
            std::this_thread::sleep_for(backoff);
        backoff = std::min(_retry.max_backoff,
                           std::chrono::milliseconds(static_cast<std::int64_t>(
                               static_cast<double>(backoff.count()) * _retry.multiplier)));
    }
}

} // namespace pot::llm
