// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "pot/domain.hpp"

#include <atomic>
#include <chrono>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace pot::llm
{

enum class Role
{
    System,
    User,
    Assistant,
};

std::string_view to_string(Role role) noexcept;

struct Message
{
    Role role = Role::User;
    std::string text;

    bool operator==(const Message&) const = default;
};

struct CompletionRequest
{
    std::vector<Message> messages;
    SamplingParams sampling;
    std::string tag;  ///< Free-form label such as "action_selection" or "planning".
    std::string lane; ///< Routing key for scripted backends; not part of the cache key.

    static CompletionRequest user(std::string text, SamplingParams sampling, std::string tag, std::string lane = {});
};

struct CompletionResult
{
    std::string text;
    bool cached = false;
    int attempts = 1;
};

/// Stable digest of (messages, temperature, nucleus_p, seed, max_output_tokens).
/// Message order is significant; tag and lane are not covered.
std::string cache_key(const CompletionRequest& request);

using TokenEstimator = std::function<std::size_t(std::string_view)>;

/// Rough provider-independent estimate: one token per four bytes, rounded up.
std::size_t approximate_tokens(std::string_view text) noexcept;

struct ContextLimits
{
    std::size_t context_limit = 32768;
    double safety_margin = 0.10;
    TokenEstimator estimator = approximate_tokens;
};

/// Estimated prompt size of a request including the safety margin.
std::size_t estimated_request_tokens(const CompletionRequest& request, const ContextLimits& limits);

struct RetryPolicy
{
    int retry_max = 5;
    std::chrono::milliseconds initial_backoff {500};
    double multiplier = 2.0;
    std::chrono::milliseconds max_backoff {30'000};
    std::function<void(std::chrono::milliseconds)> sleep; ///< Defaults to std::this_thread::sleep_for.
};

/// Thrown by backend implementations for failures worth retrying (network errors,
/// rate limiting, server errors).
class TransientError: public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

/// Chat-completion provider. complete() enforces the context limit, retries transient
/// failures with exponential backoff and retries an empty reply once before raising
/// ProviderEmpty. Implementations must be callable from several threads at once.
class Backend
{
  public:
    Backend() = default;
    Backend(const Backend&) = delete;
    Backend& operator=(const Backend&) = delete;
    virtual ~Backend() = default;

    CompletionResult complete(const CompletionRequest& request);

    void set_limits(ContextLimits limits) { _limits = std::move(limits); }
    void set_retry_policy(RetryPolicy policy) { _retry = std::move(policy); }
    [[nodiscard]] const ContextLimits& limits() const noexcept { return _limits; }
    [[nodiscard]] const RetryPolicy& retry_policy() const noexcept { return _retry; }

  protected:
    virtual CompletionResult do_complete(const CompletionRequest& request) = 0;

  private:
    ContextLimits _limits;
    RetryPolicy _retry;
};

/// Counts requests passed through to a wrapped backend.
class CountingBackend: public Backend
{
  public:
    explicit CountingBackend(Backend& inner): _inner(inner) {}

    [[nodiscard]] std::size_t calls() const noexcept { return _calls.load(); }

  protected:
    CompletionResult do_complete(const CompletionRequest& request) override
    {
        ++_calls;
        return _inner.complete(request);
    }

  private:
    Backend& _inner;
    std::atomic<std::size_t> _calls {0};
};

} // namespace pot::llm
