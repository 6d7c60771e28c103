// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "pot/llm.hpp"

#include <nlohmann/json_fwd.hpp>

#include <atomic>
#include <deque>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <unordered_map>

namespace pot::llm
{

/// Deterministic test double. Replies are consumed in request order from a per-lane
/// queue, so concurrent pathways (each on its own lane) cannot steal each other's
/// replies. Requests on unconfigured lanes draw from the default queue. When the
/// relevant queue is empty the responder is consulted, if one is set; otherwise the
/// request fails with ScriptExhausted.
class ScriptedBackend: public Backend
{
  public:
    using Responder = std::function<std::string(const CompletionRequest&)>;

    ScriptedBackend() = default;
    explicit ScriptedBackend(std::vector<std::string> default_script);

    /// Script document: {"default": [..], "lanes": {"<lane>": [..]}}.
    static std::unique_ptr<ScriptedBackend> from_json(const nlohmann::json& script);

    void set_lane(const std::string& lane, std::vector<std::string> script);
    void set_responder(Responder responder);

    /// Sleep up to max_delay before answering; used to shake out interleaving bugs.
    void set_jitter(std::chrono::microseconds max_delay) { _jitter = max_delay; }

    [[nodiscard]] std::vector<CompletionRequest> calls() const;
    [[nodiscard]] std::size_t call_count() const;

  protected:
    CompletionResult do_complete(const CompletionRequest& request) override;

  private:
    mutable std::mutex _mutex;
    std::deque<std::string> _default;
    std::unordered_map<std::string, std::deque<std::string>> _lanes;
    Responder _responder;
    std::vector<CompletionRequest> _calls;
    std::chrono::microseconds _jitter {0};
};

/// Append-only response store. Each insert appends one {"key", "text"} JSON line and
/// flushes, so a crash loses at most the record being written. On load, a truncated
/// final line is ignored; the first record for a key wins.
class ResponseCache
{
  public:
    /// In-memory cache without persistence.
    ResponseCache() = default;

    /// Loads existing records from path (if present) and appends new ones to it.
    explicit ResponseCache(std::filesystem::path path);

    [[nodiscard]] std::optional<std::string> find(const std::string& key) const;
    void insert(const std::string& key, const std::string& text);

    [[nodiscard]] std::size_t size() const;
    [[nodiscard]] const std::filesystem::path& path() const noexcept { return _path; }

  private:
    mutable std::mutex _mutex;
    std::filesystem::path _path;
    std::unordered_map<std::string, std::string> _entries;
    std::ofstream _out;
};

/// Serves requests from a ResponseCache and forwards misses to the wrapped backend.
class CachedBackend: public Backend
{
  public:
    CachedBackend(std::shared_ptr<Backend> inner, std::shared_ptr<ResponseCache> cache);

    /// Requests that reached the wrapped backend.
    [[nodiscard]] std::size_t live_calls() const noexcept { return _live.load(); }
    [[nodiscard]] std::size_t hits() const noexcept { return _hits.load(); }
    [[nodiscard]] const ResponseCache& cache() const noexcept { return *_cache; }

  protected:
    CompletionResult do_complete(const CompletionRequest& request) override;

  private:
    std::shared_ptr<Backend> _inner;
    std::shared_ptr<ResponseCache> _cache;
    std::atomic<std::size_t> _live {0};
    std::atomic<std::size_t> _hits {0};
};

/// Backend that refuses every request with CacheMiss. Placed behind a CachedBackend it
/// turns a run into a pure replay.
class OfflineBackend: public Backend
{
  protected:
    CompletionResult do_complete(const CompletionRequest& request) override;
};

} // namespace pot::llm
