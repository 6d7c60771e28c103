// SPDX-License-Identifier: Apache-2.0
#include "pot/backends.hpp"

#include "pot/error.hpp"

#include <nlohmann/json.hpp>

#include <iterator>
#include <random>
#include <thread>

namespace pot::llm
{

ScriptedBackend::ScriptedBackend(std::vector<std::string> default_script):
    _default(default_script.begin(), default_script.end())
{
}

std::unique_ptr<ScriptedBackend> ScriptedBackend::from_json(const nlohmann::json& script)
{
    auto backend = std::make_unique<ScriptedBackend>(script.value("default", std::vector<std::string> {}));
    if (auto const lanes = script.find("lanes"); lanes != script.end())
        for (auto const& [lane, replies]: lanes->items())
            backend->set_lane(lane, replies.get<std::vector<std::string>>());
    return backend;
}

void ScriptedBackend::set_lane(const std::string& lane, std::vector<std::string> script)
{
    auto const lock = std::lock_guard(_mutex);
    _lanes[lane] = std::deque<std::string>(script.begin(), script.end());
}

void ScriptedBackend::set_responder(Responder responder)
{
    auto const lock = std::lock_guard(_mutex);
    _responder = std::move(responder);
}

std::vector<CompletionRequest> ScriptedBackend::calls() const
{
    auto const lock = std::lock_guard(_mutex);
    return _calls;
}

std::size_t ScriptedBackend::call_count() const
{
    auto const lock = std::lock_guard(_mutex);
    return _calls.size();
}

CompletionResult ScriptedBackend::do_complete(const CompletionRequest& request)
{
    if (_jitter.count() > 0)
    {
        thread_local auto rng = std::minstd_rand(std::random_device {}());
        auto dist = std::uniform_int_distribution<std::int64_t>(0, _jitter.count());
        std::this_thread::sleep_for(std::chrono::microseconds(dist(rng)));
    }

    auto responder = Responder {};
    {
        auto const lock = std::lock_guard(_mutex);
        _calls.push_back(request);
        auto lane = _lanes.find(request.lane);
        auto& queue = lane != _lanes.end() ? lane->second : _default;
        if (!queue.empty())
        {
            auto text = std::move(queue.front());
            queue.pop_front();
            return CompletionResult {.text = std::move(text)};
        }
        responder = _responder;
    }
    if (responder)
        return CompletionResult {.text = responder(request)};
    throw Error(ErrorCode::ScriptExhausted,
                "no scripted reply left for lane '" + request.lane + "' (tag '" + request.tag + "')");
}

ResponseCache::ResponseCache(std::filesystem::path path): _path(std::move(path))
{
    auto needsNewline = false;
    if (std::filesystem::exists(_path))
    {
        auto in = std::ifstream(_path, std::ios::binary);
        auto content = std::string(std::istreambuf_iterator<char>(in), {});
        in.close();
        auto pending = std::optional<std::string> {};
        auto goodEnd = std::size_t {0}; // Byte offset just past the last well-formed line.
        auto lineNo = 0;
        for (auto start = std::size_t {0}; start < content.size();)
        {
            ++lineNo;
            auto const nl = content.find('\n', start);
            auto const end = nl == std::string::npos ? content.size() : nl;
            auto const line = std::string_view(content).substr(start, end - start);
            start = nl == std::string::npos ? content.size() : nl + 1;
            // A malformed line is only fatal if something follows it; a torn final
            // write is dropped.
            if (pending)
                throw Error(ErrorCode::MalformedRecord, "cache " + _path.string() + ": " + *pending);
            if (line.empty())
            {
                goodEnd = start;
                continue;
            }
            try
            {
                auto const record = nlohmann::json::parse(line);
                _entries.try_emplace(record.at("key").get<std::string>(), record.at("text").get<std::string>());
                goodEnd = start;
                needsNewline = nl == std::string::npos;
            }
            catch (const nlohmann::json::exception& e)
            {
                pending = "line " + std::to_string(lineNo) + ": " + e.what();
            }
        }
        // Drop the torn tail so appended records start on a fresh line.
        if (goodEnd < content.size())
            std::filesystem::resize_file(_path, goodEnd);
    }
    else if (_path.has_parent_path())
    {
        std::filesystem::create_directories(_path.parent_path());
    }
    _out.open(_path, std::ios::app);
    if (!_out)
        throw Error(ErrorCode::Io, "cannot open cache file " + _path.string());
    if (needsNewline)
        _out << '\n';
}

std::optional<std::string> ResponseCache::find(const std::string& key) const
{
    auto const lock = std::lock_guard(_mutex);
    if (auto it = _entries.find(key); it != _entries.end())
        return it->second;
    return std::nullopt;
}

void ResponseCache::insert(const std::string& key, const std::string& text)
{
    auto const lock = std::lock_guard(_mutex);
    if (!_entries.try_emplace(key, text).second)
        return;
    if (_out.is_open())
    {
        _out << nlohmann::json {{"key", key}, {"text", text}}.dump() << '\n';
        _out.flush();
    }
}

std::size_t ResponseCache::size() const
{
    auto const lock = std::lock_guard(_mutex);
    return _entries.size();
}

CachedBackend::CachedBackend(std::shared_ptr<Backend> inner, std::shared_ptr<ResponseCache> cache):
    _inner(std::move(inner)), _cache(std::move(cache))
{
    if (!_inner || !_cache)
        throw Error(ErrorCode::InvalidArgument, "CachedBackend needs a backend and a cache");
    // Retries happen in the wrapped backend; this layer only looks things up.
    auto policy = RetryPolicy {};
    policy.retry_max = 0;
    set_retry_policy(std::move(policy));
    set_limits(_inner->limits());
}

CompletionResult CachedBackend::do_complete(const CompletionRequest& request)
{
    auto const key = cache_key(request);
    if (auto text = _cache->find(key))
    {
        ++_hits;
        return CompletionResult {.text = std::move(*text), .cached = true};
    }
    ++_live;
    auto result = _inner->complete(request);
    _cache->insert(key, result.text);
    return result;
}

CompletionResult OfflineBackend::do_complete(const CompletionRequest& request)
{
    throw Error(ErrorCode::CacheMiss, "replay has no cached reply for request '" + request.tag + "' on lane '"
                                          + request.lane + "'");
}

} // namespace pot::llm
