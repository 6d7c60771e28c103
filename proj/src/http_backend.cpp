// SPDX-License-Identifier: Apache-2.0
#include "pot/http_backend.hpp"

#include "pot/error.hpp"

#include <nlohmann/json.hpp>

#ifdef POT_HAVE_OPENSSL
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#include <httplib.h>

#include <cstdlib>

namespace pot::llm
{

HttpBackendConfig with_env_credentials(HttpBackendConfig config)
{
    if (config.api_key.empty())
        if (auto const* key = std::getenv("POT_API_KEY"))
            config.api_key = key;
    return config;
}

HttpBackend::HttpBackend(HttpBackendConfig config): _config(std::move(config))
{
    auto const& url = _config.base_url;
    auto const scheme = url.find("://");
    if (scheme == std::string::npos)
        throw Error(ErrorCode::InvalidConfig, "base_url needs a scheme: '" + url + "'");
    auto const pathStart = url.find('/', scheme + 3);
    _origin = url.substr(0, pathStart);
    _path = pathStart == std::string::npos ? std::string {} : url.substr(pathStart);
    while (!_path.empty() && _path.back() == '/')
        _path.pop_back();
    _path += "/chat/completions";

#ifndef POT_HAVE_OPENSSL
    if (url.starts_with("https"))
        throw Error(ErrorCode::InvalidConfig, "built without TLS support; cannot reach " + url);
#endif
    if (_config.model.empty())
        throw Error(ErrorCode::InvalidConfig, "HTTP backend needs a model name");
}

CompletionResult HttpBackend::do_complete(const CompletionRequest& request)
{
    auto messages = nlohmann::json::array();
    for (auto const& m: request.messages)
        messages.push_back({{"role", to_string(m.role)}, {"content", m.text}});

    auto const body = nlohmann::json {
        {"model", _config.model},
        {"messages", std::move(messages)},
        {"temperature", request.sampling.temperature},
        {"top_p", request.sampling.nucleus_p},
        {"max_tokens", request.sampling.max_output_tokens},
        // Providers take a signed 32-bit-ish integer seed.
        {"seed", static_cast<std::int64_t>(request.sampling.seed & 0x7fffffffu)},
    };

    auto client = httplib::Client(_origin);
    client.set_connection_timeout(_config.timeout);
    client.set_read_timeout(_config.timeout);
    client.set_write_timeout(_config.timeout);
    auto headers = httplib::Headers {};
    if (!_config.api_key.empty())
        headers.emplace("Authorization", "Bearer " + _config.api_key);

    auto const response = client.Post(_path, headers, body.dump(), "application/json");
    if (!response)
        throw TransientError("connection to " + _origin + " failed: " + httplib::to_string(response.error()));

    auto const status = response->status;
    if (status == 408 || status == 429 || status >= 500)
        throw TransientError("HTTP " + std::to_string(status) + " from " + _origin);
    if (status < 200 || status >= 300)
        throw Error(ErrorCode::ProviderError,
                    "HTTP " + std::to_string(status) + " from " + _origin + ": " + response->body.substr(0, 500));

    try
    {
        auto const reply = nlohmann::json::parse(response->body);
        auto const& content = reply.at("choices").at(0).at("message").at("content");
        return CompletionResult {.text = content.is_null() ? std::string {} : content.get<std::string>()};
    }
    catch (const nlohmann::json::exception& e)
    {
        throw Error(ErrorCode::ProviderError, std::string("unexpected response body: ") + e.what());
    }
}

} // namespace pot::llm
