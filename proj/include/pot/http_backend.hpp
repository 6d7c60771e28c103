// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "pot/llm.hpp"

#include <chrono>
#include <string>

namespace pot::llm
{

struct HttpBackendConfig
{
    std::string base_url = "https://api.openai.com/v1"; ///< Endpoint prefix; "/chat/completions" is appended.
    std::string model;
    std::string api_key; ///< Sent as a bearer token when non-empty.
    std::chrono::seconds timeout {120};
};

/// Reads the API key from POT_API_KEY when the config does not carry one.
HttpBackendConfig with_env_credentials(HttpBackendConfig config);

/// Chat-completion client over HTTP(S) with JSON bodies:
///   request  {model, messages:[{role, content}], temperature, top_p, max_tokens, seed}
///   response {choices:[{message:{content}}]}
/// Connection failures, 408, 429 and 5xx are transient; other non-2xx statuses fail
/// immediately with ProviderError.
class HttpBackend: public Backend
{
  public:
    explicit HttpBackend(HttpBackendConfig config);

    [[nodiscard]] const HttpBackendConfig& config() const noexcept { return _config; }

  protected:
    CompletionResult do_complete(const CompletionRequest& request) override;

  private:
    HttpBackendConfig _config;
    std::string _origin; ///< scheme://host[:port]
    std::string _path;   ///< path prefix + /chat/completions
};

} // namespace pot::llm
