// SPDX-License-Identifier: Apache-2.0
#include "pot/baselines.hpp"

#include "pot/digest.hpp"
#include "pot/error.hpp"
#include "parallel.hpp"
#include "text.hpp"

#include <optional>

namespace pot::baselines
{

void TotConfig::validate() const
{
    if (depth != 2)
        throw Error(ErrorCode::InvalidConfig, "tree of thoughts supports depth 2 only, got " + std::to_string(depth));
    if (width < 1)
        throw Error(ErrorCode::InvalidConfig, "tree of thoughts width must be at least 1");
}

namespace
{
    SamplingParams seeded(SamplingParams sampling, std::uint64_t base, const Example& example, std::string_view what,
                          std::optional<std::size_t> index = std::nullopt)
    {
        sampling.seed = index ? derive_seed(base, {example.question_id, what, std::to_string(*index)})
                              : derive_seed(base, {example.question_id, what});
        return sampling;
    }

    std::string lane(const Example& example, std::string_view what, std::optional<std::size_t> index = std::nullopt)
    {
        auto out = example.question_id + "/" + std::string(what);
        if (index)
            out += "/" + std::to_string(*index);
        return out;
    }

    aggregate::CallOptions call_options(const BaselineOptions& options, const Example& example, std::string_view what)
    {
        return aggregate::CallOptions {
            .sampling = seeded(options.sampling, options.seed, example, what),
            .lane = lane(example, what),
            .attempts = options.attempts,
        };
    }

    prompts::Bindings profile_bindings(const Example& example)
    {
        return {
            {"question", example.question},
            {"profile", prompts::render_profile(example.profile)},
        };
    }

    std::string complete(const Runtime& rt, std::string prompt, SamplingParams sampling, std::string tag,
                         std::string lane)
    {
        return rt.backend.complete(llm::CompletionRequest::user(std::move(prompt), sampling, std::move(tag),
                                                                std::move(lane)))
            .text;
    }

    // k completions of the same prompt with per-sample seeds; failed samples stay empty.
    std::vector<std::optional<std::string>> sample(const Runtime& rt, const Example& example, const std::string& prompt,
                                                   std::size_t k, SamplingParams sampling, std::uint64_t seed,
                                                   std::string_view what, std::size_t parallelism,
                                                   std::vector<std::string>* errors = nullptr)
    {
        auto out = std::vector<std::optional<std::string>>(k);
        auto failures = std::vector<std::string>(k);
        detail::parallel_for(k, parallelism, [&](std::size_t i) {
            try
            {
                out[i] = complete(rt, prompt, seeded(sampling, seed, example, what, i), std::string(what),
                                  lane(example, what, i));
            }
            catch (const std::exception& e)
            {
                failures[i] = e.what();
            }
        });
        if (errors)
            *errors = std::move(failures);
        return out;
    }
} // namespace

std::string extract_cot_answer(std::string_view reply)
{
    constexpr auto marker = std::string_view {"Response:"};
    auto const pos = reply.rfind(marker);
    if (pos == std::string_view::npos)
        return std::string(reply);
    auto const answer = text::trim(reply.substr(pos + marker.size()));
    return answer.empty() ? std::string(reply) : std::string(answer);
}

std::string run_no_personalization(const Runtime& rt, const Example& example, const BaselineOptions& options)
{
    return complete(rt, example.question, seeded(options.sampling, options.seed, example, "baseline"),
                    "no_personalization", lane(example, "baseline"));
}

std::string run_in_context(const Runtime& rt, const Example& example, bool cot, const BaselineOptions& options)
{
    auto const name = cot ? "baseline_cot" : "baseline_plain";
    auto reply = complete(rt, rt.prompts.render(name, profile_bindings(example)),
                          seeded(options.sampling, options.seed, example, "baseline"), name, lane(example, "baseline"));
    return cot ? extract_cot_answer(reply) : reply;
}

aggregate::FinalResult run_best_of_k(const Runtime& rt, const Example& example, std::size_t k, bool cot,
                                     const BaselineOptions& options)
{
    if (k < 1)
        throw Error(ErrorCode::InvalidConfig, "best-of-k needs k >= 1");

    auto const name = cot ? "baseline_cot" : "baseline_plain";
    auto const prompt = rt.prompts.render(name, profile_bindings(example));
    auto errors = std::vector<std::string> {};
    auto samples = sample(rt, example, prompt, k, options.sample_sampling, options.seed, "sample", options.parallelism,
                          &errors);

    auto candidates = std::vector<Candidate> {};
    auto failures = std::vector<aggregate::PathwayFailure> {};
    for (std::size_t i = 0; i < k; ++i)
    {
        if (samples[i])
            candidates.push_back(Candidate {.pathway_index = i, .text = cot ? extract_cot_answer(*samples[i]) : *samples[i]});
        else
            failures.push_back(aggregate::PathwayFailure {.pathway_index = i, .error = errors[i]});
    }
    if (candidates.empty())
        throw Error(ErrorCode::AllSamplesFailed, "all " + std::to_string(k) + " samples failed for '"
                                                     + example.question_id + "'; first error: " + errors.front());

    auto const preferences =
        aggregate::extract_preferences(rt, example.profile, call_options(options, example, "preferences"));
    auto result = aggregate::best_of_n(rt, example.question, CandidateSet::from_unordered(std::move(candidates)),
                                       preferences, call_options(options, example, "select"), options.literal_k1);
    result.failures = std::move(failures);
    return result;
}

aggregate::FinalResult run_tot(const Runtime& rt, const Example& example, const TotConfig& tot,
                               const BaselineOptions& options)
{
    tot.validate();
    auto const k = tot.width;
    auto const unwrap = [&](std::vector<std::optional<std::string>> items, const std::vector<std::string>& errors,
                            std::string_view stage) {
        auto out = std::vector<std::string> {};
        for (std::size_t i = 0; i < items.size(); ++i)
        {
            if (!items[i])
                throw Error(ErrorCode::ProviderError,
                            "tree of thoughts " + std::string(stage) + " " + std::to_string(i) + ": " + errors[i]);
            out.push_back(std::move(*items[i]));
        }
        return out;
    };

    auto const preferences =
        aggregate::extract_preferences(rt, example.profile, call_options(options, example, "preferences"));

    // Stage 1: plans.
    auto errors = std::vector<std::string> {};
    auto const plans = unwrap(sample(rt, example, rt.prompts.render("tot_plan", profile_bindings(example)), k,
                                     tot.sampling, options.seed, "tot/plan", options.parallelism, &errors),
                              errors, "plan");
    auto planIndex = std::size_t {0};
    if (k > 1 || options.literal_k1)
    {
        auto const prompt = rt.prompts.render("tot_select_plan", {
                                                                     {"question", example.question},
                                                                     {"preferences", preferences.text},
                                                                     {"plans", prompts::render_numbered(plans)},
                                                                     {"last_index", std::to_string(k - 1)},
                                                                 });
        planIndex = aggregate::select_index(rt, prompt, k, "tot_select_plan",
                                            call_options(options, example, "tot/plan-select"));
    }

    // Stage 2: responses that follow the chosen plan.
    auto bindings = profile_bindings(example);
    bindings.emplace("plan", plans[planIndex]);
    auto const responses = unwrap(sample(rt, example, rt.prompts.render("tot_generate", bindings), k, tot.sampling,
                                         options.seed, "tot/response", options.parallelism, &errors),
                                  errors, "response");

    auto candidates = std::vector<Candidate> {};
    for (std::size_t i = 0; i < k; ++i)
        candidates.push_back(Candidate {.pathway_index = i, .text = responses[i]});
    return aggregate::best_of_n(rt, example.question, CandidateSet {std::move(candidates)}, preferences,
                                call_options(options, example, "tot/response-select"), options.literal_k1);
}

} // namespace pot::baselines
