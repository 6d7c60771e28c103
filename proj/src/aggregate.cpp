// SPDX-License-Identifier: Apache-2.0
#include "pot/aggregate.hpp"

#include "pot/digest.hpp"
#include "pot/error.hpp"
#include "parallel.hpp"
#include "text.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numeric>
#include <random>

namespace pot::aggregate
{

namespace
{
    // Unbiased draw from [0, bound). The engine's output sequence is fixed by the
    // standard, unlike std::uniform_int_distribution, so views reproduce across
    // standard libraries.
    std::uint64_t draw_below(std::mt19937_64& rng, std::uint64_t bound)
    {
        auto const threshold = (0 - bound) % bound;
        while (true)
        {
            auto const r = rng();
            if (r >= threshold)
                return r % bound;
        }
    }

    std::vector<std::string> candidate_texts(const CandidateSet& candidates)
    {
        auto texts = std::vector<std::string> {};
        texts.reserve(candidates.size());
        for (auto const& c: candidates.candidates)
            texts.push_back(c.text);
        return texts;
    }

    CallOptions with_lane(const pathway::PotConfig& config, const Example& example, std::string_view purpose)
    {
        auto options = CallOptions {};
        options.sampling = config.base_sampling;
        options.sampling.seed = derive_seed(config.seed, {example.question_id, purpose});
        options.lane = example.question_id + "/" + std::string(purpose);
        options.attempts = config.parse_retry_max;
        return options;
    }
} // namespace

std::size_t subset_size(std::size_t profile_size, double tau)
{
    if (profile_size == 0)
        throw Error(ErrorCode::EmptyProfile, "cannot size a subset of an empty profile");
    if (!(tau >= 0.0 && tau <= 1.0))
        throw Error(ErrorCode::InvalidArgument, "tau must lie in [0, 1]");
    // The epsilon keeps exact halves such as 0.3 * 5 from rounding down on binary doubles.
    auto const raw = std::floor(tau * static_cast<double>(profile_size) + 0.5 + 1e-9);
    return std::clamp<std::size_t>(static_cast<std::size_t>(raw), 1, profile_size);
}

std::vector<std::vector<ProfileEntry>> subsample_profile(const std::vector<ProfileEntry>& profile, double tau,
                                                         std::size_t n, std::uint64_t seed)
{
    if (profile.empty())
        throw Error(ErrorCode::EmptyProfile, "cannot subsample an empty profile");
    auto const size = subset_size(profile.size(), tau);

    auto rng = std::mt19937_64(seed);
    auto views = std::vector<std::vector<ProfileEntry>> {};
    views.reserve(n);
    auto indices = std::vector<std::size_t>(profile.size());
    for (std::size_t v = 0; v < n; ++v)
    {
        std::iota(indices.begin(), indices.end(), std::size_t {0});
        // Partial Fisher-Yates: the first `size` slots become a uniform sample.
        for (std::size_t i = 0; i < size; ++i)
        {
            auto const j = i + draw_below(rng, indices.size() - i);
            std::swap(indices[i], indices[j]);
        }
        std::sort(indices.begin(), indices.begin() + static_cast<std::ptrdiff_t>(size));

        auto& view = views.emplace_back();
        view.reserve(size);
        for (std::size_t i = 0; i < size; ++i)
            view.push_back(profile[indices[i]]);
    }
    return views;
}

PreferenceSummary extract_preferences(const Runtime& rt, const std::vector<ProfileEntry>& profile,
                                      const CallOptions& options)
{
    if (profile.empty())
        throw Error(ErrorCode::EmptyProfile, "preference extraction needs a non-empty profile");
    auto const prompt = rt.prompts.render("preference_extraction", {{"profile", prompts::render_profile(profile)}});
    auto reply = rt.backend.complete(llm::CompletionRequest::user(prompt, options.sampling, "preference_extraction",
                                                                  options.lane));
    return PreferenceSummary {.text = std::move(reply.text), .source_profile_size = profile.size()};
}

std::size_t select_index(const Runtime& rt, const std::string& prompt, std::size_t count, std::string_view tag,
                         const CallOptions& options)
{
    if (count == 0)
        throw Error(ErrorCode::EmptyCandidates, "nothing to select from");
    auto reply = std::string {};
    for (auto attempt = 0; attempt < options.attempts; ++attempt)
    {
        auto request = prompt;
        if (attempt > 0)
            request += "\n(Attempt " + std::to_string(attempt + 1) + ") The reply \"" + std::string(text::trim(reply))
                       + "\" is not a valid choice. Reply with a single integer from 0 to "
                       + std::to_string(count - 1) + ".\n";
        reply = rt.backend.complete(llm::CompletionRequest::user(request, options.sampling, std::string(tag),
                                                                 options.lane))
                    .text;
        auto const index = text::first_integer(reply);
        if (index && *index >= 0 && static_cast<std::size_t>(*index) < count)
            return static_cast<std::size_t>(*index);
    }
    throw Error(ErrorCode::InvalidSelection, "no valid index in [0, " + std::to_string(count - 1) + "] after "
                                                 + std::to_string(options.attempts) + " attempts; last reply \""
                                                 + std::string(text::trim(reply)) + "\"");
}

FinalResult best_of_n(const Runtime& rt, std::string_view question, const CandidateSet& candidates,
                      const PreferenceSummary& preferences, const CallOptions& options, bool always_ask)
{
    if (candidates.empty())
        throw Error(ErrorCode::EmptyCandidates, "best-of-n needs at least one candidate");

    auto chosen = std::size_t {0};
    if (candidates.size() > 1 || always_ask)
    {
        auto const prompt = rt.prompts.render("best_of_n", {
                                                               {"question", std::string(question)},
                                                               {"preferences", preferences.text},
                                                               {"candidates", prompts::render_numbered(candidate_texts(candidates))},
                                                               {"last_index", std::to_string(candidates.size() - 1)},
                                                           });
        chosen = select_index(rt, prompt, candidates.size(), "best_of_n", options);
    }
    return FinalResult {
        .response = candidates[chosen].text,
        .chosen_index = chosen,
        .candidates = candidates,
        .preferences = preferences,
        .traces = {},
        .failures = {},
    };
}

FinalResult mixture_of_n(const Runtime& rt, std::string_view question, const CandidateSet& candidates,
                         const PreferenceSummary& preferences, const CallOptions& options, bool literal_n1)
{
    if (candidates.empty())
        throw Error(ErrorCode::EmptyCandidates, "mixture-of-n needs at least one candidate");

    auto response = std::string {};
    if (candidates.size() == 1 && !literal_n1)
    {
        response = candidates[0].text;
    }
    else
    {
        auto const prompt = rt.prompts.render("mixture_of_n", {
                                                                  {"question", std::string(question)},
                                                                  {"preferences", preferences.text},
                                                                  {"candidates", prompts::render_numbered(candidate_texts(candidates))},
                                                              });
        response = rt.backend.complete(llm::CompletionRequest::user(prompt, options.sampling, "mixture_of_n",
                                                                    options.lane))
                       .text;
    }
    return FinalResult {
        .response = std::move(response),
        .chosen_index = std::nullopt,
        .candidates = candidates,
        .preferences = preferences,
        .traces = {},
        .failures = {},
    };
}

FinalResult run_pot(const Runtime& rt, const Example& example, const pathway::PotConfig& config)
{
    config.validate();
    if (example.question.empty())
        throw Error(ErrorCode::InvalidArgument, "example '" + example.question_id + "' has an empty question");
    if (example.profile.empty())
        throw Error(ErrorCode::EmptyProfile, "example '" + example.question_id + "' has an empty profile");

    auto const n = config.pathways;
    auto views = config.strategy == pathway::Strategy::InitialStateAlteration
                     ? subsample_profile(example.profile, config.profile_fraction, n,
                                         derive_seed(config.seed, {example.question_id, "subsample"}))
                     : std::vector<std::vector<ProfileEntry>>(n, example.profile);

    // Slots are filled by index, so the outcome does not depend on which pathway finishes first.
    auto traces = std::vector<std::optional<PathwayTrace>>(n);
    auto errors = std::vector<std::string>(n);
    detail::parallel_for(n, config.parallelism, [&](std::size_t i) {
        try
        {
            traces[i] = pathway::run_pathway(rt, example, views[i], config, i);
        }
        catch (const std::exception& e)
        {
            errors[i] = e.what();
        }
    });

    auto result = FinalResult {};
    auto candidates = std::vector<Candidate> {};
    for (std::size_t i = 0; i < n; ++i)
    {
        if (traces[i])
        {
            candidates.push_back(Candidate {.pathway_index = i, .text = traces[i]->final_response});
            result.traces.push_back(std::move(*traces[i]));
        }
        else
        {
            result.failures.push_back(PathwayFailure {.pathway_index = i, .error = errors[i]});
        }
    }
    if (candidates.empty())
        throw Error(ErrorCode::AllPathwaysFailed,
                    "all " + std::to_string(n) + " pathways failed for '" + example.question_id + "'; first error: "
                        + errors.front());

    auto const candidateSet = CandidateSet::from_unordered(std::move(candidates));
    auto const preferences = extract_preferences(rt, example.profile, with_lane(config, example, "preferences"));
    auto const options = with_lane(config, example, "aggregate");

    auto aggregated = config.aggregation == pathway::Aggregation::BestOfN
                          ? best_of_n(rt, example.question, candidateSet, preferences, options)
                          : mixture_of_n(rt, example.question, candidateSet, preferences, options, config.literal_n1);
    aggregated.traces = std::move(result.traces);
    aggregated.failures = std::move(result.failures);
    return aggregated;
}

} // namespace pot::aggregate
