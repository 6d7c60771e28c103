// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "pot/domain.hpp"
#include "pot/pathway.hpp"
#include "pot/runtime.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace pot::aggregate
{

struct PathwayFailure
{
    std::size_t pathway_index = 0;
    std::string error;

    bool operator==(const PathwayFailure&) const = default;
};

struct FinalResult
{
    std::string response;
    std::optional<std::size_t> chosen_index; ///< Position in candidates; Best-of-N only.
    CandidateSet candidates;
    PreferenceSummary preferences;
    std::vector<PathwayTrace> traces;    ///< Successful pathways, by index.
    std::vector<PathwayFailure> failures; ///< Pathways that errored and were left out.

    bool operator==(const FinalResult&) const = default;
};

/// Settings shared by the preference, selection and mixture calls.
struct CallOptions
{
    SamplingParams sampling;
    std::string lane;
    int attempts = 3; ///< Total tries for replies that must parse (indices).
};

/// Number of entries in each view: round-half-up of tau * |profile|, clamped to [1, |profile|].
std::size_t subset_size(std::size_t profile_size, double tau);

/// n random subsets of the profile, each of subset_size(|profile|, tau) entries drawn
/// without replacement and kept in dataset order. Deterministic in seed.
std::vector<std::vector<ProfileEntry>> subsample_profile(const std::vector<ProfileEntry>& profile, double tau,
                                                         std::size_t n, std::uint64_t seed);

/// Asks the model which aspects matter to the user, from the full profile.
PreferenceSummary extract_preferences(const Runtime& rt, const std::vector<ProfileEntry>& profile,
                                      const CallOptions& options = {});

/// Sends prompt and parses the first integer of the reply as an index in [0, count).
/// Out-of-range or missing numbers are re-asked; after options.attempts tries the
/// call fails with InvalidSelection.
std::size_t select_index(const Runtime& rt, const std::string& prompt, std::size_t count, std::string_view tag,
                         const CallOptions& options);

/// Picks one candidate verbatim. A single candidate is returned without a model call
/// unless always_ask is set.
FinalResult best_of_n(const Runtime& rt, std::string_view question, const CandidateSet& candidates,
                      const PreferenceSummary& preferences, const CallOptions& options = {}, bool always_ask = false);

/// Synthesizes one response from all candidates. With a single candidate and
/// literal_n1 = false the candidate is returned unchanged.
FinalResult mixture_of_n(const Runtime& rt, std::string_view question, const CandidateSet& candidates,
                         const PreferenceSummary& preferences, const CallOptions& options = {},
                         bool literal_n1 = true);

/// The whole method: N diversified pathways, preference extraction from the full
/// profile, then the configured aggregation. Failed pathways are recorded and
/// skipped; if none succeeds the call fails with AllPathwaysFailed.
FinalResult run_pot(const Runtime& rt, const Example& example, const pathway::PotConfig& config);

} // namespace pot::aggregate
