// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "pot/aggregate.hpp"
#include "pot/domain.hpp"
#include "pot/runtime.hpp"

#include <cstdint>
#include <string>

namespace pot::baselines
{

/// Two-stage tree: K plans, pick one, K responses following it, pick one.
struct TotConfig
{
    std::size_t depth = 2;  ///< B; only 2 is supported.
    std::size_t width = 32; ///< K
    SamplingParams sampling {.temperature = 0.9};

    void validate() const;
};

struct BaselineOptions
{
    SamplingParams sampling {.temperature = 0.1};        ///< Single-inference calls and judges.
    SamplingParams sample_sampling {.temperature = 0.9}; ///< Best-of-K samples.
    std::uint64_t seed = 0;
    int attempts = 3;             ///< Tries for index replies.
    std::size_t parallelism = 1;  ///< Concurrent samples within a stage.
    bool literal_k1 = true;       ///< Ask the selector even when only one candidate exists.
};

/// The bare question, no profile.
std::string run_no_personalization(const Runtime& rt, const Example& example, const BaselineOptions& options = {});

/// One completion with the profile in the prompt. With cot the model reasons first and
/// the text after its final "Response:" marker is returned.
std::string run_in_context(const Runtime& rt, const Example& example, bool cot, const BaselineOptions& options = {});

/// k in-context samples at the sampling temperature, then preference-aware
/// best-of-n selection. Failed samples are skipped; AllSamplesFailed if none is left.
aggregate::FinalResult run_best_of_k(const Runtime& rt, const Example& example, std::size_t k, bool cot,
                                     const BaselineOptions& options = {});

aggregate::FinalResult run_tot(const Runtime& rt, const Example& example, const TotConfig& tot,
                               const BaselineOptions& options = {});

/// Text after the last "Response:" marker, or the whole reply when there is none.
std::string extract_cot_answer(std::string_view reply);

} // namespace pot::baselines
