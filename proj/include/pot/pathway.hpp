// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "pot/domain.hpp"
#include "pot/runtime.hpp"

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace pot::pathway
{

enum class Strategy
{
    PlanningActionVariation, ///< Full profile everywhere; planning executions sampled hot.
    InitialStateAlteration,  ///< Each pathway starts from a random profile subset.
};

enum class Aggregation
{
    MixtureOfN,
    BestOfN,
};

std::string_view to_string(Strategy strategy) noexcept;
std::string_view to_string(Aggregation aggregation) noexcept;
Strategy parse_strategy(std::string_view name);
Aggregation parse_aggregation(std::string_view name);

struct PotConfig
{
    std::size_t max_steps = 8; ///< T
    std::size_t pathways = 16; ///< N
    Strategy strategy = Strategy::PlanningActionVariation;
    double profile_fraction = 0.5; ///< Subset size under InitialStateAlteration.
    SamplingParams base_sampling {.temperature = 0.1};
    SamplingParams planning_sampling {.temperature = 0.9}; ///< Planning executions under PlanningActionVariation.
    Aggregation aggregation = Aggregation::MixtureOfN;
    std::uint64_t seed = 0;

    bool literal_n1 = true;              ///< Run the mixture call even for a single candidate.
    bool first_planning_only = false;    ///< Hot sampling only for the first planning execution.
    bool use_execution_template = false; ///< Append the action_execution instruction after the chosen action.
    int parse_retry_max = 3;             ///< Selection attempts per step before giving up.
    std::size_t parallelism = 1;         ///< Concurrent pathways per example.

    /// The single tuning knob of the diversification strategy: planning temperature
    /// under PlanningActionVariation, profile fraction under InitialStateAlteration.
    [[nodiscard]] double tau() const noexcept;
    void set_tau(double tau);

    /// Throws InvalidConfig when T, N, tau or the sampling parameters are out of range.
    void validate() const;
};

/// Actions the agent may pick after the given prefix: only planning at t = 0, then
/// everything except revising until some earlier step chose answering.
ActionSet allowed_actions(std::span<const PathwayStep> prefix, std::size_t t);

ValidationReport validate_trace(const PathwayTrace& trace, const PotConfig& config);

/// Mutable episode state: the rendered transcript s_t plus the structured steps it was built from.
struct PathwayState
{
    std::string text;
    std::vector<PathwayStep> steps;
    std::uint64_t seed = 0;
    std::string lane;
};

// Transcript layout. With s_0 the rendered init_state template, each step appends
//   selection_prompt(t, allowed) + "Selected action: <name>\n" [+ action_execution] + output + "\n"
// so every state is a strict prefix of the next one.
std::string initial_state(const prompts::TemplateRegistry& prompts, std::string_view question,
                          const std::vector<ProfileEntry>& profile_view);
std::string selection_prompt(const prompts::TemplateRegistry& prompts, std::size_t t, ActionSet allowed);
std::string execution_suffix(const prompts::TemplateRegistry& prompts, Action action, const PotConfig& config);

/// Re-renders s_t for a recorded list of steps.
std::string render_state(const prompts::TemplateRegistry& prompts, std::string_view question,
                         const std::vector<ProfileEntry>& profile_view, std::span<const PathwayStep> steps,
                         const PotConfig& config);

/// Sampling for executing the given action after prefix.
SamplingParams execution_sampling(Action action, std::span<const PathwayStep> prefix, const PotConfig& config,
                                  std::uint64_t seed);

/// One MDP transition: asks the agent for an action (re-asking with the allowed list
/// restated up to parse_retry_max attempts in total), then asks the environment to
/// execute it. Exactly two backend calls when the first reply is valid.
PathwayStep step(const Runtime& rt, const PathwayState& state, const PotConfig& config);

/// Appends a finished step to the state (text and structure).
void advance(PathwayState& state, PathwayStep step, const prompts::TemplateRegistry& prompts,
             const PotConfig& config);

/// Runs one episode until finalizing is chosen or max_steps steps have been taken. In
/// the latter case one extra finalizing execution, without a selection call, supplies
/// the final response.
PathwayTrace run_pathway(const Runtime& rt, const Example& example, const std::vector<ProfileEntry>& profile_view,
                         const PotConfig& config, std::size_t pathway_index);

/// Per-pathway seed and scripted-backend lane.
std::uint64_t pathway_seed(const PotConfig& config, std::string_view question_id, std::size_t pathway_index);
std::string pathway_lane(std::string_view question_id, std::size_t pathway_index);

struct PathwayStats
{
    std::size_t unique_sequences = 0;
    double mean_actions = 0.0;                           ///< Forced finalizations are not counted.
    std::map<std::size_t, std::size_t> length_histogram; ///< steps -> number of traces
};

PathwayStats pathway_stats(std::span<const PathwayTrace> traces);

} // namespace pot::pathway
