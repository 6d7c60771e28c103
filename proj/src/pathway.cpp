// SPDX-License-Identifier: Apache-2.0
#include "pot/pathway.hpp"

#include "pot/digest.hpp"
#include "pot/error.hpp"
#include "text.hpp"

#include <algorithm>
#include <set>

namespace pot::pathway
{

std::string_view to_string(Strategy strategy) noexcept
{
    return strategy == Strategy::PlanningActionVariation ? "planning-action-variation" : "initial-state-alteration";
}

std::string_view to_string(Aggregation aggregation) noexcept
{
    return aggregation == Aggregation::MixtureOfN ? "mixture-of-n" : "best-of-n";
}

Strategy parse_strategy(std::string_view name)
{
    auto const key = text::to_lower(name);
    if (key == "planning-action-variation" || key == "pav" || key == "planning")
        return Strategy::PlanningActionVariation;
    if (key == "initial-state-alteration" || key == "isa" || key == "initial-state")
        return Strategy::InitialStateAlteration;
    throw Error(ErrorCode::InvalidConfig, "unknown strategy '" + std::string(name) + "'");
}

Aggregation parse_aggregation(std::string_view name)
{
    auto const key = text::to_lower(name);
    if (key == "mixture-of-n" || key == "mixture" || key == "mon")
        return Aggregation::MixtureOfN;
    if (key == "best-of-n" || key == "best" || key == "bon")
        return Aggregation::BestOfN;
    throw Error(ErrorCode::InvalidConfig, "unknown aggregation '" + std::string(name) + "'");
}

double PotConfig::tau() const noexcept
{
    return strategy == Strategy::PlanningActionVariation ? planning_sampling.temperature : profile_fraction;
}

void PotConfig::set_tau(double tau)
{
    if (!(tau >= 0.0 && tau <= 1.0))
        throw Error(ErrorCode::InvalidConfig, "tau must lie in [0, 1], got " + std::to_string(tau));
    if (strategy == Strategy::PlanningActionVariation)
        planning_sampling.temperature = tau;
    else
        profile_fraction = tau;
}

void PotConfig::validate() const
{
    auto const fail = [](const std::string& what) { throw Error(ErrorCode::InvalidConfig, what); };
    if (max_steps < 1)
        fail("T (max_steps) must be at least 1");
    if (pathways < 1)
        fail("N (pathways) must be at least 1");
    if (!(profile_fraction >= 0.0 && profile_fraction <= 1.0))
        fail("profile fraction must lie in [0, 1]");
    for (auto const* s: {&base_sampling, &planning_sampling})
    {
        if (!(s->temperature >= 0.0 && s->temperature <= 1.0))
            fail("temperature must lie in [0, 1]");
        if (!(s->nucleus_p > 0.0 && s->nucleus_p <= 1.0))
            fail("nucleus_p must lie in (0, 1]");
        if (s->max_output_tokens < 1)
            fail("max_output_tokens must be positive");
    }
    if (parse_retry_max < 1)
        fail("parse_retry_max must be at least 1");
    if (parallelism < 1)
        fail("parallelism must be at least 1");
}

ActionSet allowed_actions(std::span<const PathwayStep> prefix, std::size_t t)
{
    if (t != prefix.size())
        throw Error(ErrorCode::InvalidArgument, "step index does not match prefix length");
    if (t == 0)
        return ActionSet::of({Action::Planning});
    auto allowed = ActionSet::all();
    auto const answered = std::ranges::any_of(prefix, [](auto const& s) { return s.chosen == Action::Answering; });
    if (!answered)
        allowed.erase(Action::Revising);
    return allowed;
}

ValidationReport validate_trace(const PathwayTrace& trace, const PotConfig& config)
{
    return pot::validate_trace(trace, config.max_steps);
}

std::string initial_state(const prompts::TemplateRegistry& prompts, std::string_view question,
                          const std::vector<ProfileEntry>& profile_view)
{
    return prompts.render("init_state", {
                                            {"question", std::string(question)},
                                            {"profile", prompts::render_profile(profile_view)},
                                        });
}

std::string selection_prompt(const prompts::TemplateRegistry& prompts, std::size_t t, ActionSet allowed)
{
    return prompts.render("action_selection", {
                                                  {"step_number", std::to_string(t + 1)},
                                                  {"allowed_actions", prompts::render_action_list(allowed)},
                                              });
}

std::string execution_suffix(const prompts::TemplateRegistry& prompts, Action action, const PotConfig& config)
{
    auto out = "Selected action: " + std::string(action_name(action)) + "\n";
    if (config.use_execution_template)
        out += prompts.render("action_execution", {
                                                      {"action", std::string(action_name(action))},
                                                      {"action_definition", std::string(action_definition(action))},
                                                  });
    return out;
}

namespace
{
    void append_step_text(std::string& state, const prompts::TemplateRegistry& prompts, const PathwayStep& step,
                          const PotConfig& config)
    {
        state += selection_prompt(prompts, step.index, step.allowed);
        state += execution_suffix(prompts, step.chosen, config);
        state += step.agent_output;
        state += '\n';
    }

    std::string reask_note(std::string_view reply, ActionSet allowed, int attempt)
    {
        auto names = std::string {};
        for (auto action: allowed.to_vector())
        {
            if (!names.empty())
                names += ", ";
            names += action_name(action);
        }
        return "\n(Attempt " + std::to_string(attempt + 1) + ") The reply \"" + std::string(text::trim(reply))
               + "\" is not one of the available actions. Reply with exactly one of: " + names + "\n";
    }
} // namespace

std::string render_state(const prompts::TemplateRegistry& prompts, std::string_view question,
                         const std::vector<ProfileEntry>& profile_view, std::span<const PathwayStep> steps,
                         const PotConfig& config)
{
    auto state = initial_state(prompts, question, profile_view);
    for (auto const& s: steps)
        append_step_text(state, prompts, s, config);
    return state;
}

SamplingParams execution_sampling(Action action, std::span<const PathwayStep> prefix, const PotConfig& config,
                                  std::uint64_t seed)
{
    auto hot = action == Action::Planning && config.strategy == Strategy::PlanningActionVariation;
    if (hot && config.first_planning_only)
        hot = std::ranges::none_of(prefix, [](auto const& s) { return s.chosen == Action::Planning; });
    auto sampling = hot ? config.planning_sampling : config.base_sampling;
    sampling.seed = seed;
    return sampling;
}

PathwayStep step(const Runtime& rt, const PathwayState& state, const PotConfig& config)
{
    auto const t = state.steps.size();
    if (t >= config.max_steps)
        throw Error(ErrorCode::InvalidArgument, "pathway already used its step budget");

    auto const allowed = allowed_actions(state.steps, t);
    auto const prompt = state.text + selection_prompt(rt.prompts, t, allowed);
    auto selectSampling = config.base_sampling;
    selectSampling.seed = state.seed;

    auto chosen = std::optional<Action> {};
    auto raw = std::string {};
    auto lastWasDisallowed = false;
    for (auto attempt = 0; attempt < config.parse_retry_max && !chosen; ++attempt)
    {
        auto request = prompt;
        if (attempt > 0)
            request += reask_note(raw, allowed, attempt);
        raw = rt.backend.complete(llm::CompletionRequest::user(request, selectSampling, "action_selection", state.lane))
                  .text;
        auto const parsed = parse_action(raw);
        lastWasDisallowed = parsed.has_value() && !allowed.contains(*parsed);
        if (parsed && !lastWasDisallowed)
            chosen = parsed;
    }
    if (!chosen)
    {
        auto const what = "step " + std::to_string(t) + ": last reply \"" + std::string(text::trim(raw)) + "\" after "
                          + std::to_string(config.parse_retry_max) + " attempts";
        throw Error(lastWasDisallowed ? ErrorCode::DisallowedAction : ErrorCode::UnparseableAction, what);
    }

    auto const sampling = execution_sampling(*chosen, state.steps, config, state.seed);
    auto const execution = prompt + execution_suffix(rt.prompts, *chosen, config);
    auto output = rt.backend.complete(llm::CompletionRequest::user(execution, sampling, "action_execution", state.lane))
                      .text;

    return PathwayStep {
        .index = t,
        .allowed = allowed,
        .chosen = *chosen,
        .agent_output = std::move(output),
        .selection_raw = std::move(raw),
        .sampling = sampling,
    };
}

void advance(PathwayState& state, PathwayStep step, const prompts::TemplateRegistry& prompts, const PotConfig& config)
{
    append_step_text(state.text, prompts, step, config);
    state.steps.push_back(std::move(step));
}

std::uint64_t pathway_seed(const PotConfig& config, std::string_view question_id, std::size_t pathway_index)
{
    return derive_seed(config.seed, {question_id, "pathway", std::to_string(pathway_index)});
}

std::string pathway_lane(std::string_view question_id, std::size_t pathway_index)
{
    return std::string(question_id) + "/pathway/" + std::to_string(pathway_index);
}

PathwayTrace run_pathway(const Runtime& rt, const Example& example, const std::vector<ProfileEntry>& profile_view,
                         const PotConfig& config, std::size_t pathway_index)
{
    auto state = PathwayState {
        .text = initial_state(rt.prompts, example.question, profile_view),
        .steps = {},
        .seed = pathway_seed(config, example.question_id, pathway_index),
        .lane = pathway_lane(example.question_id, pathway_index),
    };

    auto trace = PathwayTrace {
        .pathway_index = pathway_index,
        .steps = {},
        .final_response = {},
        .profile_view = profile_view,
        .seed = state.seed,
        .halted_by = HaltReason::BudgetExhausted,
    };

    while (state.steps.size() < config.max_steps)
    {
        auto next = step(rt, state, config);
        auto const finalizing = next.chosen == Action::Finalizing;
        if (finalizing)
            trace.final_response = next.agent_output;
        advance(state, std::move(next), rt.prompts, config);
        if (finalizing)
        {
            trace.halted_by = HaltReason::Finalize;
            break;
        }
    }

    if (trace.halted_by == HaltReason::BudgetExhausted)
    {
        auto const t = state.steps.size();
        auto const forced = state.text + selection_prompt(rt.prompts, t, ActionSet::of({Action::Finalizing}))
                            + execution_suffix(rt.prompts, Action::Finalizing, config);
        auto const sampling = execution_sampling(Action::Finalizing, state.steps, config, state.seed);
        trace.final_response =
            rt.backend.complete(llm::CompletionRequest::user(forced, sampling, "forced_finalize", state.lane)).text;
    }

    trace.steps = std::move(state.steps);
    return trace;
}

PathwayStats pathway_stats(std::span<const PathwayTrace> traces)
{
    if (traces.empty())
        throw Error(ErrorCode::InvalidArgument, "pathway_stats needs at least one trace");

    auto stats = PathwayStats {};
    auto sequences = std::set<std::string> {};
    auto totalSteps = std::size_t {0};
    for (auto const& trace: traces)
    {
        auto key = std::string {};
        for (auto const& s: trace.steps)
        {
            key += action_name(s.chosen);
            key += ';';
        }
        sequences.insert(std::move(key));
        totalSteps += trace.steps.size();
        ++stats.length_histogram[trace.steps.size()];
    }
    stats.unique_sequences = sequences.size();
    stats.mean_actions = static_cast<double>(totalSteps) / static_cast<double>(traces.size());
    return stats;
}

} // namespace pot::pathway
