// SPDX-License-Identifier: Apache-2.0
#include "pot/error.hpp"
#include "pot/pathway.hpp"

#include "support.hpp"

#include <doctest.h>

using namespace pot;
using namespace pot::pathway;
using A = Action;

namespace
{
PathwayStep done(std::size_t index, Action chosen)
{
    return PathwayStep {.index = index, .allowed = {}, .chosen = chosen, .agent_output = "o", .selection_raw = {},
                        .sampling = {}};
}

PotConfig small_config(std::size_t steps = 8)
{
    auto config = PotConfig {};
    config.max_steps = steps;
    config.pathways = 1;
    config.seed = 7;
    return config;
}

PathwayState fresh_state(const Example& example)
{
    return PathwayState {.text = initial_state(testing::registry(), example.question, example.profile),
                         .steps = {},
                         .seed = 11,
                         .lane = "l"};
}
} // namespace

TEST_CASE("allowed actions: planning first, revising only after answering")
{
    CHECK(allowed_actions({}, 0) == ActionSet::of({A::Planning}));

    auto const p = std::vector<PathwayStep> {done(0, A::Planning)};
    auto const afterPlanning = allowed_actions(p, 1);
    CHECK(afterPlanning.size() == 8);
    CHECK_FALSE(afterPlanning.contains(A::Revising));
    CHECK(afterPlanning.contains(A::Finalizing));

    auto const pa = std::vector<PathwayStep> {done(0, A::Planning), done(1, A::Answering)};
    CHECK(allowed_actions(pa, 2) == ActionSet::all());

    // Answering stays remembered after other actions.
    auto const par = std::vector<PathwayStep> {done(0, A::Planning), done(1, A::Answering), done(2, A::Reasoning)};
    CHECK(allowed_actions(par, 3).contains(A::Revising));

    CHECK(testing::error_of([&] { allowed_actions(p, 3); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("one step is a selection call and an execution call")
{
    auto const example = testing::make_example();
    auto backend = llm::ScriptedBackend({"planning", "step 1: look at the budget"});
    auto const rt = Runtime {backend, testing::registry()};
    auto const state = fresh_state(example);
    auto const s = step(rt, state, small_config());
    CHECK(s.chosen == A::Planning);
    CHECK(s.agent_output == "step 1: look at the budget");
    CHECK(s.index == 0);
    CHECK(s.selection_raw == "planning");

    auto const calls = backend.calls();
    REQUIRE(calls.size() == 2);
    CHECK(calls[0].tag == "action_selection");
    CHECK(calls[1].tag == "action_execution");
    // The selection prompt extends the state; the execution prompt extends the selection prompt.
    auto const& selection = calls[0].messages.back().text;
    auto const& execution = calls[1].messages.back().text;
    CHECK(selection.starts_with(state.text));
    CHECK(execution.starts_with(selection));
    CHECK(execution.substr(selection.size()).starts_with("Selected action: planning\n"));
    CHECK(testing::offered_actions(selection) == std::vector<std::string> {"planning"});
}

TEST_CASE("a disallowed reply is re-asked and the second reply is used")
{
    auto example = testing::make_example();
    auto backend = llm::ScriptedBackend({"planning", "plan", "revising", "reasoning", "thinking"});
    auto const rt = Runtime {backend, testing::registry()};
    auto state = fresh_state(example);
    auto const config = small_config();
    advance(state, step(rt, state, config), testing::registry(), config);
    auto const s = step(rt, state, config);
    CHECK(s.chosen == A::Reasoning);
    CHECK(backend.call_count() == 5);
    auto const retry = backend.calls()[3].messages.back().text;
    CHECK(retry.find("(Attempt 2)") != std::string::npos);
    CHECK(retry.find("\"revising\"") != std::string::npos);
}

TEST_CASE("selection gives up after three attempts")
{
    auto const example = testing::make_example();
    auto const config = small_config();
    {
        auto backend = llm::ScriptedBackend({"hmm", "no idea", "still nothing"});
        auto const rt = Runtime {backend, testing::registry()};
        CHECK(testing::error_of([&] { step(rt, fresh_state(example), config); }) == ErrorCode::UnparseableAction);
        CHECK(backend.call_count() == 3);
    }
    {
        auto backend = llm::ScriptedBackend({"finalizing", "answering", "revising"});
        auto const rt = Runtime {backend, testing::registry()};
        CHECK(testing::error_of([&] { step(rt, fresh_state(example), config); }) == ErrorCode::DisallowedAction);
    }
}

TEST_CASE("a pathway that finalizes early stops there")
{
    auto const example = testing::make_example();
    auto backend = llm::ScriptedBackend {};
    backend.set_lane(pathway_lane(example.question_id, 0), {"planning", "the plan", "finalizing", "final answer"});
    auto const rt = Runtime {backend, testing::registry()};
    auto const config = small_config();
    auto const trace = run_pathway(rt, example, example.profile, config, 0);
    CHECK(trace.steps.size() == 2);
    CHECK(trace.halted_by == HaltReason::Finalize);
    CHECK(trace.final_response == "final answer");
    CHECK(trace.seed == pathway_seed(config, example.question_id, 0));
    CHECK(validate_trace(trace, config).ok());
    CHECK(backend.call_count() == 4);
}

TEST_CASE("a pathway that never finalizes takes T steps plus a forced finalize")
{
    auto const example = testing::make_example();
    for (std::size_t t: {1u, 3u, 8u})
    {
        auto backend = llm::ScriptedBackend {};
        auto script = std::vector<std::string> {"planning", "plan"};
        for (std::size_t i = 1; i < t; ++i)
            script.insert(script.end(), {"reasoning", "thought " + std::to_string(i)});
        script.push_back("forced final");
        backend.set_lane(pathway_lane(example.question_id, 0), script);
        auto const rt = Runtime {backend, testing::registry()};
        auto const config = small_config(t);
        auto const trace = run_pathway(rt, example, example.profile, config, 0);
        CHECK(trace.steps.size() == t);
        CHECK(trace.halted_by == HaltReason::BudgetExhausted);
        CHECK(trace.final_response == "forced final");
        CHECK(validate_trace(trace, config).ok());
        CHECK(backend.call_count() == 2 * t + 1);
        auto const last = backend.calls().back();
        CHECK(last.tag == "forced_finalize");
        CHECK(testing::offered_actions(last.messages.back().text) == std::vector<std::string> {"finalizing"});
    }
}

TEST_CASE("every request in a pathway extends the previous state")
{
    auto const example = testing::make_example();
    auto backend = llm::ScriptedBackend {};
    backend.set_responder(testing::random_responder(3));
    auto const rt = Runtime {backend, testing::registry()};
    auto config = small_config();
    config.use_execution_template = true;
    auto const trace = run_pathway(rt, example, example.profile, config, 0);
    auto const calls = backend.calls();

    // Strip retry notes: state text only grows by whole steps.
    auto const rendered = render_state(testing::registry(), example.question, example.profile, trace.steps, config);
    auto previous = initial_state(testing::registry(), example.question, example.profile);
    for (auto const& c: calls)
    {
        auto const& text = c.messages.back().text;
        CHECK(text.starts_with(previous));
        if (c.tag == "action_execution")
        {
            // The executed prompt plus the output is the next state prefix.
            CHECK(rendered.find(text) == 0);
        }
    }
    CHECK(validate_trace(trace, config).ok());
}

TEST_CASE("sampling: planning is hot under planning variation, cold otherwise")
{
    auto config = small_config();
    config.strategy = Strategy::PlanningActionVariation;
    config.set_tau(0.7);
    CHECK(execution_sampling(A::Planning, {}, config, 5).temperature == 0.7);
    CHECK(execution_sampling(A::Planning, {}, config, 5).seed == 5);
    CHECK(execution_sampling(A::Reasoning, {}, config, 5).temperature == 0.1);

    auto const planned = std::vector<PathwayStep> {done(0, A::Planning)};
    CHECK(execution_sampling(A::Planning, planned, config, 5).temperature == 0.7);
    config.first_planning_only = true;
    CHECK(execution_sampling(A::Planning, {}, config, 5).temperature == 0.7);
    CHECK(execution_sampling(A::Planning, planned, config, 5).temperature == 0.1);

    auto isa = small_config();
    isa.strategy = Strategy::InitialStateAlteration;
    isa.set_tau(0.3);
    CHECK(isa.profile_fraction == 0.3);
    CHECK(execution_sampling(A::Planning, {}, isa, 5).temperature == 0.1);
}

TEST_CASE("config validation")
{
    auto config = PotConfig {};
    CHECK_NOTHROW(config.validate());
    config.max_steps = 0;
    CHECK(testing::error_of([&] { config.validate(); }) == ErrorCode::InvalidConfig);
    config = PotConfig {};
    config.pathways = 0;
    CHECK(testing::error_of([&] { config.validate(); }) == ErrorCode::InvalidConfig);
    CHECK(testing::error_of([&] { PotConfig {}.set_tau(1.5); }) == ErrorCode::InvalidConfig);
    config = PotConfig {};
    config.base_sampling.nucleus_p = 0.0;
    CHECK(testing::error_of([&] { config.validate(); }) == ErrorCode::InvalidConfig);
    CHECK(parse_strategy("ISA") == Strategy::InitialStateAlteration);
    CHECK(parse_aggregation("best-of-n") == Aggregation::BestOfN);
    CHECK(testing::error_of([] { parse_strategy("random"); }) == ErrorCode::InvalidConfig);
}

TEST_CASE("pathways are deterministic in the seed")
{
    auto const example = testing::make_example();
    auto const run = [&](std::uint64_t policySeed, std::uint64_t configSeed) {
        auto backend = llm::ScriptedBackend {};
        backend.set_responder(testing::random_responder(policySeed));
        auto const rt = Runtime {backend, testing::registry()};
        auto config = small_config();
        config.seed = configSeed;
        return run_pathway(rt, example, example.profile, config, 2);
    };
    CHECK(run(1, 1) == run(1, 1));
    CHECK(run(1, 1).seed != run(1, 2).seed);
    CHECK(pathway_seed(small_config(), "q", 0) != pathway_seed(small_config(), "q", 1));
    CHECK(pathway_lane("q", 3) == "q/pathway/3");
}

TEST_CASE("fuzzed pathways always satisfy the trace rules")
{
    auto const example = testing::make_example();
    for (std::uint64_t seed = 0; seed < 200; ++seed)
    {
        auto backend = llm::ScriptedBackend {};
        backend.set_responder(testing::random_responder(seed));
        auto const rt = Runtime {backend, testing::registry()};
        auto const config = small_config(1 + seed % 8);
        auto const trace = run_pathway(rt, example, example.profile, config, 0);
        auto const report = validate_trace(trace, config);
        CHECK_MESSAGE(report.ok(), "seed " << seed);
        // Two calls per step plus selection retries plus a forced finalize.
        CHECK(backend.call_count() >= 2 * trace.steps.size());
    }
}

TEST_CASE("pathway statistics")
{
    auto const make = [](std::vector<Action> actions) {
        auto t = PathwayTrace {};
        for (std::size_t i = 0; i < actions.size(); ++i)
            t.steps.push_back(done(i, actions[i]));
        return t;
    };
    auto const traces = std::vector<PathwayTrace> {
        make({A::Planning, A::Finalizing}),
        make({A::Planning, A::Finalizing}),
        make({A::Planning, A::Answering, A::Finalizing}),
        make({A::Planning, A::Reasoning, A::Answering, A::Revising}),
    };
    auto const stats = pathway_stats(traces);
    CHECK(stats.unique_sequences == 3);
    CHECK(stats.mean_actions == doctest::Approx(11.0 / 4.0));
    CHECK(stats.length_histogram == std::map<std::size_t, std::size_t> {{2, 2}, {3, 1}, {4, 1}});
    CHECK(testing::error_of([] { pathway_stats({}); }) == ErrorCode::InvalidArgument);
}
