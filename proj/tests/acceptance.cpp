// SPDX-License-Identifier: Apache-2.0
// Acceptance suite: one PASS/FAIL/SKIP line per criterion, nonzero exit on any FAIL.
#include "pot/aggregate.hpp"
#include "pot/baselines.hpp"
#include "pot/digest.hpp"
#include "pot/eval.hpp"
#include "pot/harness.hpp"
#include "pot/pathway.hpp"

#include "support.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <iostream>
#include <sstream>

using namespace pot;

namespace
{
enum class Outcome
{
    Pass,
    Fail,
    Skip,
    Warn, ///< Failed, but the criterion does not gate.
};

struct Verdict
{
    Outcome outcome = Outcome::Pass;
    std::string detail;
};

Verdict pass(std::string detail = {})
{
    return {Outcome::Pass, std::move(detail)};
}

Verdict fail(std::string detail)
{
    return {Outcome::Fail, std::move(detail)};
}

// Pathway lanes follow the random policy; index prompts get a digit derived from the
// prompt so selection is deterministic without being constant.
llm::ScriptedBackend::Responder fuzz_responder(std::uint64_t seed)
{
    auto policy = testing::random_responder(seed);
    return [policy](const llm::CompletionRequest& request) {
        if (request.tag == "best_of_n")
            return std::to_string(derive_seed(0, {request.messages.back().text}) % 4);
        return policy(request);
    };
}

// 1. Random agent policies never produce a trace that breaks the action rules.
Verdict fuzz_traces()
{
    auto const start = std::chrono::steady_clock::now();
    auto const example = testing::make_example("fuzz", 10);
    auto config = pathway::PotConfig {};
    config.max_steps = 8;
    auto violations = std::size_t {0};
    auto failures = std::size_t {0};
    auto firstViolation = std::string {};
    auto totalSteps = std::size_t {0};
    auto forced = std::size_t {0};
    for (std::uint64_t seed = 0; seed < 1000; ++seed)
    {
        auto backend = llm::ScriptedBackend {};
        backend.set_responder(testing::random_responder(seed));
        auto const rt = Runtime {backend, testing::registry()};
        config.seed = seed;
        try
        {
            auto const trace = pathway::run_pathway(rt, example, example.profile, config, seed % 16);
            auto const report = pathway::validate_trace(trace, config);
            totalSteps += trace.steps.size();
            forced += trace.halted_by == HaltReason::BudgetExhausted ? 1 : 0;
            if (!report.ok())
            {
                ++violations;
                if (firstViolation.empty())
                    firstViolation = "seed " + std::to_string(seed) + ": " + report.violations.front();
            }
        }
        catch (const std::exception& e)
        {
            ++failures;
            if (firstViolation.empty())
                firstViolation = "seed " + std::to_string(seed) + ": " + e.what();
        }
    }
    auto const seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    auto detail = std::ostringstream {};
    detail << "1000 policies, " << violations << " violations, " << failures << " errors, mean "
           << static_cast<double>(totalSteps) / 1000.0 << " steps, " << forced << " hit T, " << seconds << " s";
    if (violations > 0 || failures > 0)
        return fail(detail.str() + "; " + firstViolation);
    if (seconds >= 60.0)
        return fail(detail.str() + "; over the 60 s budget");
    return pass(detail.str());
}

// 2. Same seed, same outputs: across repeated runs and across thread interleavings.
Verdict determinism()
{
    auto const example = testing::make_example("det", 12);
    auto combos = 0;
    for (auto strategy: {pathway::Strategy::PlanningActionVariation, pathway::Strategy::InitialStateAlteration})
        for (auto aggregation: {pathway::Aggregation::MixtureOfN, pathway::Aggregation::BestOfN})
        {
            auto const run = [&](std::size_t parallelism, std::chrono::microseconds jitter) {
                auto backend = llm::ScriptedBackend {};
                backend.set_responder(fuzz_responder(2024));
                backend.set_jitter(jitter);
                auto const rt = Runtime {backend, testing::registry()};
                auto config = pathway::PotConfig {};
                config.pathways = 4;
                config.max_steps = 8;
                config.strategy = strategy;
                config.aggregation = aggregation;
                config.seed = 42;
                config.parallelism = parallelism;
                return aggregate::run_pot(rt, example, config);
            };
            auto const reference = run(1, std::chrono::microseconds(0));
            for (auto i = 0; i < 2; ++i)
                if (run(1, std::chrono::microseconds(0)) != reference)
                    return fail(std::string("repeat run differs for ") + std::string(to_string(strategy)) + "/"
                                + std::string(to_string(aggregation)));
            for (auto [parallelism, jitter]: {std::pair {4, 300}, std::pair {2, 150}, std::pair {4, 50}})
                if (run(parallelism, std::chrono::microseconds(jitter)) != reference)
                    return fail(std::string("interleaved run differs for ") + std::string(to_string(strategy)) + "/"
                                + std::string(to_string(aggregation)));
            ++combos;
        }
    return pass(std::to_string(combos) + " configurations, 3 serial + 3 interleaved runs each");
}

struct Row
{
    double ae, lpd, sc, macro;
};

constexpr std::array<Row, 8> Published = {{
    {0.1741, 0.2863, 0.2996, 0.2533},
    {0.1722, 0.3022, 0.3482, 0.2742},
    {0.2119, 0.3862, 0.4230, 0.3403},
    {0.2499, 0.3966, 0.4490, 0.3651},
    {0.2248, 0.3753, 0.4303, 0.3434},
    {0.2607, 0.4380, 0.4789, 0.3925},
    {0.2054, 0.4178, 0.4546, 0.3592},
    {0.2999, 0.4960, 0.5362, 0.4440},
}};

// 3. Per-category means fed through the macro average reproduce the table.
Verdict table_macro()
{
    auto worst = 0.0;
    for (std::size_t i = 0; i < Published.size(); ++i)
    {
        auto const& row = Published[i];
        auto const reports = std::vector<eval::ScoreReport> {
            {"a", "ArtsEntertainment", {}, row.ae},
            {"b", "LifestylePersonalDevelopment", {}, row.lpd},
            {"c", "SocietyCulture", {}, row.sc},
        };
        auto const macro = eval::macro_average(eval::category_means(reports));
        worst = std::max(worst, std::abs(macro - row.macro));
        if (std::abs(macro - row.macro) > 1e-4)
            return fail("row " + std::to_string(i + 1) + " macro " + std::to_string(macro));
    }
    return pass("8 rows, largest deviation " + std::to_string(worst));
}

// 4. The headline relative improvements.
Verdict relative_improvements()
{
    auto const overall = eval::relative_improvement(Published[7].macro, Published[5].macro);
    auto const single = eval::relative_improvement(Published[3].macro, Published[2].macro);
    auto detail = std::ostringstream {};
    detail << "row8 vs row6 " << overall * 100 << "%, row4 vs row3 " << single * 100 << "%";
    if (std::abs(overall * 100 - 13.1) > 0.1)
        return fail(detail.str());
    if (!(single * 100 >= 7.2 && single * 100 < 7.3))
        return fail(detail.str());
    return pass(detail.str());
}

// 5. Rubric scores: bounded, monotone, and the worked example.
Verdict rubric_scores()
{
    if (std::abs(eval::normalized_score(std::vector {2, 1, 0}) - 0.5) > 1e-12)
        return fail("[2,1,0] does not score 0.5");
    auto rng = std::mt19937_64(99);
    for (auto round = 0; round < 10000; ++round)
    {
        auto scores = std::vector<int>(1 + rng() % 10);
        for (auto& s: scores)
            s = static_cast<int>(rng() % 3);
        auto const base = eval::normalized_score(scores);
        if (!(base >= 0.0 && base <= 1.0))
            return fail("score out of range in round " + std::to_string(round));
        for (std::size_t i = 0; i < scores.size(); ++i)
            if (scores[i] < 2)
            {
                auto raised = scores;
                ++raised[i];
                if (!(eval::normalized_score(raised) > base))
                    return fail("not monotone in round " + std::to_string(round));
            }
    }
    return pass("10000 random rubrics");
}

// 6. Profile subsampling over the tau grid and profile sizes 1..20.
Verdict subsampling()
{
    auto checked = 0;
    for (std::size_t n = 1; n <= 20; ++n)
        for (std::size_t k = 1; k <= 10; ++k)
        {
            auto const profile = testing::make_profile(n);
            auto const tau = static_cast<double>(k) / 10.0;
            auto const expected = std::clamp<std::size_t>((k * n + 5) / 10, 1, n);
            auto const seed = 1000 * n + k;
            auto const views = aggregate::subsample_profile(profile, tau, 5, seed);
            if (aggregate::subsample_profile(profile, tau, 5, seed) != views)
                return fail("not deterministic at n=" + std::to_string(n) + " tau=" + std::to_string(tau));
            for (auto const& view: views)
            {
                if (view.size() != expected)
                    return fail("size " + std::to_string(view.size()) + " at n=" + std::to_string(n) + " k="
                                + std::to_string(k) + ", expected " + std::to_string(expected));
                auto last = std::ptrdiff_t {-1};
                for (auto const& entry: view)
                {
                    auto const pos = std::ranges::find(profile, entry) - profile.begin();
                    if (pos <= last || pos >= static_cast<std::ptrdiff_t>(n))
                        return fail("order not preserved at n=" + std::to_string(n));
                    last = pos;
                }
                if (k == 10 && view != profile)
                    return fail("tau = 1 does not keep the full profile");
                ++checked;
            }
        }
    return pass(std::to_string(checked) + " views checked");
}

// 7. Model-call budgets of the baselines and of one pathway step.
Verdict call_counts()
{
    auto const example = testing::make_example("calls", 10);
    auto const reply = [](const llm::CompletionRequest& r) {
        return r.tag == "best_of_n" || r.tag == "tot_select_plan" ? std::string("0") : "text for " + r.lane;
    };
    auto detail = std::string {};
    for (std::size_t k: {1u, 2u, 4u, 8u})
    {
        auto tot = llm::ScriptedBackend {};
        tot.set_responder(reply);
        auto const rtTot = Runtime {tot, testing::registry()};
        baselines::run_tot(rtTot, example, baselines::TotConfig {.depth = 2, .width = k, .sampling = {}});
        if (tot.call_count() != 2 * k + 3)
            return fail("ToT K=" + std::to_string(k) + " made " + std::to_string(tot.call_count()) + " calls");

        auto bok = llm::ScriptedBackend {};
        bok.set_responder(reply);
        auto const rtBok = Runtime {bok, testing::registry()};
        baselines::run_best_of_k(rtBok, example, k, false);
        if (bok.call_count() != k + 2)
            return fail("Best-of-K K=" + std::to_string(k) + " made " + std::to_string(bok.call_count()) + " calls");
        detail += "K=" + std::to_string(k) + ":" + std::to_string(tot.call_count()) + "/"
                  + std::to_string(bok.call_count()) + " ";
    }

    auto step = llm::ScriptedBackend({"planning", "the plan"});
    auto const rt = Runtime {step, testing::registry()};
    auto const state = pathway::PathwayState {
        .text = pathway::initial_state(testing::registry(), example.question, example.profile),
        .steps = {},
        .seed = 1,
        .lane = {},
    };
    pathway::step(rt, state, pathway::PotConfig {});
    if (step.call_count() != 2)
        return fail("a PoT step made " + std::to_string(step.call_count()) + " calls");
    return pass(detail + "(ToT/Best-of-K), PoT step: 2");
}

// 8. Replaying a run from its cache is offline and byte-identical.
Verdict replay()
{
    auto const dir = testing::temp_dir("acceptance-replay");
    testing::write_dataset(dir / "data.jsonl", 4);
    auto config = harness::ExperimentConfig {};
    config.dataset_path = (dir / "data.jsonl").string();
    config.output_dir = (dir / "live").string();
    config.cache_path = (dir / "cache.jsonl").string();
    config.seed = 11;
    config.pot.pathways = 3;
    config.pot.max_steps = 4;
    config.pot.strategy = pathway::Strategy::InitialStateAlteration;
    config.judge = true;
    {
        auto const cache = std::make_shared<llm::ResponseCache>(config.cache_path);
        auto const backend = harness::make_backend(harness::BackendSettings {}, cache);
        harness::run_experiment(config, *backend, backend.get(), testing::registry());
    }

    auto replayConfig = harness::load_manifest_config(dir / "live");
    replayConfig.output_dir = (dir / "replay").string();
    replayConfig.cache_path = config.cache_path;
    auto offline = harness::BackendSettings {};
    offline.kind = "offline";
    auto const cache = std::make_shared<llm::ResponseCache>(config.cache_path);
    auto const backend = harness::make_backend(offline, cache);
    harness::run_experiment(replayConfig, *backend, backend.get(), testing::registry());
    auto const& cached = dynamic_cast<const llm::CachedBackend&>(*backend);
    if (cached.live_calls() != 0)
        return fail(std::to_string(cached.live_calls()) + " live calls during replay");

    auto live = testing::read_tree(dir / "live");
    auto replayed = testing::read_tree(dir / "replay");
    auto const a = nlohmann::json::parse(live.at("manifest.json"));
    auto const b = nlohmann::json::parse(replayed.at("manifest.json"));
    if (a.at("replayable") != b.at("replayable"))
        return fail("manifest replayable sections differ");
    live.erase("manifest.json");
    replayed.erase("manifest.json");
    if (live != replayed)
    {
        for (auto const& [name, content]: live)
            if (!replayed.contains(name) || replayed.at(name) != content)
                return fail("artifact differs: " + name);
        return fail("replay wrote extra artifacts");
    }
    return pass(std::to_string(live.size()) + " artifacts identical, " + std::to_string(cached.hits())
                + " cache hits, 0 live calls");
}

// 9. Optional live run against a real endpoint: five examples, N = 4, T = 8, judged by
// the same endpoint. Failures are reported but do not gate the suite.
Verdict live_smoke()
{
    auto const* key = std::getenv("POT_API_KEY");
    auto const* model = std::getenv("POT_LIVE_MODEL");
    if (!key || !*key || !model || !*model)
        return {Outcome::Skip, "set POT_API_KEY and POT_LIVE_MODEL (optionally POT_LIVE_BASE_URL) to run"};
    auto settings = harness::BackendSettings {};
    settings.kind = "http";
    settings.model = model;
    if (auto const* url = std::getenv("POT_LIVE_BASE_URL"); url && *url)
        settings.base_url = url;

    auto const dir = testing::temp_dir("acceptance-live");
    auto config = harness::ExperimentConfig {};
    config.dataset_path = POT_SAMPLE_DATA;
    config.output_dir = (dir / "run").string();
    config.limit = 5;
    config.pot.pathways = 4;
    config.pot.max_steps = 8;
    config.parallelism = 4;
    config.backend = settings;
    config.judge = true;
    config.judge_backend = settings;
    try
    {
        auto const backend = harness::make_backend(settings);
        auto const summary = harness::run_experiment(config, *backend, backend.get(), testing::registry());
        if (summary.failed > 0 || summary.completed != 5)
            return {Outcome::Warn, std::to_string(summary.failed) + " of 5 questions failed"};
        for (auto const& s: harness::load_scores(dir / "run"))
            if (!(s.question_score >= 0.0 && s.question_score <= 1.0))
                return {Outcome::Warn, "score out of range for " + s.question_id};
        for (auto const& t: harness::load_traces(dir / "run"))
            if (!pathway::validate_trace(t, config.pot).ok())
                return {Outcome::Warn, "live trace violates the action rules"};
        return pass("5 questions, " + std::to_string(summary.scored) + " scored");
    }
    catch (const std::exception& e)
    {
        return {Outcome::Warn, e.what()};
    }
}
} // namespace

int main()
{
    struct Criterion
    {
        int id;
        const char* name;
        Verdict (*check)();
    };
    auto const criteria = std::array<Criterion, 9> {{
        {1, "fuzzed policies keep every trace valid", fuzz_traces},
        {2, "deterministic under repeats and interleavings", determinism},
        {3, "table macro averages reproduce", table_macro},
        {4, "relative improvements reproduce", relative_improvements},
        {5, "rubric score properties", rubric_scores},
        {6, "profile subsampling properties", subsampling},
        {7, "model-call budgets", call_counts},
        {8, "offline replay is byte-identical", replay},
        {9, "live smoke test (non-gating)", live_smoke},
    }};

    auto failed = 0;
    for (auto const& c: criteria)
    {
        auto verdict = Verdict {};
        try
        {
            verdict = c.check();
        }
        catch (const std::exception& e)
        {
            verdict = fail(std::string("threw: ") + e.what());
        }
        auto const label = verdict.outcome == Outcome::Pass   ? "PASS"
                           : verdict.outcome == Outcome::Fail ? "FAIL"
                           : verdict.outcome == Outcome::Skip ? "SKIP"
                                                              : "FAIL (non-gating)";
        std::cout << label << " criterion " << c.id << ": " << c.name;
        if (!verdict.detail.empty())
            std::cout << " (" << verdict.detail << ")";
        std::cout << '\n';
        if (verdict.outcome == Outcome::Fail)
            ++failed;
    }
    std::cout << (failed == 0 ? "acceptance: all gating criteria passed" : "acceptance: failures present") << '\n';
    return failed == 0 ? 0 : 1;
}
