// SPDX-License-Identifier: Apache-2.0
#include "pot/baselines.hpp"
#include "pot/error.hpp"

#include "support.hpp"

#include <doctest.h>

#include <set>

using namespace pot;
using namespace pot::baselines;

namespace
{
// Index replies get "0", everything else a tagged echo.
std::string generic_reply(const llm::CompletionRequest& request)
{
    if (request.tag == "best_of_n" || request.tag == "tot_select_plan")
        return "0";
    return request.tag + " for " + request.lane;
}

bool contains(const std::string& haystack, const std::string& needle)
{
    return haystack.find(needle) != std::string::npos;
}
} // namespace

TEST_CASE("call counts: best-of-k is k + 2 and tree of thoughts is 2k + 3")
{
    auto const example = testing::make_example();
    for (std::size_t k: {1u, 2u, 4u, 8u})
    {
        {
            auto backend = llm::ScriptedBackend {};
            backend.set_responder(generic_reply);
            auto const rt = Runtime {backend, testing::registry()};
            run_best_of_k(rt, example, k, false);
            CHECK_MESSAGE(backend.call_count() == k + 2, "best-of-k k=" << k);
        }
        {
            auto backend = llm::ScriptedBackend {};
            backend.set_responder(generic_reply);
            auto const rt = Runtime {backend, testing::registry()};
            run_tot(rt, example, TotConfig {.depth = 2, .width = k, .sampling = {.temperature = 0.9}});
            CHECK_MESSAGE(backend.call_count() == 2 * k + 3, "tot k=" << k);
        }
    }
}

TEST_CASE("with a single candidate the selectors can be skipped")
{
    auto const example = testing::make_example();
    auto options = BaselineOptions {};
    options.literal_k1 = false;
    auto backend = llm::ScriptedBackend {};
    backend.set_responder(generic_reply);
    auto const rt = Runtime {backend, testing::registry()};
    CHECK(run_best_of_k(rt, example, 1, false, options).response == "sample for q1/sample/0");
    CHECK(backend.call_count() == 2);
    run_tot(rt, example, TotConfig {.depth = 2, .width = 1, .sampling = {}}, options);
    CHECK(backend.call_count() == 2 + 3);
}

TEST_CASE("best-of-k: the judge's index picks the sample")
{
    auto const example = testing::make_example();
    auto backend = llm::ScriptedBackend {};
    for (std::size_t i = 0; i < 8; ++i)
        backend.set_lane("q1/sample/" + std::to_string(i), {"sample " + std::to_string(i)});
    backend.set_lane("q1/preferences", {"prefs"});
    backend.set_lane("q1/select", {"5"});
    auto const rt = Runtime {backend, testing::registry()};
    auto const result = run_best_of_k(rt, example, 8, false);
    CHECK(result.response == "sample 5");
    CHECK(result.chosen_index == 5u);

    // Samples are drawn hot with distinct seeds.
    auto seeds = std::set<std::uint64_t> {};
    for (auto const& c: backend.calls())
        if (c.tag == "sample")
        {
            CHECK(c.sampling.temperature == 0.9);
            seeds.insert(c.sampling.seed);
        }
    CHECK(seeds.size() == 8);
}

TEST_CASE("best-of-k skips failed samples")
{
    auto const example = testing::make_example();
    auto backend = llm::ScriptedBackend {};
    backend.set_lane("q1/sample/0", {"first"});
    backend.set_lane("q1/sample/1", {}); // exhausted: fails
    backend.set_lane("q1/sample/2", {"third"});
    backend.set_lane("q1/preferences", {"p"});
    backend.set_lane("q1/select", {"1"});
    auto const rt = Runtime {backend, testing::registry()};
    auto const result = run_best_of_k(rt, example, 3, false);
    CHECK(result.response == "third");
    REQUIRE(result.failures.size() == 1);
    CHECK(result.failures[0].pathway_index == 1);

    auto none = llm::ScriptedBackend {};
    auto const rtNone = Runtime {none, testing::registry()};
    CHECK(testing::error_of([&] { run_best_of_k(rtNone, example, 2, false); }) == ErrorCode::AllSamplesFailed);
    CHECK(testing::error_of([&] { run_best_of_k(rtNone, example, 0, false); }) == ErrorCode::InvalidConfig);
}

TEST_CASE("tree of thoughts follows the chosen plan and the chosen response")
{
    auto const example = testing::make_example();
    auto backend = llm::ScriptedBackend {};
    backend.set_lane("q1/preferences", {"prefs"});
    for (std::size_t i = 0; i < 4; ++i)
    {
        backend.set_lane("q1/tot/plan/" + std::to_string(i), {"plan " + std::to_string(i)});
        backend.set_lane("q1/tot/response/" + std::to_string(i), {"response " + std::to_string(i)});
    }
    backend.set_lane("q1/tot/plan-select", {"1"});
    backend.set_lane("q1/tot/response-select", {"3"});
    auto const rt = Runtime {backend, testing::registry()};
    auto const result = run_tot(rt, example, TotConfig {.depth = 2, .width = 4, .sampling = {.temperature = 0.9}});
    CHECK(result.response == "response 3");
    CHECK(result.chosen_index == 3u);
    auto const calls = backend.calls();
    CHECK(std::ranges::count_if(calls, [](auto const& c) { return c.tag == "tot/response"; }) == 4);
    for (auto const& c: backend.calls())
        if (c.tag == "tot/response")
        {
            CHECK(contains(c.messages.back().text, "plan 1"));
            CHECK_FALSE(contains(c.messages.back().text, "plan 2"));
        }
}

TEST_CASE("tree of thoughts configuration")
{
    CHECK(testing::error_of([] { TotConfig {.depth = 3, .width = 2, .sampling = {}}.validate(); })
          == ErrorCode::InvalidConfig);
    CHECK(testing::error_of([] { TotConfig {.depth = 2, .width = 0, .sampling = {}}.validate(); })
          == ErrorCode::InvalidConfig);
}

TEST_CASE("no-personalization sends only the question")
{
    auto const example = testing::make_example();
    auto backend = llm::ScriptedBackend({"generic"});
    auto const rt = Runtime {backend, testing::registry()};
    CHECK(run_no_personalization(rt, example) == "generic");
    auto const prompt = backend.calls()[0].messages.back().text;
    CHECK(prompt == example.question);
    for (auto const& e: example.profile)
        CHECK_FALSE(contains(prompt, e.question));
}

TEST_CASE("in-context prompts carry the profile; CoT keeps the text after the last marker")
{
    auto const example = testing::make_example();
    auto backend = llm::ScriptedBackend({"plain answer", "Thinking... Response: draft\nMore.\nResponse: the answer"});
    auto const rt = Runtime {backend, testing::registry()};
    CHECK(run_in_context(rt, example, false) == "plain answer");
    CHECK(run_in_context(rt, example, true) == "the answer");
    for (auto const& c: backend.calls())
    {
        CHECK(contains(c.messages.back().text, example.question));
        for (auto const& e: example.profile)
            CHECK(contains(c.messages.back().text, e.question));
        CHECK(c.sampling.temperature == 0.1);
    }
    CHECK(extract_cot_answer("no marker here") == "no marker here");
    CHECK(extract_cot_answer("Response:   ") == "Response:   ");
}

TEST_CASE("no method reads the hidden narrative or the rubric")
{
    auto const example = testing::make_example();
    auto backend = llm::ScriptedBackend {};
    backend.set_responder(generic_reply);
    auto const rt = Runtime {backend, testing::registry()};
    run_no_personalization(rt, example);
    run_in_context(rt, example, true);
    run_best_of_k(rt, example, 3, true);
    run_tot(rt, example, TotConfig {.depth = 2, .width = 2, .sampling = {}});
    for (auto const& c: backend.calls())
    {
        CHECK_FALSE(contains(c.messages.back().text, example.narrative));
        CHECK_FALSE(contains(c.messages.back().text, "secret aspect"));
    }
}
