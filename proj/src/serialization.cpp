// SPDX-License-Identifier: Apache-2.0
#include "pot/serialization.hpp"

#include "pot/error.hpp"

#include <sstream>

namespace pot
{

using nlohmann::json;

void to_json(json& j, const ProfileEntry& entry)
{
    j = json {{"question", entry.question}, {"narrative", entry.narrative}};
}

void from_json(const json& j, ProfileEntry& entry)
{
    j.at("question").get_to(entry.question);
    entry.narrative = j.value("narrative", std::string {});
}

void to_json(json& j, const SamplingParams& sampling)
{
    j = json {
        {"temperature", sampling.temperature},
        {"nucleus_p", sampling.nucleus_p},
        {"max_output_tokens", sampling.max_output_tokens},
        {"seed", sampling.seed},
    };
}

void from_json(const json& j, SamplingParams& sampling)
{
    auto const defaults = SamplingParams {};
    sampling.temperature = j.value("temperature", defaults.temperature);
    sampling.nucleus_p = j.value("nucleus_p", defaults.nucleus_p);
    sampling.max_output_tokens = j.value("max_output_tokens", defaults.max_output_tokens);
    sampling.seed = j.value("seed", defaults.seed);
}

void to_json(json& j, const ActionSet& set)
{
    j = json::array();
    for (auto action: set.to_vector())
        j.push_back(action_name(action));
}

namespace
{
    Action action_from_json(const json& j)
    {
        auto const name = j.get<std::string>();
        auto const action = parse_action(name);
        if (!action)
            throw Error(ErrorCode::MalformedRecord, "unknown action '" + name + "'");
        return *action;
    }
} // namespace

void from_json(const json& j, ActionSet& set)
{
    set = ActionSet {};
    for (auto const& item: j)
        set.insert(action_from_json(item));
}

void to_json(json& j, const PathwayStep& step)
{
    j = json {
        {"index", step.index},
        {"allowed", step.allowed},
        {"chosen", action_name(step.chosen)},
        {"agent_output", step.agent_output},
        {"selection_raw", step.selection_raw},
        {"sampling", step.sampling},
    };
}

void from_json(const json& j, PathwayStep& step)
{
    j.at("index").get_to(step.index);
    j.at("allowed").get_to(step.allowed);
    step.chosen = action_from_json(j.at("chosen"));
    j.at("agent_output").get_to(step.agent_output);
    step.selection_raw = j.value("selection_raw", std::string {});
    step.sampling = j.value("sampling", SamplingParams {});
}

void to_json(json& j, const PathwayTrace& trace)
{
    j = json {
        {"pathway_index", trace.pathway_index},
        {"seed", trace.seed},
        {"halted_by", to_string(trace.halted_by)},
        {"steps", trace.steps},
        {"final_response", trace.final_response},
        {"profile_view", trace.profile_view},
    };
}

void from_json(const json& j, PathwayTrace& trace)
{
    j.at("pathway_index").get_to(trace.pathway_index);
    j.at("seed").get_to(trace.seed);
    auto const halted = j.at("halted_by").get<std::string>();
    if (halted == "Finalize")
        trace.halted_by = HaltReason::Finalize;
    else if (halted == "BudgetExhausted")
        trace.halted_by = HaltReason::BudgetExhausted;
    else
        throw Error(ErrorCode::MalformedRecord, "unknown halted_by '" + halted + "'");
    j.at("steps").get_to(trace.steps);
    j.at("final_response").get_to(trace.final_response);
    trace.profile_view = j.value("profile_view", std::vector<ProfileEntry> {});
}

std::string traces_to_jsonl(const std::vector<PathwayTrace>& traces)
{
    auto out = std::string {};
    for (auto const& trace: traces)
    {
        out += json(trace).dump();
        out += '\n';
    }
    return out;
}

std::vector<PathwayTrace> traces_from_jsonl(std::string_view jsonl)
{
    auto traces = std::vector<PathwayTrace> {};
    auto stream = std::istringstream(std::string(jsonl));
    auto line = std::string {};
    for (auto lineNo = 1; std::getline(stream, line); ++lineNo)
    {
        if (line.find_first_not_of(" \t\r") == std::string::npos)
            continue;
        try
        {
            traces.push_back(json::parse(line).get<PathwayTrace>());
        }
        catch (const json::exception& e)
        {
            throw Error(ErrorCode::MalformedRecord, "trace line " + std::to_string(lineNo) + ": " + e.what());
        }
        catch (const Error& e)
        {
            throw Error(ErrorCode::MalformedRecord, "trace line " + std::to_string(lineNo) + ": " + e.what());
        }
    }
    return traces;
}

} // namespace pot
