// SPDX-License-Identifier: Apache-2.0
#include "pot/domain.hpp"

#include "pot/error.hpp"
#include "text.hpp"

#include <algorithm>
#include <bit>

namespace pot
{

std::string_view to_string(ErrorCode code) noexcept
{
    switch (code)
    {
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::InvalidConfig: return "InvalidConfig";
        case ErrorCode::Io: return "Io";
        case ErrorCode::ContextOverflow: return "ContextOverflow";
        case ErrorCode::ProviderExhausted: return "ProviderExhausted";
        case ErrorCode::ProviderEmpty: return "ProviderEmpty";
        case ErrorCode::ProviderError: return "ProviderError";
        case ErrorCode::ScriptExhausted: return "ScriptExhausted";
        case ErrorCode::CacheMiss: return "CacheMiss";
        case ErrorCode::UnknownTemplate: return "UnknownTemplate";
        case ErrorCode::MissingBinding: return "MissingBinding";
        case ErrorCode::UnparseableAction: return "UnparseableAction";
        case ErrorCode::DisallowedAction: return "DisallowedAction";
        case ErrorCode::EmptyProfile: return "EmptyProfile";
        case ErrorCode::InvalidSelection: return "InvalidSelection";
        case ErrorCode::EmptyCandidates: return "EmptyCandidates";
        case ErrorCode::AllPathwaysFailed: return "AllPathwaysFailed";
        case ErrorCode::AllSamplesFailed: return "AllSamplesFailed";
        case ErrorCode::UnparseableScore: return "UnparseableScore";
        case ErrorCode::NonpositiveBaseline: return "NonpositiveBaseline";
        case ErrorCode::LengthMismatch: return "LengthMismatch";
        case ErrorCode::MalformedRecord: return "MalformedRecord";
        case ErrorCode::MissingField: return "MissingField";
        case ErrorCode::QuestionSetMismatch: return "QuestionSetMismatch";
    }
    return "Unknown";
}

std::string_view to_string(Category category) noexcept
{
    switch (category)
    {
        case Category::ArtsEntertainment: return "Arts & Entertainment";
        case Category::LifestylePersonalDevelopment: return "Lifestyle & Personal Development";
        case Category::SocietyCulture: return "Society & Culture";
        case Category::Other: return "Other";
    }
    return "Other";
}

Category parse_category(std::string_view label) noexcept
{
    // Keep letters only so "Arts & Entertainment", "arts_and_entertainment" and
    // "ArtsEntertainment" all collapse to the same key.
    auto key = std::string {};
    for (auto c: text::to_lower(label))
        if (c >= 'a' && c <= 'z')
            key += c;
    if (key.starts_with("art"))
        return Category::ArtsEntertainment;
    if (key.starts_with("lifestyle"))
        return Category::LifestylePersonalDevelopment;
    if (key.starts_with("societ"))
        return Category::SocietyCulture;
    return Category::Other;
}

std::string_view action_name(Action action) noexcept
{
    switch (action)
    {
        case Action::Answering: return "answering";
        case Action::Planning: return "planning";
        case Action::CheckingForPersonalization: return "checking for personalization";
        case Action::Personalizing: return "personalizing";
        case Action::Reasoning: return "reasoning";
        case Action::Clarifying: return "clarifying";
        case Action::Summarizing: return "summarizing";
        case Action::Revising: return "revising";
        case Action::Finalizing: return "finalizing";
    }
    return "";
}

std::string_view action_definition(Action action) noexcept
{
    switch (action)
    {
        case Action::Answering:
            return "Use this to generate a personalized response to the question, drawing on the user profile "
                   "where it helps. Pick it once the question is clear and the needed information is available.";
        case Action::Planning:
            return "Use this to generate a plan of steps required to cover every part of the question. Pick it "
                   "when the question has several components.";
        case Action::CheckingForPersonalization:
            return "Use this to evaluate whether the user's question can benefit from personalization, or "
                   "whether a generic answer is enough.";
        case Action::Personalizing:
            return "Use this to identify relevant information from the user profile and explain how it should "
                   "shape the answer.";
        case Action::Reasoning:
            return "Use this to break down one aspect of the question and work through it step by step.";
        case Action::Clarifying:
            return "Use this to assess whether the question is ambiguous and state how the ambiguity can be "
                   "resolved.";
        case Action::Summarizing:
            return "Use this to summarize all available information and findings gathered so far.";
        case Action::Revising:
            return "Use this to revise the current response to the question so it serves the user better. "
                   "Only available after a response has been written.";
        case Action::Finalizing:
            return "Use this when the answer is complete: it finalizes the response and writes out the full "
                   "answer for the user.";
    }
    return "";
}

std::optional<Action> parse_action(std::string_view reply)
{
    auto line = std::string_view {};
    auto rest = reply;
    while (!rest.empty())
    {
        auto const nl = rest.find('\n');
        line = text::trim(rest.substr(0, nl));
        if (!line.empty())
            break;
        rest = nl == std::string_view::npos ? std::string_view {} : rest.substr(nl + 1);
    }

    auto normalized = std::string {};
    for (auto c: text::to_lower(line))
    {
        if (c == '_' || c == '-' || c == '\t')
            c = ' ';
        if (c == '*' || c == '"' || c == '\'' || c == '`' || c == '.' || c == '!' || c == '[' || c == ']')
            continue;
        if (c == ' ' && (normalized.empty() || normalized.back() == ' '))
            continue;
        normalized += c;
    }
    while (!normalized.empty() && normalized.back() == ' ')
        normalized.pop_back();
    for (auto prefix: {std::string_view {"selected action:"}, std::string_view {"action:"}})
        if (normalized.starts_with(prefix))
            normalized = std::string(text::trim(std::string_view(normalized).substr(prefix.size())));

    for (auto action: AllActions)
        if (normalized == action_name(action))
            return action;
    return std::nullopt;
}

std::size_t ActionSet::size() const noexcept
{
    return static_cast<std::size_t>(std::popcount(_bits));
}

std::vector<Action> ActionSet::to_vector() const
{
    auto out = std::vector<Action> {};
    for (auto action: AllActions)
        if (contains(action))
            out.push_back(action);
    return out;
}

std::string_view to_string(HaltReason reason) noexcept
{
    return reason == HaltReason::Finalize ? "Finalize" : "BudgetExhausted";
}

CandidateSet CandidateSet::from_unordered(std::vector<Candidate> candidates)
{
    std::ranges::sort(candidates, {}, &Candidate::pathway_index);
    auto const dup = std::ranges::adjacent_find(candidates, {}, &Candidate::pathway_index);
    if (dup != candidates.end())
        throw Error(ErrorCode::InvalidArgument,
                    "duplicate pathway index " + std::to_string(dup->pathway_index) + " in candidate set");
    return CandidateSet {std::move(candidates)};
}

ValidationReport validate_trace(const PathwayTrace& trace, std::size_t max_steps)
{
    auto report = ValidationReport {};
    auto& v = report.violations;
    auto const& steps = trace.steps;

    if (steps.empty())
    {
        v.emplace_back("trace has no steps");
        return report;
    }
    if (steps.size() > max_steps)
        v.push_back("trace has " + std::to_string(steps.size()) + " steps, limit is " + std::to_string(max_steps));
    if (steps.front().chosen != Action::Planning)
        v.emplace_back("first action must be planning");

    auto answered = false;
    for (std::size_t i = 0; i < steps.size(); ++i)
    {
        auto const& step = steps[i];
        auto const at = "step " + std::to_string(i) + ": ";

        if (step.index != i)
            v.push_back(at + "index is " + std::to_string(step.index));

        // Expected gate for this prefix, recomputed independently of the executor.
        auto expected = i == 0 ? ActionSet::of({Action::Planning}) : ActionSet::all();
        if (i > 0 && !answered)
            expected.erase(Action::Revising);
        if (step.allowed != expected)
            v.push_back(at + "allowed set does not match the gate for this prefix");
        if (!step.allowed.contains(step.chosen))
            v.push_back(at + "chosen action '" + std::string(action_name(step.chosen)) + "' not in allowed set");

        if (step.chosen == Action::Revising && !answered)
            v.push_back(at + "revising before answering");
        if (step.chosen == Action::Finalizing && i + 1 != steps.size())
            v.push_back(at + "finalizing must be the last step");
        if (step.chosen == Action::Answering)
            answered = true;
    }

    auto const last_is_final = steps.back().chosen == Action::Finalizing;
    if (last_is_final != (trace.halted_by == HaltReason::Finalize))
        v.emplace_back("halted_by inconsistent with last step");
    if (trace.halted_by == HaltReason::BudgetExhausted && steps.size() != max_steps)
        v.emplace_back("budget exhausted before reaching the step limit");
    if (trace.final_response.empty())
        v.emplace_back("final response is empty");

    return report;
}

} // namespace pot
