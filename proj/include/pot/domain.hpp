// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace pot
{

// ---------------------------------------------------------------------------
// Benchmark data
// ---------------------------------------------------------------------------

enum class Category
{
    ArtsEntertainment,
    LifestylePersonalDevelopment,
    SocietyCulture,
    Other, ///< Escape hatch for datasets with categories outside the three above.
};

std::string_view to_string(Category category) noexcept;

/// Maps dataset category labels ("Arts & Entertainment", "arts_and_entertainment", ...)
/// onto the enum. Unknown labels map to Category::Other.
Category parse_category(std::string_view label) noexcept;

/// One previously asked question of the user.
struct ProfileEntry
{
    std::string question;
    std::string narrative;

    bool operator==(const ProfileEntry&) const = default;
};

struct RubricAspect
{
    std::string text;

    bool operator==(const RubricAspect&) const = default;
};

/// One benchmark unit. The narrative and aspects are evaluation-only data and
/// are never shown to the model during response generation.
struct Example
{
    std::string question_id;
    std::string question;
    std::vector<ProfileEntry> profile; ///< Dataset order, most recent last.
    std::string narrative;
    std::vector<RubricAspect> aspects;
    Category category = Category::Other;
    std::string category_name; ///< Grouping key for reports; the raw label for Category::Other.
};

// ---------------------------------------------------------------------------
// Actions
// ---------------------------------------------------------------------------

enum class Action : std::uint8_t
{
    Answering,
    Planning,
    CheckingForPersonalization,
    Personalizing,
    Reasoning,
    Clarifying,
    Summarizing,
    Revising,
    Finalizing,
};

inline constexpr std::size_t ActionCount = 9;

inline constexpr std::array<Action, ActionCount> AllActions = {
    Action::Answering,   Action::Planning,   Action::CheckingForPersonalization,
    Action::Personalizing, Action::Reasoning, Action::Clarifying,
    Action::Summarizing, Action::Revising,   Action::Finalizing,
};

/// Lower-case name as it appears in prompts and trace files, e.g. "checking for personalization".
std::string_view action_name(Action action) noexcept;

/// Instruction text describing what executing the action produces.
std::string_view action_definition(Action action) noexcept;

/// Case-insensitive match of a model reply against the action names. Surrounding
/// whitespace, quotes, markdown emphasis and trailing punctuation are ignored, as are
/// '_' / '-' separators and an optional "action:" prefix. Only the first non-empty
/// line is considered.
std::optional<Action> parse_action(std::string_view reply);

/// Small value-type set of actions; iteration follows catalog order.
class ActionSet
{
  public:
    constexpr ActionSet() = default;

    static constexpr ActionSet all() noexcept
    {
        ActionSet set;
        set._bits = (1u << ActionCount) - 1;
        return set;
    }

    static constexpr ActionSet of(std::initializer_list<Action> actions) noexcept
    {
        ActionSet set;
        for (auto action: actions)
            set.insert(action);
        return set;
    }

    constexpr void insert(Action action) noexcept { _bits |= bit(action); }
    constexpr void erase(Action action) noexcept { _bits &= static_cast<std::uint16_t>(~bit(action)); }
    [[nodiscard]] constexpr bool contains(Action action) const noexcept { return (_bits & bit(action)) != 0; }
    [[nodiscard]] constexpr bool empty() const noexcept { return _bits == 0; }

    [[nodiscard]] std::size_t size() const noexcept;
    [[nodiscard]] std::vector<Action> to_vector() const;

    constexpr bool operator==(const ActionSet&) const = default;

  private:
    static constexpr std::uint16_t bit(Action action) noexcept
    {
        return static_cast<std::uint16_t>(1u << static_cast<unsigned>(action));
    }

    std::uint16_t _bits = 0;
};

// ---------------------------------------------------------------------------
// Pathways
// ---------------------------------------------------------------------------

struct SamplingParams
{
    double temperature = 0.1;
    double nucleus_p = 0.95;
    int max_output_tokens = 4096;
    std::uint64_t seed = 0;

    bool operator==(const SamplingParams&) const = default;
};

struct PathwayStep
{
    std::size_t index = 0;
    ActionSet allowed;
    Action chosen = Action::Planning;
    std::string agent_output;
    std::string selection_raw; ///< Agent reply that was accepted, before parsing.
    SamplingParams sampling;   ///< Sampling used for the execution call.

    bool operator==(const PathwayStep&) const = default;
};

enum class HaltReason
{
    Finalize,
    BudgetExhausted,
};

std::string_view to_string(HaltReason reason) noexcept;

/// One MDP episode. The textual state is not stored; it is re-rendered from the steps.
/// When the budget runs out, the forced finalizing execution is not a step: its output
/// is only recorded as final_response.
struct PathwayTrace
{
    std::size_t pathway_index = 0;
    std::vector<PathwayStep> steps;
    std::string final_response;
    std::vector<ProfileEntry> profile_view;
    std::uint64_t seed = 0;
    HaltReason halted_by = HaltReason::Finalize;

    bool operator==(const PathwayTrace&) const = default;
};

struct Candidate
{
    std::size_t pathway_index = 0;
    std::string text;

    bool operator==(const Candidate&) const = default;
};

/// Pathway responses ordered by pathway_index, independent of completion order.
struct CandidateSet
{
    std::vector<Candidate> candidates;

    [[nodiscard]] std::size_t size() const noexcept { return candidates.size(); }
    [[nodiscard]] bool empty() const noexcept { return candidates.empty(); }
    [[nodiscard]] const Candidate& operator[](std::size_t i) const { return candidates.at(i); }

    /// Sorts by pathway_index; duplicate indices are an InvalidArgument error.
    static CandidateSet from_unordered(std::vector<Candidate> candidates);

    bool operator==(const CandidateSet&) const = default;
};

struct PreferenceSummary
{
    std::string text;
    std::size_t source_profile_size = 0;

    bool operator==(const PreferenceSummary&) const = default;
};

// ---------------------------------------------------------------------------
// Trace validation
// ---------------------------------------------------------------------------

struct ValidationReport
{
    std::vector<std::string> violations;

    [[nodiscard]] bool ok() const noexcept { return violations.empty(); }
};

/// Checks the gating rules of a recorded trace: the first action is planning, revising
/// only after answering, finalizing terminal and unique, at most max_steps steps,
/// halted_by consistent with the last step, and every allowed set equal to what the
/// gate yields for that prefix. Violations are reported, never thrown.
ValidationReport validate_trace(const PathwayTrace& trace, std::size_t max_steps);

} // namespace pot
