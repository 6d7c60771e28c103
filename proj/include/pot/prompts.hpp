// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "pot/domain.hpp"

#include <array>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace pot::prompts
{

using Bindings = std::map<std::string, std::string, std::less<>>;

/// Every template the system renders. A registry missing any of them fails to load.
inline constexpr std::array<std::string_view, 12> RequiredTemplates = {
    "init_state",   "action_selection", "action_execution", "preference_extraction",
    "best_of_n",    "mixture_of_n",     "baseline_plain",   "baseline_cot",
    "tot_plan",     "tot_generate",     "tot_select_plan",  "judge_aspect",
};

/// Named text templates with {{placeholder}} slots. Read-only after construction.
class TemplateRegistry
{
  public:
    /// Loads <directory>/manifest.json: {"version": "...", "templates": {"<name>": "<file>"}}.
    static TemplateRegistry load(const std::filesystem::path& directory);

    /// Registry over in-memory template sources; still requires all twelve names.
    static TemplateRegistry from_sources(std::map<std::string, std::string, std::less<>> sources,
                                         std::string version = "inline");

    /// Substitutes every placeholder in one pass; substituted text is not rescanned.
    /// Throws UnknownTemplate for unregistered names and MissingBinding when the
    /// template uses a placeholder absent from bindings. Extra bindings are ignored.
    [[nodiscard]] std::string render(std::string_view name, const Bindings& bindings) const;

    [[nodiscard]] bool contains(std::string_view name) const;
    [[nodiscard]] const std::string& source(std::string_view name) const;
    [[nodiscard]] const std::string& version() const noexcept { return _version; }

    /// SHA-256 of each template source, keyed by name.
    [[nodiscard]] std::map<std::string, std::string> hashes() const;

  private:
    std::map<std::string, std::string, std::less<>> _sources;
    std::string _version;
};

/// Placeholder names used by a template, in order of first appearance.
std::vector<std::string> placeholders(std::string_view source);

/// One line per entry in dataset order: "[i] question", then a dash and the narrative when present.
std::string render_profile(const std::vector<ProfileEntry>& profile);

/// "- name" per line, catalog order.
std::string render_action_list(ActionSet actions);

/// "[0] text" blocks separated by blank lines; indices start at zero.
std::string render_numbered(const std::vector<std::string>& items);

/// Directory holding the bundled templates (set at build time, overridable with POT_PROMPTS_DIR).
std::filesystem::path default_directory();

} // namespace pot::prompts
