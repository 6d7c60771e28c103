// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "pot/domain.hpp"

#include <nlohmann/json.hpp>

#include <string>
#include <string_view>
#include <vector>

namespace pot
{

void to_json(nlohmann::json& j, const ProfileEntry& entry);
void from_json(const nlohmann::json& j, ProfileEntry& entry);

void to_json(nlohmann::json& j, const SamplingParams& sampling);
void from_json(const nlohmann::json& j, SamplingParams& sampling);

void to_json(nlohmann::json& j, const ActionSet& set);
void from_json(const nlohmann::json& j, ActionSet& set);

/// Trace record: {pathway_index, seed, halted_by, steps:[{index, allowed, chosen,
/// agent_output, selection_raw, sampling}], final_response, profile_view}.
void to_json(nlohmann::json& j, const PathwayTrace& trace);
void from_json(const nlohmann::json& j, PathwayTrace& trace);

void to_json(nlohmann::json& j, const PathwayStep& step);
void from_json(const nlohmann::json& j, PathwayStep& step);

/// One trace per line, newline-terminated.
std::string traces_to_jsonl(const std::vector<PathwayTrace>& traces);

/// Parses a JSONL trace document; blank lines are skipped. Malformed lines raise
/// MalformedRecord naming the 1-based line number.
std::vector<PathwayTrace> traces_from_jsonl(std::string_view jsonl);

} // namespace pot
