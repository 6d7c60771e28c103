// SPDX-License-Identifier: Apache-2.0
// Shared fixtures for the unit and acceptance tests.
#pragma once

#include "pot/backends.hpp"
#include "pot/domain.hpp"
#include "pot/error.hpp"
#include "pot/prompts.hpp"

#include <nlohmann/json.hpp>

#include <unistd.h>

#include <algorithm>
#include <array>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <map>
#include <memory>
#include <mutex>
#include <random>
#include <string>
#include <vector>

namespace pot::testing
{

inline const prompts::TemplateRegistry& registry()
{
    static auto const instance = prompts::TemplateRegistry::load(POT_PROMPTS_DIR);
    return instance;
}

inline std::vector<ProfileEntry> make_profile(std::size_t n)
{
    auto profile = std::vector<ProfileEntry> {};
    for (std::size_t i = 0; i < n; ++i)
        profile.push_back(ProfileEntry {.question = "profile question " + std::to_string(i),
                                        .narrative = "profile narrative " + std::to_string(i)});
    return profile;
}

inline Example make_example(std::string id = "q1", std::size_t profile_size = 10, std::size_t aspects = 3)
{
    auto example = Example {};
    example.question_id = std::move(id);
    example.question = "How should I plan a week of meals for " + example.question_id + "?";
    example.profile = make_profile(profile_size);
    example.narrative = "secret narrative";
    for (std::size_t i = 0; i < aspects; ++i)
        example.aspects.push_back(RubricAspect {"secret aspect " + std::to_string(i)});
    example.category = Category::LifestylePersonalDevelopment;
    example.category_name = std::string(to_string(example.category));
    return example;
}

/// The action names listed by the most recent selection prompt in a request.
inline std::vector<std::string> offered_actions(const std::string& prompt)
{
    auto const marker = std::string("You may choose from:\n");
    auto const pos = prompt.rfind(marker);
    auto names = std::vector<std::string> {};
    if (pos == std::string::npos)
        return names;
    auto at = pos + marker.size();
    while (at + 2 <= prompt.size() && prompt.compare(at, 2, "- ") == 0)
    {
        auto const end = prompt.find('\n', at);
        names.push_back(prompt.substr(at + 2, end - at - 2));
        at = end + 1;
    }
    return names;
}

inline std::size_t steps_taken(const std::string& prompt)
{
    auto count = std::size_t {0};
    for (auto pos = prompt.find("Selected action:"); pos != std::string::npos;
         pos = prompt.find("Selected action:", pos + 1))
        ++count;
    return count;
}

/// Random agent policy for fuzzing the pathway executor. Each lane gets its own
/// generator seeded from the lane name and the policy seed. Selection replies are
/// sometimes garbage or a disallowed action (at most two bad replies in a row, so a
/// three-attempt budget always recovers); valid replies vary case and decoration.
class RandomPolicy
{
  public:
    explicit RandomPolicy(std::uint64_t seed): _seed(seed) {}

    std::string operator()(const llm::CompletionRequest& request)
    {
        auto const lock = std::lock_guard(_mutex);
        auto& lane = _lanes[request.lane];
        if (!lane.seeded)
        {
            lane.rng.seed(_seed ^ std::hash<std::string> {}(request.lane));
            lane.seeded = true;
        }
        auto& rng = lane.rng;
        auto const& prompt = request.messages.back().text;
        if (request.tag != "action_selection")
            return "output " + std::to_string(rng() % 100000) + " for " + request.tag;

        auto const offered = offered_actions(prompt);
        if (lane.bad_streak < 2 && rng() % 4 == 0)
        {
            ++lane.bad_streak;
            if (rng() % 2 == 0)
                return "I am not sure what to do.";
            // Something not on the list (revising before answering, or nonsense).
            for (auto action: AllActions)
            {
                auto const name = std::string(action_name(action));
                if (std::ranges::find(offered, name) == offered.end())
                    return name;
            }
            return "dancing";
        }
        lane.bad_streak = 0;
        auto name = offered.at(rng() % offered.size());
        switch (rng() % 4)
        {
            case 0: return name;
            case 1:
                for (auto& c: name)
                    c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
                return name;
            case 2: return "  **" + name + "**\n";
            default: return "Selected action: " + name + "\nbecause it helps";
        }
    }

  private:
    struct Lane
    {
        std::mt19937_64 rng;
        bool seeded = false;
        int bad_streak = 0;
    };
    std::uint64_t _seed;
    std::mutex _mutex;
    std::map<std::string, Lane> _lanes;
};

/// A copyable responder wrapping a RandomPolicy.
inline llm::ScriptedBackend::Responder random_responder(std::uint64_t seed)
{
    auto policy = std::make_shared<RandomPolicy>(seed);
    return [policy](const llm::CompletionRequest& request) { return (*policy)(request); };
}

/// The code of the pot::Error thrown by fn, or nothing when it returns normally.
inline std::optional<ErrorCode> error_of(const std::function<void()>& fn)
{
    try
    {
        fn();
    }
    catch (const Error& e)
    {
        return e.code();
    }
    return std::nullopt;
}

/// A fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name)
{
    auto const dir = std::filesystem::temp_directory_path() / ("pot-test-" + name + "-" + std::to_string(::getpid()));
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

/// Writes a JSONL dataset in the default schema: n questions spread over the three
/// categories, each with profile_size history entries and three rubric aspects.
inline void write_dataset(const std::filesystem::path& path, std::size_t n, std::size_t profile_size = 6)
{
    static constexpr std::array<const char*, 3> categories = {"Arts & Entertainment",
                                                              "Lifestyle & Personal Development", "Society & Culture"};
    auto out = std::ofstream(path);
    for (std::size_t i = 0; i < n; ++i)
    {
        auto profile = nlohmann::json::array();
        for (std::size_t p = 0; p < profile_size; ++p)
            profile.push_back({{"text", "past question " + std::to_string(i) + "." + std::to_string(p)},
                               {"description", "what I wanted " + std::to_string(p)}});
        auto const record = nlohmann::json {
            {"id", "q" + std::to_string(i)},
            {"question", "Question number " + std::to_string(i) + "?"},
            {"profile", profile},
            {"narrative", "hidden narrative " + std::to_string(i)},
            {"rubric_aspects", {{{"aspect", "covers point a"}}, {{"aspect", "covers point b"}}, "covers point c"}},
            {"category", categories[i % categories.size()]},
        };
        out << record.dump() << '\n';
    }
}

/// Every regular file under dir, keyed by relative path.
inline std::map<std::string, std::string> read_tree(const std::filesystem::path& dir)
{
    auto files = std::map<std::string, std::string> {};
    for (auto const& entry: std::filesystem::recursive_directory_iterator(dir))
        if (entry.is_regular_file())
        {
            auto in = std::ifstream(entry.path(), std::ios::binary);
            files[std::filesystem::relative(entry.path(), dir).string()] =
                std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
        }
    return files;
}

} // namespace pot::testing
