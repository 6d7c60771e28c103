// SPDX-License-Identifier: Apache-2.0
#include "pot/prompts.hpp"

#include "pot/digest.hpp"
#include "pot/error.hpp"
#include "text.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace pot::prompts
{

namespace
{
    std::string read_file(const std::filesystem::path& path)
    {
        auto in = std::ifstream(path, std::ios::binary);
        if (!in)
            throw Error(ErrorCode::Io, "cannot read " + path.string());
        auto buffer = std::ostringstream {};
        buffer << in.rdbuf();
        return buffer.str();
    }

    // Calls on_text for literal runs and on_slot for each {{name}}.
    template <typename OnText, typename OnSlot>
    void scan(std::string_view source, OnText&& on_text, OnSlot&& on_slot)
    {
        auto pos = std::size_t {0};
        while (pos < source.size())
        {
            auto const open = source.find("{{", pos);
            if (open == std::string_view::npos)
                break;
            auto const close = source.find("}}", open + 2);
            if (close == std::string_view::npos)
                break;
            on_text(source.substr(pos, open - pos));
            on_slot(text::trim(source.substr(open + 2, close - open - 2)));
            pos = close + 2;
        }
        on_text(source.substr(std::min(pos, source.size())));
    }
} // namespace

TemplateRegistry TemplateRegistry::load(const std::filesystem::path& directory)
{
    auto const manifestPath = directory / "manifest.json";
    auto manifest = nlohmann::json {};
    try
    {
        manifest = nlohmann::json::parse(read_file(manifestPath));
    }
    catch (const nlohmann::json::exception& e)
    {
        throw Error(ErrorCode::MalformedRecord, manifestPath.string() + ": " + e.what());
    }

    auto sources = std::map<std::string, std::string, std::less<>> {};
    for (auto const& [name, file]: manifest.at("templates").items())
        sources.emplace(name, read_file(directory / file.get<std::string>()));
    return from_sources(std::move(sources), manifest.value("version", std::string {"unversioned"}));
}

TemplateRegistry TemplateRegistry::from_sources(std::map<std::string, std::string, std::less<>> sources,
                                                std::string version)
{
    for (auto name: RequiredTemplates)
        if (!sources.contains(name))
            throw Error(ErrorCode::UnknownTemplate, "template '" + std::string(name) + "' is not registered");
    auto registry = TemplateRegistry {};
    registry._sources = std::move(sources);
    registry._version = std::move(version);
    return registry;
}

std::string TemplateRegistry::render(std::string_view name, const Bindings& bindings) const
{
    auto const& tmpl = source(name);
    auto out = std::string {};
    out.reserve(tmpl.size());
    scan(
        tmpl, [&](std::string_view literal) { out += literal; },
        [&](std::string_view slot) {
            auto const it = bindings.find(slot);
            if (it == bindings.end())
                throw Error(ErrorCode::MissingBinding,
                            "template '" + std::string(name) + "' needs '" + std::string(slot) + "'");
            out += it->second;
        });
    return out;
}

bool TemplateRegistry::contains(std::string_view name) const
{
    return _sources.contains(name);
}

const std::string& TemplateRegistry::source(std::string_view name) const
{
    auto const it = _sources.find(name);
    if (it == _sources.end())
        throw Error(ErrorCode::UnknownTemplate, "no template named '" + std::string(name) + "'");
    return it->second;
}

std::map<std::string, std::string> TemplateRegistry::hashes() const
{
    auto out = std::map<std::string, std::string> {};
    for (auto const& [name, src]: _sources)
        out.emplace(name, sha256_hex(src));
    return out;
}

std::vector<std::string> placeholders(std::string_view source)
{
    auto names = std::vector<std::string> {};
    scan(
        source, [](std::string_view) {},
        [&](std::string_view slot) {
            if (std::ranges::find(names, slot) == names.end())
                names.emplace_back(slot);
        });
    return names;
}

std::string render_profile(const std::vector<ProfileEntry>& profile)
{
    auto out = std::string {};
    for (std::size_t i = 0; i < profile.size(); ++i)
    {
        out += "[" + std::to_string(i + 1) + "] " + profile[i].question;
        if (!profile[i].narrative.empty())
            out += " — " + profile[i].narrative;
        out += '\n';
    }
    return out;
}

std::string render_action_list(ActionSet actions)
{
    auto out = std::string {};
    for (auto action: actions.to_vector())
    {
        out += "- ";
        out += action_name(action);
        out += '\n';
    }
    return out;
}

std::string render_numbered(const std::vector<std::string>& items)
{
    auto out = std::string {};
    for (std::size_t i = 0; i < items.size(); ++i)
    {
        if (i > 0)
            out += "\n\n";
        out += "[" + std::to_string(i) + "] " + items[i];
    }
    return out;
}

std::filesystem::path default_directory()
{
    if (auto const* env = std::getenv("POT_PROMPTS_DIR"); env && *env)
        return env;
#ifdef POT_PROMPTS_DIR
    return POT_PROMPTS_DIR;
#else
    return "prompts";
#endif
}

} // namespace pot::prompts
