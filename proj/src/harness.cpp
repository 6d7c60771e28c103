// SPDX-License-Identifier: Apache-2.0
#include "pot/harness.hpp"

#include "pot/backends.hpp"
#include "pot/digest.hpp"
#include "pot/error.hpp"
#include "pot/http_backend.hpp"
#include "pot/serialization.hpp"
#include "parallel.hpp"
#include "text.hpp"

#include <atomic>
#include <chrono>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <numeric>
#include <cmath>
#include <set>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;

namespace pot::harness
{

std::string_view to_string(Method method) noexcept
{
    switch (method)
    {
        case Method::Pot: return "pot";
        case Method::NoPersonalization: return "no-personalization";
        case Method::InContext: return "in-context";
        case Method::InContextCot: return "in-context-cot";
        case Method::BestOfK: return "best-of-k";
        case Method::Tot: return "tot";
    }
    return "pot";
}

Method parse_method(std::string_view name)
{
    auto key = text::to_lower(text::trim(name));
    std::ranges::replace(key, '_', '-');
    for (auto m: {Method::Pot, Method::NoPersonalization, Method::InContext, Method::InContextCot, Method::BestOfK,
                  Method::Tot})
        if (key == to_string(m))
            return m;
    throw Error(ErrorCode::InvalidConfig, "unknown method '" + std::string(name) + "'");
}

namespace
{
    std::string read_file(const fs::path& path)
    {
        auto in = std::ifstream(path, std::ios::binary);
        if (!in)
            throw Error(ErrorCode::Io, "cannot read " + path.string());
        auto buffer = std::ostringstream {};
        buffer << in.rdbuf();
        return buffer.str();
    }

    // Write-then-rename, so a reader never sees half a file.
    void write_file(const fs::path& path, std::string_view content)
    {
        fs::create_directories(path.parent_path());
        auto tmp = path;
        tmp += ".tmp";
        {
            auto out = std::ofstream(tmp, std::ios::binary | std::ios::trunc);
            if (!out)
                throw Error(ErrorCode::Io, "cannot write " + tmp.string());
            out.write(content.data(), static_cast<std::streamsize>(content.size()));
            if (!out)
                throw Error(ErrorCode::Io, "write failed for " + tmp.string());
        }
        fs::rename(tmp, path);
    }

    void write_json(const fs::path& path, const json& j) { write_file(path, j.dump(2) + "\n"); }

    json read_json(const fs::path& path)
    {
        try
        {
            return json::parse(read_file(path));
        }
        catch (const json::exception& e)
        {
            throw Error(ErrorCode::MalformedRecord, path.string() + ": " + e.what());
        }
    }

    std::string utc_now()
    {
        auto const now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
        auto tm = std::tm {};
        gmtime_r(&now, &tm);
        auto out = std::ostringstream {};
        out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
        return out.str();
    }

    // Question ids become file names.
    std::string file_stem(std::string_view question_id)
    {
        auto out = std::string {};
        for (auto c: question_id)
            out += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.') ? c : '_';
        if (out.empty() || out.front() == '.')
            out.insert(out.begin(), '_');
        return out;
    }

    std::string string_field(const json& record, const std::string& field, std::size_t line, bool required)
    {
        auto const it = record.find(field);
        if (it == record.end() || it->is_null())
        {
            if (required)
                throw Error(ErrorCode::MissingField, "line " + std::to_string(line) + ": missing '" + field + "'");
            return {};
        }
        if (it->is_string())
            return it->get<std::string>();
        if (it->is_number())
            return it->dump();
        throw Error(ErrorCode::MalformedRecord, "line " + std::to_string(line) + ": '" + field + "' is not a string");
    }

    const json& array_field(const json& record, const std::string& field, std::size_t line)
    {
        auto const it = record.find(field);
        if (it == record.end() || it->is_null())
            throw Error(ErrorCode::MissingField, "line " + std::to_string(line) + ": missing '" + field + "'");
        if (!it->is_array())
            throw Error(ErrorCode::MalformedRecord, "line " + std::to_string(line) + ": '" + field + "' is not a list");
        return *it;
    }

    Example parse_record(const json& record, std::size_t line, std::size_t profile_limit, const DatasetSchema& schema)
    {
        if (!record.is_object())
            throw Error(ErrorCode::MalformedRecord, "line " + std::to_string(line) + ": record is not an object");

        auto example = Example {};
        example.question_id = string_field(record, schema.id_field, line, true);
        example.question = string_field(record, schema.question_field, line, true);
        example.narrative = string_field(record, schema.narrative_field, line, false);
        auto category = string_field(record, schema.category_field, line, false);
        if (category.empty())
            category = schema.default_category;
        example.category = parse_category(category);
        example.category_name = example.category == Category::Other ? category
                                                                    : std::string(to_string(example.category));

        for (auto const& item: array_field(record, schema.profile_field, line))
        {
            if (item.is_string())
                example.profile.push_back(ProfileEntry {.question = item.get<std::string>(), .narrative = {}});
            else if (item.is_object())
                example.profile.push_back(ProfileEntry {
                    .question = string_field(item, schema.profile_question_field, line, true),
                    .narrative = string_field(item, schema.profile_narrative_field, line, false),
                });
            else
                throw Error(ErrorCode::MalformedRecord, "line " + std::to_string(line) + ": bad profile entry");
        }
        if (example.profile.size() > profile_limit)
            example.profile.erase(example.profile.begin(),
                                  example.profile.end() - static_cast<std::ptrdiff_t>(profile_limit));

        for (auto const& item: array_field(record, schema.aspects_field, line))
        {
            if (item.is_string())
                example.aspects.push_back(RubricAspect {item.get<std::string>()});
            else if (item.is_object())
                example.aspects.push_back(RubricAspect {string_field(item, schema.aspect_text_field, line, true)});
            else
                throw Error(ErrorCode::MalformedRecord, "line " + std::to_string(line) + ": bad rubric aspect");
        }
        return example;
    }

    json sampling_json(const SamplingParams& s)
    {
        return {{"temperature", s.temperature}, {"top_p", s.nucleus_p}, {"max_output_tokens", s.max_output_tokens}};
    }

    void sampling_from(const json& j, SamplingParams& s)
    {
        s.temperature = j.value("temperature", s.temperature);
        s.nucleus_p = j.value("top_p", s.nucleus_p);
        s.max_output_tokens = j.value("max_output_tokens", s.max_output_tokens);
    }

    json backend_json(const BackendSettings& b)
    {
        return {
            {"kind", b.kind},           {"base_url", b.base_url},   {"model", b.model},
            {"script", b.script},       {"timeout_s", b.timeout_s}, {"retry_max", b.retry_max},
            {"context_window", b.context_window},
        };
    }

    void backend_from(const json& j, BackendSettings& b)
    {
        b.kind = j.value("kind", b.kind);
        b.base_url = j.value("base_url", b.base_url);
        b.model = j.value("model", b.model);
        b.script = j.value("script", b.script);
        b.timeout_s = j.value("timeout_s", b.timeout_s);
        b.retry_max = j.value("retry_max", b.retry_max);
        b.context_window = j.value("context_window", b.context_window);
    }

    json candidates_json(const CandidateSet& set)
    {
        auto out = json::array();
        for (auto const& c: set.candidates)
            out.push_back({{"pathway_index", c.pathway_index}, {"text", c.text}});
        return out;
    }

    json result_json(const ExperimentConfig& config, const Example& example, const aggregate::FinalResult& result,
                     const std::optional<std::string>& trace_file)
    {
        auto failures = json::array();
        for (auto const& f: result.failures)
            failures.push_back({{"index", f.pathway_index}, {"error", f.error}});
        return {
            {"question_id", example.question_id},
            {"method", to_string(config.method)},
            {"category", example.category_name},
            {"response", result.response},
            {"chosen_index", result.chosen_index ? json(*result.chosen_index) : json(nullptr)},
            {"preferences", result.preferences.text.empty() ? json(nullptr) : json(result.preferences.text)},
            {"candidate_count", result.candidates.size()},
            {"candidates", candidates_json(result.candidates)},
            {"failures", failures},
            {"trace_file", trace_file ? json(*trace_file) : json(nullptr)},
        };
    }

    aggregate::FinalResult single(std::string response)
    {
        auto result = aggregate::FinalResult {};
        result.response = std::move(response);
        return result;
    }

    aggregate::FinalResult run_method(const Runtime& rt, const ExperimentConfig& config, const Example& example)
    {
        auto options = config.baseline;
        options.seed = config.seed;
        options.parallelism = config.parallelism;
        switch (config.method)
        {
            case Method::Pot:
            {
                auto pot = config.pot;
                pot.seed = config.seed;
                pot.parallelism = config.parallelism;
                return aggregate::run_pot(rt, example, pot);
            }
            case Method::NoPersonalization: return single(baselines::run_no_personalization(rt, example, options));
            case Method::InContext: return single(baselines::run_in_context(rt, example, false, options));
            case Method::InContextCot: return single(baselines::run_in_context(rt, example, true, options));
            case Method::BestOfK: return baselines::run_best_of_k(rt, example, config.k, false, options);
            case Method::Tot: return baselines::run_tot(rt, example, config.tot, options);
        }
        throw Error(ErrorCode::InvalidConfig, "unhandled method");
    }

    json error_json(const std::string& question_id, std::string_view stage, const std::exception& e)
    {
        auto const* err = dynamic_cast<const Error*>(&e);
        return {
            {"question_id", question_id},
            {"stage", stage},
            {"code", err ? json(std::string(to_string(err->code()))) : json(nullptr)},
            {"error", e.what()},
        };
    }

    json ttest_json(const std::optional<eval::TTestResult>& t)
    {
        if (!t)
            return nullptr;
        // JSON has no infinity; the sign of an infinite t survives as a string.
        auto tValue = std::isfinite(t->t) ? json(t->t) : json(t->t > 0 ? "inf" : "-inf");
        return {{"t", tValue}, {"p", t->p}, {"significant", t->significant}};
    }

    // Fills the score fields of a summary from the score files on disk and writes it.
    RunSummary finish_summary(const fs::path& run_dir, RunSummary summary)
    {
        auto const scores = load_scores(run_dir);
        summary.scored = scores.size();
        summary.category_means = eval::category_means(scores);
        summary.macro = summary.category_means.empty() ? std::nullopt
                                                       : std::optional(eval::macro_average(summary.category_means));
        auto completed = std::size_t {0};
        if (fs::exists(run_dir / "results"))
            for (auto const& entry: fs::directory_iterator(run_dir / "results"))
                completed += entry.path().extension() == ".json" ? 1 : 0;
        summary.completed = completed;
        auto j = json {};
        to_json(j, summary);
        write_json(run_dir / "summary.json", j);
        return summary;
    }

    void score_results(const fs::path& run_dir, const std::vector<Example>& examples, const Runtime& rt,
                       std::size_t parallelism)
    {
        auto pending = std::vector<const Example*> {};
        for (auto const& example: examples)
        {
            auto const stem = file_stem(example.question_id);
            if (fs::exists(run_dir / "results" / (stem + ".json")) && !fs::exists(run_dir / "scores" / (stem + ".json")))
                pending.push_back(&example);
        }
        detail::parallel_for(pending.size(), parallelism, [&](std::size_t i) {
            auto const& example = *pending[i];
            auto const stem = file_stem(example.question_id);
            try
            {
                auto const result = read_json(run_dir / "results" / (stem + ".json"));
                auto options = eval::default_judge_options();
                options.lane = example.question_id + "/judge";
                options.sampling.seed = derive_seed(0, {example.question_id, "judge"});
                auto report = eval::score_response(rt, result.at("response").get<std::string>(), example.aspects,
                                                   example.question, options);
                report.question_id = example.question_id;
                report.category = example.category_name;
                auto j = json {};
                to_json(j, report);
                write_json(run_dir / "scores" / (stem + ".json"), j);
            }
            catch (const std::exception& e)
            {
                write_json(run_dir / "errors" / (stem + ".judge.json"), error_json(example.question_id, "judge", e));
            }
        });
    }
} // namespace

// ---------------------------------------------------------------------------
// Dataset
// ---------------------------------------------------------------------------

void to_json(json& j, const DatasetSchema& s)
{
    j = {
        {"id", s.id_field},
        {"question", s.question_field},
        {"profile", s.profile_field},
        {"profile_question", s.profile_question_field},
        {"profile_narrative", s.profile_narrative_field},
        {"narrative", s.narrative_field},
        {"aspects", s.aspects_field},
        {"aspect_text", s.aspect_text_field},
        {"category", s.category_field},
        {"default_category", s.default_category},
    };
}

void from_json(const json& j, DatasetSchema& s)
{
    auto const d = DatasetSchema {};
    s.id_field = j.value("id", d.id_field);
    s.question_field = j.value("question", d.question_field);
    s.profile_field = j.value("profile", d.profile_field);
    s.profile_question_field = j.value("profile_question", d.profile_question_field);
    s.profile_narrative_field = j.value("profile_narrative", d.profile_narrative_field);
    s.narrative_field = j.value("narrative", d.narrative_field);
    s.aspects_field = j.value("aspects", d.aspects_field);
    s.aspect_text_field = j.value("aspect_text", d.aspect_text_field);
    s.category_field = j.value("category", d.category_field);
    s.default_category = j.value("default_category", d.default_category);
}

DatasetSchema DatasetSchema::load(const fs::path& path)
{
    return read_json(path).get<DatasetSchema>();
}

std::vector<Example> parse_dataset(std::string_view jsonl, std::size_t profile_limit, const DatasetSchema& schema)
{
    if (profile_limit < 1)
        throw Error(ErrorCode::InvalidConfig, "profile_limit must be at least 1");
    auto examples = std::vector<Example> {};
    auto stream = std::istringstream(std::string(jsonl));
    auto line = std::string {};
    for (std::size_t lineNo = 1; std::getline(stream, line); ++lineNo)
    {
        if (text::trim(line).empty())
            continue;
        auto record = json {};
        try
        {
            record = json::parse(line);
        }
        catch (const json::exception& e)
        {
            throw Error(ErrorCode::MalformedRecord, "line " + std::to_string(lineNo) + ": " + e.what());
        }
        examples.push_back(parse_record(record, lineNo, profile_limit, schema));
    }
    return examples;
}

std::vector<Example> load_dataset(const fs::path& path, std::size_t profile_limit, const DatasetSchema& schema)
{
    if (!fs::is_regular_file(path))
        throw Error(ErrorCode::InvalidConfig, "dataset '" + path.string() + "' does not exist");
    return parse_dataset(read_file(path), profile_limit, schema);
}

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

void ExperimentConfig::validate() const
{
    auto const fail = [](const std::string& what) { throw Error(ErrorCode::InvalidConfig, what); };
    if (profile_limit < 1)
        fail("profile_limit must be at least 1");
    if (parallelism < 1)
        fail("parallelism must be at least 1");
    if (dataset_path.empty())
        fail("no dataset given");
    if (output_dir.empty())
        fail("no output directory given");
    switch (method)
    {
        case Method::Pot: pot.validate(); break;
        case Method::Tot: tot.validate(); break;
        case Method::BestOfK:
            if (k < 1)
                fail("k must be at least 1");
            break;
        default: break;
    }
    if (baseline.attempts < 1)
        fail("baseline.attempts must be at least 1");
}

void to_json(json& j, const ExperimentConfig& c)
{
    j = {
        {"method", to_string(c.method)},
        {"seed", c.seed},
        {"k", c.k},
        {"parallelism", c.parallelism},
        {"profile_limit", c.profile_limit},
        {"limit", c.limit},
        {"dataset", c.dataset_path},
        {"schema", c.schema_path},
        {"output_dir", c.output_dir},
        {"cache", c.cache_path},
        {"judge", c.judge},
        {"pot",
         {
             {"max_steps", c.pot.max_steps},
             {"pathways", c.pot.pathways},
             {"strategy", pathway::to_string(c.pot.strategy)},
             {"aggregation", pathway::to_string(c.pot.aggregation)},
             {"profile_fraction", c.pot.profile_fraction},
             {"planning_temperature", c.pot.planning_sampling.temperature},
             {"sampling", sampling_json(c.pot.base_sampling)},
             {"literal_n1", c.pot.literal_n1},
             {"first_planning_only", c.pot.first_planning_only},
             {"use_execution_template", c.pot.use_execution_template},
             {"parse_retry_max", c.pot.parse_retry_max},
         }},
        {"tot", {{"depth", c.tot.depth}, {"width", c.tot.width}, {"temperature", c.tot.sampling.temperature}}},
        {"baseline",
         {
             {"sampling", sampling_json(c.baseline.sampling)},
             {"sample_temperature", c.baseline.sample_sampling.temperature},
             {"attempts", c.baseline.attempts},
             {"literal_k1", c.baseline.literal_k1},
         }},
        {"backend", backend_json(c.backend)},
        {"judge_backend", backend_json(c.judge_backend)},
    };
}

void from_json(const json& j, ExperimentConfig& c)
{
    try
    {
        if (j.contains("method"))
            c.method = parse_method(j.at("method").get<std::string>());
        c.seed = j.value("seed", c.seed);
        c.k = j.value("k", c.k);
        c.parallelism = j.value("parallelism", c.parallelism);
        c.profile_limit = j.value("profile_limit", c.profile_limit);
        c.limit = j.value("limit", c.limit);
        c.dataset_path = j.value("dataset", c.dataset_path);
        c.schema_path = j.value("schema", c.schema_path);
        c.output_dir = j.value("output_dir", c.output_dir);
        c.cache_path = j.value("cache", c.cache_path);
        c.judge = j.value("judge", c.judge);
        if (auto const p = j.find("pot"); p != j.end())
        {
            c.pot.max_steps = p->value("max_steps", c.pot.max_steps);
            c.pot.pathways = p->value("pathways", c.pot.pathways);
            if (p->contains("strategy"))
                c.pot.strategy = pathway::parse_strategy(p->at("strategy").get<std::string>());
            if (p->contains("aggregation"))
                c.pot.aggregation = pathway::parse_aggregation(p->at("aggregation").get<std::string>());
            c.pot.profile_fraction = p->value("profile_fraction", c.pot.profile_fraction);
            c.pot.planning_sampling.temperature = p->value("planning_temperature", c.pot.planning_sampling.temperature);
            if (p->contains("sampling"))
            {
                sampling_from(p->at("sampling"), c.pot.base_sampling);
                c.pot.planning_sampling.nucleus_p = c.pot.base_sampling.nucleus_p;
                c.pot.planning_sampling.max_output_tokens = c.pot.base_sampling.max_output_tokens;
            }
            if (p->contains("tau"))
                c.pot.set_tau(p->at("tau").get<double>());
            c.pot.literal_n1 = p->value("literal_n1", c.pot.literal_n1);
            c.pot.first_planning_only = p->value("first_planning_only", c.pot.first_planning_only);
            c.pot.use_execution_template = p->value("use_execution_template", c.pot.use_execution_template);
            c.pot.parse_retry_max = p->value("parse_retry_max", c.pot.parse_retry_max);
        }
        if (auto const t = j.find("tot"); t != j.end())
        {
            c.tot.depth = t->value("depth", c.tot.depth);
            c.tot.width = t->value("width", c.tot.width);
            c.tot.sampling.temperature = t->value("temperature", c.tot.sampling.temperature);
        }
        if (auto const b = j.find("baseline"); b != j.end())
        {
            if (b->contains("sampling"))
                sampling_from(b->at("sampling"), c.baseline.sampling);
            c.baseline.sample_sampling.temperature =
                b->value("sample_temperature", c.baseline.sample_sampling.temperature);
            c.baseline.attempts = b->value("attempts", c.baseline.attempts);
            c.baseline.literal_k1 = b->value("literal_k1", c.baseline.literal_k1);
        }
        if (auto const b = j.find("backend"); b != j.end())
            backend_from(*b, c.backend);
        if (auto const b = j.find("judge_backend"); b != j.end())
            backend_from(*b, c.judge_backend);
    }
    catch (const json::exception& e)
    {
        throw Error(ErrorCode::InvalidConfig, std::string("bad config value: ") + e.what());
    }
}

// ---------------------------------------------------------------------------
// Backends
// ---------------------------------------------------------------------------

std::string synthetic_reply(const llm::CompletionRequest& request)
{
    auto const& prompt = request.messages.empty() ? std::string {} : request.messages.back().text;
    auto const tag = std::string_view(request.tag);
    if (tag == "action_selection")
    {
        auto steps = std::size_t {0};
        for (auto pos = prompt.find("Selected action:"); pos != std::string::npos;
             pos = prompt.find("Selected action:", pos + 1))
            ++steps;
        auto const action = steps == 0 ? Action::Planning : steps == 1 ? Action::Answering : Action::Finalizing;
        return std::string(action_name(action));
    }
    if (tag == "best_of_n" || tag == "tot_select_plan")
        return "0";
    if (tag == "judge_aspect")
        return std::to_string(std::stoul(sha256_hex(prompt).substr(0, 8), nullptr, 16) % 3);
    if (tag == "baseline_cot")
        return "Reasoning about the question.\nResponse: synthetic answer " + sha256_hex(prompt).substr(0, 8);
    return "synthetic " + request.tag + " " + sha256_hex(prompt).substr(0, 8);
}

std::shared_ptr<llm::Backend> make_backend(const BackendSettings& settings, std::shared_ptr<llm::ResponseCache> cache)
{
    auto backend = std::shared_ptr<llm::Backend> {};
    if (settings.kind == "http")
    {
        auto http = llm::HttpBackendConfig {};
        http.base_url = settings.base_url;
        http.model = settings.model;
        http.timeout = std::chrono::seconds(settings.timeout_s);
        backend = std::make_shared<llm::HttpBackend>(llm::with_env_credentials(std::move(http)));
    }
    else if (settings.kind == "scripted")
    {
        if (settings.script.empty())
            throw Error(ErrorCode::InvalidConfig, "scripted backend needs a script file");
        backend = std::shared_ptr<llm::Backend>(llm::ScriptedBackend::from_json(read_json(settings.script)));
    }
    else if (settings.kind == "synthetic")
    {
        auto scripted = std::make_shared<llm::ScriptedBackend>();
        scripted->set_responder(synthetic_reply);
        backend = scripted;
    }
    else if (settings.kind == "offline")
    {
        backend = std::make_shared<llm::OfflineBackend>();
    }
    else
    {
        throw Error(ErrorCode::InvalidConfig, "unknown backend kind '" + settings.kind + "'");
    }

    auto limits = llm::ContextLimits {};
    limits.context_limit = settings.context_window;
    backend->set_limits(limits);
    auto retry = llm::RetryPolicy {};
    retry.retry_max = settings.retry_max;
    backend->set_retry_policy(retry);

    if (!cache)
        return backend;
    auto cached = std::make_shared<llm::CachedBackend>(std::move(backend), std::move(cache));
    cached->set_limits(limits);
    return cached;
}

// ---------------------------------------------------------------------------
// Runs
// ---------------------------------------------------------------------------

void to_json(json& j, const RunSummary& s)
{
    j = {
        {"examples", s.examples},
        {"completed", s.completed},
        {"executed", s.executed},
        {"skipped", s.skipped},
        {"failed", s.failed},
        {"scored", s.scored},
        {"category_means", s.category_means},
        {"macro", s.macro ? json(*s.macro) : json(nullptr)},
    };
}

RunSummary run_experiment(const ExperimentConfig& config, llm::Backend& backend, llm::Backend* judge_backend,
                          const prompts::TemplateRegistry& prompts)
{
    config.validate();
    if (config.judge && !judge_backend)
        throw Error(ErrorCode::InvalidConfig, "judging is enabled but no judge backend was given");
    auto const schema = config.schema_path.empty() ? DatasetSchema {} : DatasetSchema::load(config.schema_path);
    auto examples = load_dataset(config.dataset_path, config.profile_limit, schema);
    if (config.limit > 0 && examples.size() > config.limit)
        examples.resize(config.limit);
    {
        auto seen = std::set<std::string> {};
        for (auto const& e: examples)
            if (!seen.insert(file_stem(e.question_id)).second)
                throw Error(ErrorCode::InvalidConfig, "duplicate question id '" + e.question_id + "'");
    }

    auto const started = utc_now();
    auto const dir = fs::path(config.output_dir);
    for (auto const* sub: {"results", "traces", "errors"})
        fs::create_directories(dir / sub);

    auto const rt = Runtime {.backend = backend, .prompts = prompts};
    auto executed = std::atomic<std::size_t> {0};
    auto skipped = std::atomic<std::size_t> {0};
    auto failed = std::atomic<std::size_t> {0};
    detail::parallel_for(examples.size(), config.parallelism, [&](std::size_t i) {
        auto const& example = examples[i];
        auto const stem = file_stem(example.question_id);
        auto const resultPath = dir / "results" / (stem + ".json");
        if (fs::exists(resultPath))
        {
            ++skipped;
            return;
        }
        ++executed;
        try
        {
            auto const result = run_method(rt, config, example);
            auto traceFile = std::optional<std::string> {};
            if (config.method == Method::Pot)
            {
                traceFile = "traces/" + stem + ".jsonl";
                write_file(dir / *traceFile, traces_to_jsonl(result.traces));
            }
            write_json(resultPath, result_json(config, example, result, traceFile));
            fs::remove(dir / "errors" / (stem + ".json"));
        }
        catch (const std::exception& e)
        {
            ++failed;
            write_json(dir / "errors" / (stem + ".json"), error_json(example.question_id, "run", e));
        }
    });

    if (config.judge)
    {
        auto const judgeRt = Runtime {.backend = *judge_backend, .prompts = prompts};
        score_results(dir, examples, judgeRt, config.parallelism);
    }

    auto summary = RunSummary {};
    summary.examples = examples.size();
    summary.executed = executed.load();
    summary.skipped = skipped.load();
    summary.failed = failed.load();
    summary = finish_summary(dir, summary);

    // The replayable part is a pure function of config, templates and dataset; run
    // bookkeeping that differs between invocations lives under "run".
    auto configJson = json {};
    to_json(configJson, config);
    configJson.erase("output_dir");
    configJson.erase("cache");
    auto seeds = json::object();
    if (config.method == Method::Pot)
        for (auto const& e: examples)
        {
            auto pot = config.pot;
            pot.seed = config.seed;
            auto list = json::array();
            for (std::size_t p = 0; p < pot.pathways; ++p)
                list.push_back(pathway::pathway_seed(pot, e.question_id, p));
            seeds[e.question_id] = list;
        }
    auto const manifest = json {
        {"replayable",
         {
             {"config", configJson},
             {"templates", {{"version", prompts.version()}, {"sha256", prompts.hashes()}}},
             {"dataset_sha256", sha256_hex(read_file(config.dataset_path))},
             {"seed", config.seed},
             {"pathway_seeds", seeds},
         }},
        {"run",
         {
             {"started_at", started},
             {"finished_at", utc_now()},
             {"output_dir", config.output_dir},
             {"cache", config.cache_path.empty() ? json(nullptr) : json(config.cache_path)},
         }},
    };
    write_json(dir / "manifest.json", manifest);
    return summary;
}

RunSummary judge_run(const fs::path& run_dir, const std::vector<Example>& examples, llm::Backend& judge_backend,
                     const prompts::TemplateRegistry& prompts, std::size_t parallelism)
{
    if (!fs::is_directory(run_dir / "results"))
        throw Error(ErrorCode::InvalidConfig, "'" + run_dir.string() + "' holds no results");
    auto const rt = Runtime {.backend = judge_backend, .prompts = prompts};
    score_results(run_dir, examples, rt, parallelism);

    auto summary = RunSummary {};
    summary.examples = examples.size();
    if (fs::exists(run_dir / "summary.json"))
    {
        auto const previous = read_json(run_dir / "summary.json");
        summary.executed = previous.value("executed", std::size_t {0});
        summary.skipped = previous.value("skipped", std::size_t {0});
        summary.failed = previous.value("failed", std::size_t {0});
    }
    return finish_summary(run_dir, summary);
}

std::vector<eval::ScoreReport> load_scores(const fs::path& run_dir)
{
    auto reports = std::vector<eval::ScoreReport> {};
    if (!fs::is_directory(run_dir / "scores"))
        return reports;
    auto files = std::vector<fs::path> {};
    for (auto const& entry: fs::directory_iterator(run_dir / "scores"))
        if (entry.path().extension() == ".json")
            files.push_back(entry.path());
    std::ranges::sort(files);
    for (auto const& file: files)
    {
        try
        {
            reports.push_back(read_json(file).get<eval::ScoreReport>());
        }
        catch (const json::exception& e)
        {
            throw Error(ErrorCode::MalformedRecord, file.string() + ": " + e.what());
        }
    }
    return reports;
}

void to_json(json& j, const ComparisonReport& r)
{
    auto categories = json::object();
    for (auto const& [name, c]: r.categories)
        categories[name] = {
            {"mean_a", c.mean_a},
            {"mean_b", c.mean_b},
            {"relative_improvement", c.relative_improvement ? json(*c.relative_improvement) : json(nullptr)},
            {"t_test", ttest_json(c.t_test)},
        };
    j = {
        {"questions", r.questions},
        {"categories", categories},
        {"macro_a", r.macro_a},
        {"macro_b", r.macro_b},
        {"relative_improvement", r.relative_improvement ? json(*r.relative_improvement) : json(nullptr)},
        {"t_test", ttest_json(r.t_test)},
    };
}

ComparisonReport compare_scores(const std::vector<eval::ScoreReport>& a, const std::vector<eval::ScoreReport>& b)
{
    auto byId = [](const std::vector<eval::ScoreReport>& reports) {
        auto out = std::map<std::string, const eval::ScoreReport*> {};
        for (auto const& r: reports)
            out[r.question_id] = &r;
        return out;
    };
    auto const mapA = byId(a);
    auto const mapB = byId(b);
    auto keysA = std::vector<std::string> {};
    auto keysB = std::vector<std::string> {};
    for (auto const& [id, r]: mapA)
        keysA.push_back(id);
    for (auto const& [id, r]: mapB)
        keysB.push_back(id);
    if (keysA != keysB || keysA.size() != a.size() || keysB.size() != b.size())
        throw Error(ErrorCode::QuestionSetMismatch, "runs scored different question sets (" + std::to_string(a.size())
                                                        + " vs " + std::to_string(b.size()) + " scores)");
    if (keysA.empty())
        throw Error(ErrorCode::InvalidArgument, "no scored questions to compare");

    auto const paired_test = [](const std::vector<double>& x, const std::vector<double>& y) {
        return x.size() >= 2 ? std::optional(eval::paired_t_test(x, y)) : std::nullopt;
    };
    auto const improvement = [](double na, double nb) {
        return nb > 0.0 ? std::optional(eval::relative_improvement(na, nb)) : std::nullopt;
    };

    auto report = ComparisonReport {};
    report.questions = keysA.size();
    auto perCategory = std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> {};
    auto allA = std::vector<double> {};
    auto allB = std::vector<double> {};
    for (auto const& id: keysA)
    {
        auto const& ra = *mapA.at(id);
        auto const& rb = *mapB.at(id);
        perCategory[ra.category].first.push_back(ra.question_score);
        perCategory[ra.category].second.push_back(rb.question_score);
        allA.push_back(ra.question_score);
        allB.push_back(rb.question_score);
    }
    auto meansA = std::map<std::string, double> {};
    auto meansB = std::map<std::string, double> {};
    for (auto const& [name, scores]: perCategory)
    {
        auto const mean = [](const std::vector<double>& v) {
            return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
        };
        auto& c = report.categories[name];
        c.mean_a = meansA[name] = mean(scores.first);
        c.mean_b = meansB[name] = mean(scores.second);
        c.relative_improvement = improvement(c.mean_a, c.mean_b);
        c.t_test = paired_test(scores.first, scores.second);
    }
    report.macro_a = eval::macro_average(meansA);
    report.macro_b = eval::macro_average(meansB);
    report.relative_improvement = improvement(report.macro_a, report.macro_b);
    report.t_test = paired_test(allA, allB);
    return report;
}

ComparisonReport compare_runs(const fs::path& run_a, const fs::path& run_b)
{
    return compare_scores(load_scores(run_a), load_scores(run_b));
}

std::vector<PathwayTrace> load_traces(const fs::path& run_dir)
{
    auto traces = std::vector<PathwayTrace> {};
    if (!fs::is_directory(run_dir / "traces"))
        return traces;
    auto files = std::vector<fs::path> {};
    for (auto const& entry: fs::directory_iterator(run_dir / "traces"))
        if (entry.path().extension() == ".jsonl")
            files.push_back(entry.path());
    std::ranges::sort(files);
    for (auto const& file: files)
    {
        try
        {
            auto part = traces_from_jsonl(read_file(file));
            std::ranges::move(part, std::back_inserter(traces));
        }
        catch (const Error& e)
        {
            throw Error(e.code(), file.string() + ": " + e.what());
        }
    }
    return traces;
}

ExperimentConfig load_manifest_config(const fs::path& run_dir)
{
    auto const manifest = read_json(run_dir / "manifest.json");
    auto const it = manifest.find("replayable");
    if (it == manifest.end() || !it->contains("config"))
        throw Error(ErrorCode::MalformedRecord, (run_dir / "manifest.json").string() + " has no recorded config");
    auto config = ExperimentConfig {};
    from_json(it->at("config"), config);
    return config;
}

} // namespace pot::harness
