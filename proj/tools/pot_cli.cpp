// SPDX-License-Identifier: Apache-2.0
// Command line front end: run, judge, compare, stats, replay, tally.

#include "pot/backends.hpp"
#include "pot/error.hpp"
#include "pot/eval.hpp"
#include "pot/harness.hpp"
#include "pot/pathway.hpp"
#include "pot/prompts.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace pot;

namespace
{

struct StringKnobs
{
    std::string method = "pot";
    std::string strategy = "planning-action-variation";
    std::string aggregation = "mixture-of-n";
    std::optional<double> tau;
    std::string config_file;
};

void add_backend_options(CLI::App& app, const std::string& prefix, harness::BackendSettings& b)
{
    app.add_option("--" + prefix + ".kind", b.kind, "http | scripted | synthetic | offline")->capture_default_str();
    app.add_option("--" + prefix + ".base_url", b.base_url, "Chat-completion endpoint prefix")->capture_default_str();
    app.add_option("--" + prefix + ".model", b.model, "Model name sent to the endpoint");
    app.add_option("--" + prefix + ".script", b.script, "Reply script (JSON) for kind=scripted");
    app.add_option("--" + prefix + ".timeout_s", b.timeout_s)->capture_default_str();
    app.add_option("--" + prefix + ".retry_max", b.retry_max)->capture_default_str();
    app.add_option("--" + prefix + ".context_window", b.context_window)->capture_default_str();
}

// Every key of the experiment config gets a flag of the same dotted name:
// {"pot": {"max_steps": 8}} in the config file is --pot.max_steps 8 on the command line.
void add_config_options(CLI::App& app, harness::ExperimentConfig& c, StringKnobs& knobs)
{
    app.add_option("--config", knobs.config_file, "Experiment config file (JSON); flags override it");
    app.add_option("--method", knobs.method,
                   "pot | no-personalization | in-context | in-context-cot | best-of-k | tot")
        ->capture_default_str();
    app.add_option("--seed", c.seed)->capture_default_str();
    app.add_option("--k", c.k, "Best-of-K samples")->capture_default_str();
    app.add_option("--parallelism", c.parallelism)->capture_default_str();
    app.add_option("--profile_limit", c.profile_limit)->capture_default_str();
    app.add_option("--limit", c.limit, "Only the first N examples (0: all)")->capture_default_str();
    app.add_option("--dataset", c.dataset_path, "JSONL dataset");
    app.add_option("--schema", c.schema_path, "Dataset field mapping (JSON)");
    app.add_option("--output_dir", c.output_dir)->capture_default_str();
    app.add_option("--cache", c.cache_path, "Response cache file (JSONL)");
    app.add_flag("--judge", c.judge, "Score responses after generation");

    app.add_option("--pot.max_steps", c.pot.max_steps)->capture_default_str();
    app.add_option("--pot.pathways", c.pot.pathways)->capture_default_str();
    app.add_option("--pot.strategy", knobs.strategy, "planning-action-variation | initial-state-alteration")
        ->capture_default_str();
    app.add_option("--pot.aggregation", knobs.aggregation, "mixture-of-n | best-of-n")->capture_default_str();
    app.add_option("--pot.tau", knobs.tau, "Diversity knob of the chosen strategy");
    app.add_option("--pot.profile_fraction", c.pot.profile_fraction)->capture_default_str();
    app.add_option("--pot.planning_temperature", c.pot.planning_sampling.temperature)->capture_default_str();
    app.add_option("--pot.temperature", c.pot.base_sampling.temperature)->capture_default_str();
    app.add_option("--pot.top_p", c.pot.base_sampling.nucleus_p)->capture_default_str();
    app.add_option("--pot.max_output_tokens", c.pot.base_sampling.max_output_tokens)->capture_default_str();
    app.add_option("--pot.literal_n1", c.pot.literal_n1)->capture_default_str();
    app.add_option("--pot.first_planning_only", c.pot.first_planning_only)->capture_default_str();
    app.add_option("--pot.use_execution_template", c.pot.use_execution_template)->capture_default_str();
    app.add_option("--pot.parse_retry_max", c.pot.parse_retry_max)->capture_default_str();

    app.add_option("--tot.depth", c.tot.depth)->capture_default_str();
    app.add_option("--tot.width", c.tot.width)->capture_default_str();
    app.add_option("--tot.temperature", c.tot.sampling.temperature)->capture_default_str();

    app.add_option("--baseline.temperature", c.baseline.sampling.temperature)->capture_default_str();
    app.add_option("--baseline.sample_temperature", c.baseline.sample_sampling.temperature)->capture_default_str();
    app.add_option("--baseline.attempts", c.baseline.attempts)->capture_default_str();
    app.add_option("--baseline.literal_k1", c.baseline.literal_k1)->capture_default_str();

    add_backend_options(app, "backend", c.backend);
    add_backend_options(app, "judge_backend", c.judge_backend);
}

// The config file first, then every flag given on the command line on top of it.
harness::ExperimentConfig resolve(CLI::App& app, harness::ExperimentConfig flags, const StringKnobs& knobs)
{
    auto config = harness::ExperimentConfig {};
    if (!knobs.config_file.empty())
    {
        auto in = std::ifstream(knobs.config_file);
        if (!in)
            throw Error(ErrorCode::Io, "cannot read " + knobs.config_file);
        config = json::parse(in).get<harness::ExperimentConfig>();
    }
    auto flagsJson = json(flags);
    auto merged = json(config);
    auto const set = [&](const std::string& flag) {
        auto const* option = app.get_option_no_throw("--" + flag);
        return option != nullptr && option->count() > 0;
    };
    for (auto const& [key, value]: flagsJson.items())
    {
        if (value.is_object())
        {
            for (auto const& [sub, subValue]: value.items())
            {
                if (sub == "sampling")
                {
                    for (auto const& [leaf, leafValue]: subValue.items())
                        if (set(key + "." + leaf))
                            merged[key]["sampling"][leaf] = leafValue;
                }
                else if (set(key + "." + sub))
                {
                    merged[key][sub] = subValue;
                }
            }
        }
        else if (set(key))
        {
            merged[key] = value;
        }
    }
    if (set("baseline.temperature"))
        merged["baseline"]["sampling"]["temperature"] = flags.baseline.sampling.temperature;
    if (set("pot.temperature"))
        merged["pot"]["sampling"]["temperature"] = flags.pot.base_sampling.temperature;
    if (set("method"))
        merged["method"] = knobs.method;
    if (set("pot.strategy"))
        merged["pot"]["strategy"] = knobs.strategy;
    if (set("pot.aggregation"))
        merged["pot"]["aggregation"] = knobs.aggregation;
    if (knobs.tau)
        merged["pot"]["tau"] = *knobs.tau;
    return merged.get<harness::ExperimentConfig>();
}

prompts::TemplateRegistry load_prompts(const std::string& dir)
{
    return prompts::TemplateRegistry::load(dir.empty() ? prompts::default_directory() : fs::path(dir));
}

std::shared_ptr<llm::ResponseCache> open_cache(const std::string& path)
{
    return path.empty() ? nullptr : std::make_shared<llm::ResponseCache>(path);
}

void print_json(const json& j) { std::cout << j.dump(2) << "\n"; }

std::size_t live_calls(const std::shared_ptr<llm::Backend>& backend)
{
    if (auto const* cached = dynamic_cast<const llm::CachedBackend*>(backend.get()))
        return cached->live_calls();
    return 0;
}

// With offline set, every request must be answered by the cache; the recorded backend
// settings stay in the config so the manifest matches the original run.
int execute(const harness::ExperimentConfig& config, const std::string& prompts_dir, bool offline = false)
{
    auto const registry = load_prompts(prompts_dir);
    auto const cache = open_cache(config.cache_path);
    auto offlineSettings = harness::BackendSettings {};
    offlineSettings.kind = "offline";
    auto const backend = harness::make_backend(offline ? offlineSettings : config.backend, cache);
    auto const judge =
        config.judge ? harness::make_backend(offline ? offlineSettings : config.judge_backend, cache) : nullptr;
    auto const summary = harness::run_experiment(config, *backend, judge.get(), registry);
    auto out = json(summary);
    if (cache)
        out["live_calls"] = live_calls(backend) + (judge ? live_calls(judge) : 0);
    print_json(out);
    return summary.failed == 0 ? 0 : 3;
}

} // namespace

int main(int argc, char** argv)
{
    auto app = CLI::App {"Multi-pathway personalized answering: run, judge, compare and replay experiments"};
    app.require_subcommand(1);
    auto promptsDir = std::string {};
    app.add_option("--prompts", promptsDir, "Template directory (default: POT_PROMPTS_DIR or the built-in path)");

    // run
    auto runConfig = harness::ExperimentConfig {};
    auto runKnobs = StringKnobs {};
    auto* run = app.add_subcommand("run", "Execute a method over a dataset");
    add_config_options(*run, runConfig, runKnobs);

    // judge
    auto judgeRun = std::string {};
    auto judgeConfig = harness::ExperimentConfig {};
    auto judgeKnobs = StringKnobs {};
    auto* judge = app.add_subcommand("judge", "Score the responses of a run");
    judge->add_option("--run", judgeRun, "Run directory")->required();
    add_config_options(*judge, judgeConfig, judgeKnobs);

    // compare
    auto runA = std::string {};
    auto runB = std::string {};
    auto* compare = app.add_subcommand("compare", "Compare run A against baseline run B");
    compare->add_option("a", runA, "Run directory A")->required();
    compare->add_option("b", runB, "Baseline run directory B")->required();

    // stats
    auto statsRun = std::string {};
    auto* stats = app.add_subcommand("stats", "Pathway statistics of a run");
    stats->add_option("--run", statsRun, "Run directory")->required();

    // replay
    auto replayRun = std::string {};
    auto replayOut = std::string {};
    auto replayCache = std::string {};
    auto* replay = app.add_subcommand("replay", "Rerun a recorded run from the response cache only");
    replay->add_option("--run", replayRun, "Recorded run directory")->required();
    replay->add_option("--output_dir", replayOut, "Where to write the replayed artifacts")->required();
    replay->add_option("--cache", replayCache, "Response cache of the recorded run")->required();

    // tally
    auto tallyCsv = std::string {};
    auto* tally = app.add_subcommand("tally", "Summarize human pairwise verdicts (CSV)");
    tally->add_option("csv", tallyCsv, "CSV with question_id,verdict[,verdict2]")->required();

    CLI11_PARSE(app, argc, argv);

    try
    {
        if (*run)
            return execute(resolve(*run, runConfig, runKnobs), promptsDir);

        if (*judge)
        {
            auto const config = resolve(*judge, judgeConfig, judgeKnobs);
            auto const schema =
                config.schema_path.empty() ? harness::DatasetSchema {} : harness::DatasetSchema::load(config.schema_path);
            auto const examples = harness::load_dataset(config.dataset_path, config.profile_limit, schema);
            auto const registry = load_prompts(promptsDir);
            auto const backend = harness::make_backend(config.judge_backend, open_cache(config.cache_path));
            print_json(harness::judge_run(judgeRun, examples, *backend, registry, config.parallelism));
            return 0;
        }

        if (*compare)
        {
            print_json(harness::compare_runs(runA, runB));
            return 0;
        }

        if (*stats)
        {
            auto const traces = harness::load_traces(statsRun);
            auto const s = pathway::pathway_stats(traces);
            auto histogram = json::object();
            for (auto const& [length, count]: s.length_histogram)
                histogram[std::to_string(length)] = count;
            print_json({{"traces", traces.size()},
                        {"unique_sequences", s.unique_sequences},
                        {"mean_actions", s.mean_actions},
                        {"length_histogram", histogram}});
            return 0;
        }

        if (*replay)
        {
            auto config = harness::load_manifest_config(replayRun);
            config.output_dir = replayOut;
            config.cache_path = replayCache;
            return execute(config, promptsDir, true);
        }

        if (*tally)
        {
            auto in = std::ifstream(tallyCsv);
            if (!in)
                throw Error(ErrorCode::Io, "cannot read " + tallyCsv);
            auto buffer = std::ostringstream {};
            buffer << in.rdbuf();
            auto const records = eval::parse_human_eval_csv(buffer.str());
            auto first = std::vector<eval::Verdict> {};
            auto second = std::vector<eval::Verdict> {};
            for (auto const& r: records)
            {
                first.push_back(r.verdict);
                if (r.verdict2)
                    second.push_back(*r.verdict2);
            }
            auto const t = eval::tally_human_eval(first);
            auto out = json {{"count", t.count}, {"pct_a", t.pct_a}, {"pct_b", t.pct_b}, {"pct_tie", t.pct_tie}};
            if (!second.empty())
                out["cohens_kappa"] = eval::cohens_kappa(first, second);
            print_json(out);
            return 0;
        }
    }
    catch (const std::exception& e)
    {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
