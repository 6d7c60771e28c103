// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "pot/aggregate.hpp"
#include "pot/backends.hpp"
#include "pot/baselines.hpp"
#include "pot/domain.hpp"
#include "pot/eval.hpp"
#include "pot/llm.hpp"
#include "pot/pathway.hpp"
#include "pot/prompts.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace pot::harness
{

enum class Method
{
    Pot,
    NoPersonalization,
    InContext,
    InContextCot,
    BestOfK,
    Tot,
};

std::string_view to_string(Method method) noexcept;
Method parse_method(std::string_view name);

// ---------------------------------------------------------------------------
// Dataset
// ---------------------------------------------------------------------------

/// Field names of the line-delimited dataset records. Profile and rubric items may be
/// objects (read through the *_field names) or plain strings.
struct DatasetSchema
{
    std::string id_field = "id";
    std::string question_field = "question";
    std::string profile_field = "profile";
    std::string profile_question_field = "text";
    std::string profile_narrative_field = "description"; ///< Optional per entry.
    std::string narrative_field = "narrative";           ///< Optional.
    std::string aspects_field = "rubric_aspects";
    std::string aspect_text_field = "aspect";
    std::string category_field = "category"; ///< Optional; default_category when absent.
    std::string default_category = "Other";

    static DatasetSchema load(const std::filesystem::path& path);
};

void to_json(nlohmann::json& j, const DatasetSchema& schema);
void from_json(const nlohmann::json& j, DatasetSchema& schema);

/// Parses a JSONL dataset. Profiles keep their last profile_limit entries in dataset
/// order. Malformed lines raise MalformedRecord with the 1-based line number; records
/// without an id, question, profile or aspects raise MissingField.
std::vector<Example> load_dataset(const std::filesystem::path& path, std::size_t profile_limit,
                                  const DatasetSchema& schema = {});

std::vector<Example> parse_dataset(std::string_view jsonl, std::size_t profile_limit,
                                   const DatasetSchema& schema = {});

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

struct BackendSettings
{
    std::string kind = "synthetic"; ///< http | scripted | synthetic | offline
    std::string base_url = "https://api.openai.com/v1";
    std::string model;
    std::string script; ///< Script file for kind=scripted.
    int timeout_s = 120;
    int retry_max = 5;
    std::size_t context_window = 32768;

    bool operator==(const BackendSettings&) const = default;
};

struct ExperimentConfig
{
    Method method = Method::Pot;
    std::uint64_t seed = 0;
    pathway::PotConfig pot;
    baselines::TotConfig tot;
    std::size_t k = 4; ///< Best-of-K samples.
    baselines::BaselineOptions baseline;
    std::string dataset_path;
    std::string schema_path; ///< Empty: built-in schema.
    std::string output_dir = "runs/default";
    std::string cache_path; ///< Empty: no response cache.
    std::size_t parallelism = 1;
    std::size_t profile_limit = 10;
    std::size_t limit = 0; ///< Run only the first `limit` examples; 0 runs all.
    BackendSettings backend;
    bool judge = false;
    BackendSettings judge_backend;

    void validate() const;
};

/// Flat keys mirror the CLI flags: {"method", "seed", "pot": {...}, "tot": {...}, ...}.
void to_json(nlohmann::json& j, const ExperimentConfig& config);
void from_json(const nlohmann::json& j, ExperimentConfig& config);

// ---------------------------------------------------------------------------
// Backends
// ---------------------------------------------------------------------------

/// Deterministic offline stand-in for a model. Replies depend only on the request: a
/// selection picks planning, answering, then finalizing; index prompts get "0"; judge
/// prompts get a digit derived from the request hash; everything else gets a short
/// text naming the operation.
std::string synthetic_reply(const llm::CompletionRequest& request);

/// Builds the backend described by settings, wrapped in a CachedBackend over cache
/// when one is given.
std::shared_ptr<llm::Backend> make_backend(const BackendSettings& settings,
                                           std::shared_ptr<llm::ResponseCache> cache = nullptr);

// ---------------------------------------------------------------------------
// Runs
// ---------------------------------------------------------------------------

struct RunSummary
{
    std::size_t examples = 0;
    std::size_t completed = 0; ///< Results on disk after the run, including resumed ones.
    std::size_t executed = 0;  ///< Examples run in this invocation.
    std::size_t skipped = 0;   ///< Examples whose result already existed.
    std::size_t failed = 0;
    std::size_t scored = 0;
    std::map<std::string, double> category_means;
    std::optional<double> macro;
};

void to_json(nlohmann::json& j, const RunSummary& summary);

/// Runs config.method over the dataset and writes, under output_dir:
///   results/<qid>.json, traces/<qid>.jsonl (Pot), scores/<qid>.json (when judging),
///   errors/<qid>.json for failed questions, summary.json and manifest.json.
/// Questions whose result file exists are skipped. Config and dataset errors are
/// raised before anything is written.
RunSummary run_experiment(const ExperimentConfig& config, llm::Backend& backend, llm::Backend* judge_backend,
                          const prompts::TemplateRegistry& prompts);

/// Scores every result in run_dir that has no score file yet and rewrites summary.json.
RunSummary judge_run(const std::filesystem::path& run_dir, const std::vector<Example>& examples,
                     llm::Backend& judge_backend, const prompts::TemplateRegistry& prompts, std::size_t parallelism = 1);

std::vector<eval::ScoreReport> load_scores(const std::filesystem::path& run_dir);

struct CategoryComparison
{
    double mean_a = 0.0;
    double mean_b = 0.0;
    std::optional<double> relative_improvement; ///< Absent when mean_b <= 0.
    std::optional<eval::TTestResult> t_test;    ///< Absent with fewer than two questions.
};

struct ComparisonReport
{
    std::map<std::string, CategoryComparison> categories;
    double macro_a = 0.0;
    double macro_b = 0.0;
    std::optional<double> relative_improvement;
    std::optional<eval::TTestResult> t_test;
    std::size_t questions = 0;
};

void to_json(nlohmann::json& j, const ComparisonReport& report);

/// Compares run A against baseline run B over their score files. Both runs must have
/// scored exactly the same question ids.
ComparisonReport compare_runs(const std::filesystem::path& run_a, const std::filesystem::path& run_b);
ComparisonReport compare_scores(const std::vector<eval::ScoreReport>& a, const std::vector<eval::ScoreReport>& b);

/// All traces recorded under run_dir/traces, ordered by question id.
std::vector<PathwayTrace> load_traces(const std::filesystem::path& run_dir);

/// Reads the config recorded in run_dir/manifest.json.
ExperimentConfig load_manifest_config(const std::filesystem::path& run_dir);

} // namespace pot::harness
