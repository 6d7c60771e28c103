// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "pot/aggregate.hpp"
#include "pot/domain.hpp"
#include "pot/runtime.hpp"

#include <nlohmann/json.hpp>

#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace pot::eval
{

struct ScoreReport
{
    std::string question_id;
    std::string category;
    std::vector<int> per_aspect; ///< Each in {0, 1, 2}.
    double question_score = 0.0; ///< mean(per_aspect) / 2

    bool operator==(const ScoreReport&) const = default;
};

/// {question_id, category, per_aspect, question_score}
void to_json(nlohmann::json& j, const ScoreReport& report);
void from_json(const nlohmann::json& j, ScoreReport& report);

/// Judge sampling defaults to greedy decoding.
aggregate::CallOptions default_judge_options();

/// Asks the judge to rate coverage of one aspect on the 0/1/2 scale. Replies whose
/// first number is not 0, 1 or 2 are re-asked; after options.attempts tries the call
/// fails with UnparseableScore.
int judge_aspect(const Runtime& rt, std::string_view response, const RubricAspect& aspect, std::string_view question,
                 const aggregate::CallOptions& options = default_judge_options());

/// Mean of the per-aspect scores, each divided by 2. Scores outside {0,1,2} are an error.
double normalized_score(std::span<const int> per_aspect);

/// Judges every aspect and returns the per-aspect scores with the normalized mean.
/// Each aspect is judged on its own lane ("<lane>/<i>") so they can run concurrently.
ScoreReport score_response(const Runtime& rt, std::string_view response, std::span<const RubricAspect> aspects,
                           std::string_view question, const aggregate::CallOptions& options = default_judge_options(),
                           std::size_t parallelism = 1);

/// Mean question score per category name.
std::map<std::string, double> category_means(std::span<const ScoreReport> reports);

/// Unweighted mean over categories.
double macro_average(const std::map<std::string, double>& category_means);

/// (new - old) / old; NonpositiveBaseline when old <= 0.
double relative_improvement(double new_score, double old_score);

struct TTestResult
{
    double t = 0.0;
    double p = 1.0;
    bool significant = false; ///< p < 0.05

    bool operator==(const TTestResult&) const = default;
};

/// Two-sided paired t-test on a[i] - b[i]. When every difference is identical the
/// variance is zero: a zero difference yields t = 0, p = 1, and any other constant
/// difference yields t = +-inf, p = 0 (significant).
TTestResult paired_t_test(std::span<const double> a, std::span<const double> b);

enum class Verdict
{
    A,
    B,
    Tie,
};

Verdict parse_verdict(std::string_view text);

struct HumanEvalTally
{
    double pct_a = 0.0;
    double pct_b = 0.0;
    double pct_tie = 0.0;
    std::size_t count = 0;
};

HumanEvalTally tally_human_eval(std::span<const Verdict> verdicts);

/// Two-rater Cohen's kappa over paired verdicts.
double cohens_kappa(std::span<const Verdict> rater1, std::span<const Verdict> rater2);

struct HumanEvalRecord
{
    std::string question_id;
    Verdict verdict = Verdict::Tie;
    std::optional<Verdict> verdict2;
};

/// CSV with header "question_id,verdict[,verdict2]"; verdicts are A, B or Tie.
std::vector<HumanEvalRecord> parse_human_eval_csv(std::string_view csv);

} // namespace pot::eval
