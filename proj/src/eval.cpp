// SPDX-License-Identifier: Apache-2.0
#include "pot/eval.hpp"

#include "pot/error.hpp"
#include "parallel.hpp"
#include "text.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace pot::eval
{

void to_json(nlohmann::json& j, const ScoreReport& r)
{
    j = {{"question_id", r.question_id},
         {"category", r.category},
         {"per_aspect", r.per_aspect},
         {"question_score", r.question_score}};
}

void from_json(const nlohmann::json& j, ScoreReport& r)
{
    r.question_id = j.at("question_id").get<std::string>();
    r.category = j.value("category", std::string("Other"));
    r.per_aspect = j.at("per_aspect").get<std::vector<int>>();
    r.question_score = j.at("question_score").get<double>();
}

aggregate::CallOptions default_judge_options()
{
    auto options = aggregate::CallOptions {};
    options.sampling.temperature = 0.0;
    options.sampling.max_output_tokens = 16;
    options.lane = "judge";
    return options;
}

int judge_aspect(const Runtime& rt, std::string_view response, const RubricAspect& aspect, std::string_view question,
                 const aggregate::CallOptions& options)
{
    if (text::trim(response).empty())
        throw Error(ErrorCode::InvalidArgument, "cannot judge an empty response");
    if (text::trim(aspect.text).empty())
        throw Error(ErrorCode::InvalidArgument, "cannot judge against an empty aspect");

    auto const prompt = rt.prompts.render("judge_aspect", {
                                                              {"question", std::string(question)},
                                                              {"aspect", aspect.text},
                                                              {"response", std::string(response)},
                                                          });
    auto reply = std::string {};
    for (auto attempt = 0; attempt < options.attempts; ++attempt)
    {
        auto request = prompt;
        if (attempt > 0)
            request += "\n(Attempt " + std::to_string(attempt + 1) + ") The reply \"" + std::string(text::trim(reply))
                       + "\" is not a valid score. Reply with a single digit: 0, 1 or 2.\n";
        reply = rt.backend.complete(llm::CompletionRequest::user(request, options.sampling, "judge_aspect", options.lane))
                    .text;
        if (auto const score = text::first_integer(reply); score && *score >= 0 && *score <= 2)
            return static_cast<int>(*score);
    }
    throw Error(ErrorCode::UnparseableScore,
                "no score in {0,1,2} after " + std::to_string(options.attempts) + " attempts; last reply \""
                    + std::string(text::trim(reply)) + "\"");
}

double normalized_score(std::span<const int> per_aspect)
{
    if (per_aspect.empty())
        throw Error(ErrorCode::InvalidArgument, "no aspect scores");
    auto total = 0.0;
    for (auto s: per_aspect)
    {
        if (s < 0 || s > 2)
            throw Error(ErrorCode::InvalidArgument, "aspect score " + std::to_string(s) + " outside {0,1,2}");
        total += static_cast<double>(s) / 2.0;
    }
    return total / static_cast<double>(per_aspect.size());
}

ScoreReport score_response(const Runtime& rt, std::string_view response, std::span<const RubricAspect> aspects,
                           std::string_view question, const aggregate::CallOptions& options, std::size_t parallelism)
{
    if (aspects.empty())
        throw Error(ErrorCode::InvalidArgument, "no rubric aspects to score against");

    auto report = ScoreReport {};
    report.per_aspect.resize(aspects.size());
    detail::parallel_for(aspects.size(), parallelism, [&](std::size_t i) {
        auto aspectOptions = options;
        aspectOptions.lane = options.lane + "/" + std::to_string(i);
        report.per_aspect[i] = judge_aspect(rt, response, aspects[i], question, aspectOptions);
    });
    report.question_score = normalized_score(report.per_aspect);
    return report;
}

std::map<std::string, double> category_means(std::span<const ScoreReport> reports)
{
    auto sums = std::map<std::string, std::pair<double, std::size_t>> {};
    for (auto const& r: reports)
    {
        auto& [sum, count] = sums[r.category];
        sum += r.question_score;
        ++count;
    }
    auto means = std::map<std::string, double> {};
    for (auto const& [category, acc]: sums)
        means.emplace(category, acc.first / static_cast<double>(acc.second));
    return means;
}

double macro_average(const std::map<std::string, double>& category_means)
{
    if (category_means.empty())
        throw Error(ErrorCode::InvalidArgument, "macro average needs at least one category");
    auto total = 0.0;
    for (auto const& [category, mean]: category_means)
        total += mean;
    return total / static_cast<double>(category_means.size());
}

double relative_improvement(double new_score, double old_score)
{
    if (!(old_score > 0.0))
        throw Error(ErrorCode::NonpositiveBaseline, "baseline score must be positive, got " + std::to_string(old_score));
    return (new_score - old_score) / old_score;
}

TTestResult paired_t_test(std::span<const double> a, std::span<const double> b)
{
    if (a.size() != b.size())
        throw Error(ErrorCode::LengthMismatch,
                    "paired samples differ in length: " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
    if (a.size() < 2)
        throw Error(ErrorCode::InvalidArgument, "paired t-test needs at least two pairs");

    auto const n = static_cast<double>(a.size());
    auto diffs = std::vector<double>(a.size());
    for (std::size_t i = 0; i < a.size(); ++i)
        diffs[i] = a[i] - b[i];
    auto const mean = std::accumulate(diffs.begin(), diffs.end(), 0.0) / n;
    auto ss = 0.0;
    for (auto d: diffs)
        ss += (d - mean) * (d - mean);
    auto const sd = std::sqrt(ss / (n - 1.0));

    // Rounding noise below this is treated as an exactly constant difference.
    auto const scale = std::max(1.0, std::abs(mean));
    if (sd <= 1e-12 * scale)
    {
        if (std::abs(mean) <= 1e-12)
            return TTestResult {.t = 0.0, .p = 1.0, .significant = false};
        auto const inf = std::numeric_limits<double>::infinity();
        return TTestResult {.t = mean > 0 ? inf : -inf, .p = 0.0, .significant = true};
    }

    auto const t = mean / (sd / std::sqrt(n));
    auto const dist = boost::math::students_t_distribution<double>(n - 1.0);
    auto const p = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
    return TTestResult {.t = t, .p = p, .significant = p < 0.05};
}

Verdict parse_verdict(std::string_view text)
{
    auto const key = text::to_lower(text::trim(text));
    if (key == "a")
        return Verdict::A;
    if (key == "b")
        return Verdict::B;
    if (key == "tie" || key == "t")
        return Verdict::Tie;
    throw Error(ErrorCode::MalformedRecord, "unknown verdict '" + std::string(text) + "'");
}

HumanEvalTally tally_human_eval(std::span<const Verdict> verdicts)
{
    if (verdicts.empty())
        throw Error(ErrorCode::InvalidArgument, "no verdicts to tally");
    auto counts = std::array<std::size_t, 3> {};
    for (auto v: verdicts)
        ++counts[static_cast<std::size_t>(v)];
    auto const n = static_cast<double>(verdicts.size());
    auto const pct = [&](Verdict v) { return 100.0 * static_cast<double>(counts[static_cast<std::size_t>(v)]) / n; };
    return HumanEvalTally {
        .pct_a = pct(Verdict::A),
        .pct_b = pct(Verdict::B),
        .pct_tie = pct(Verdict::Tie),
        .count = verdicts.size(),
    };
}

double cohens_kappa(std::span<const Verdict> rater1, std::span<const Verdict> rater2)
{
    if (rater1.size() != rater2.size())
        throw Error(ErrorCode::LengthMismatch, "raters judged different numbers of items");
    if (rater1.empty())
        throw Error(ErrorCode::InvalidArgument, "no verdicts to compare");

    auto const n = static_cast<double>(rater1.size());
    auto marginal1 = std::array<double, 3> {};
    auto marginal2 = std::array<double, 3> {};
    auto agree = 0.0;
    for (std::size_t i = 0; i < rater1.size(); ++i)
    {
        marginal1[static_cast<std::size_t>(rater1[i])] += 1.0;
        marginal2[static_cast<std::size_t>(rater2[i])] += 1.0;
        if (rater1[i] == rater2[i])
            agree += 1.0;
    }
    auto const observed = agree / n;
    auto expected = 0.0;
    for (std::size_t k = 0; k < 3; ++k)
        expected += (marginal1[k] / n) * (marginal2[k] / n);
    if (expected >= 1.0)
        return observed >= 1.0 ? 1.0 : 0.0;
    return (observed - expected) / (1.0 - expected);
}

std::vector<HumanEvalRecord> parse_human_eval_csv(std::string_view csv)
{
    auto const split = [](const std::string& line) {
        auto cells = std::vector<std::string> {};
        auto cell = std::string {};
        auto in = std::istringstream(line);
        while (std::getline(in, cell, ','))
            cells.emplace_back(text::trim(cell));
        return cells;
    };

    auto stream = std::istringstream(std::string(csv));
    auto line = std::string {};
    auto header = std::vector<std::string> {};
    auto records = std::vector<HumanEvalRecord> {};
    for (auto lineNo = 1; std::getline(stream, line); ++lineNo)
    {
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (text::trim(line).empty())
            continue;
        auto cells = split(line);
        if (header.empty())
        {
            header = std::move(cells);
            if (header.size() < 2 || header[0] != "question_id" || header[1] != "verdict")
                throw Error(ErrorCode::MalformedRecord, "human eval CSV header must start with question_id,verdict");
            continue;
        }
        if (cells.size() != header.size())
            throw Error(ErrorCode::MalformedRecord, "line " + std::to_string(lineNo) + ": expected "
                                                        + std::to_string(header.size()) + " columns");
        auto record = HumanEvalRecord {.question_id = cells[0], .verdict = parse_verdict(cells[1]), .verdict2 = {}};
        if (header.size() > 2 && header[2] == "verdict2")
            record.verdict2 = parse_verdict(cells[2]);
        records.push_back(std::move(record));
    }
    return records;
}

} // namespace pot::eval
