#include "uqkit/judge.hpp"

#include <algorithm>
#include <cmath>
#include <regex>
#include <set>
#include <sstream>

#include "uqkit/parallel.hpp"

namespace uq {

const char kJudgePromptTemplate[] =
    "You are grading the factual correctness of a response to a question.\n"
    "\n"
    "Question:\n"
    "{question}\n"
    "\n"
    "Response:\n"
    "{response}\n"
    "\n"
    "Rate the correctness of the response as {value_vocabulary}.\n"
    "Reply with the value and nothing else.\n";

const char kJudgeRetrySuffix[] = "\n\nReply with only the value.";

ScoringTemplate ScoringTemplate::from_name(const std::string& name) {
  if (name == "binary") {
    return ScoringTemplate(Kind::kBinary);
  }
  if (name == "ternary") {
    return ScoringTemplate(Kind::kTernary);
  }
  if (name == "likert") {
    return ScoringTemplate(Kind::kLikert);
  }
  if (name == "continuous") {
    return ScoringTemplate(Kind::kContinuous);
  }
  throw ConfigError("unknown scoring template '" + name +
                    "'; valid templates are: binary ternary likert continuous");
}

std::string ScoringTemplate::name() const {
  switch (kind_) {
    case Kind::kBinary:
      return "binary";
    case Kind::kTernary:
      return "ternary";
    case Kind::kLikert:
      return "likert";
    case Kind::kContinuous:
      return "continuous";
  }
  throw Error("unreachable scoring template kind");
}

std::vector<double> ScoringTemplate::admissible_values() const {
  switch (kind_) {
    case Kind::kBinary:
      return {0.0, 1.0};
    case Kind::kTernary:
      return {0.0, 0.5, 1.0};
    case Kind::kLikert:
      return {0.0, 0.25, 0.5, 0.75, 1.0};
    case Kind::kContinuous:
      return {};
  }
  throw Error("unreachable scoring template kind");
}

bool ScoringTemplate::is_admissible(double score) const {
  if (kind_ == Kind::kContinuous) {
    return score >= 0.0 && score <= 1.0;
  }
  const std::vector<double> values = admissible_values();
  return std::find(values.begin(), values.end(), score) != values.end();
}

std::string ScoringTemplate::value_vocabulary() const {
  switch (kind_) {
    case Kind::kBinary:
      return "exactly 0 or 1, where 0 means incorrect and 1 means correct";
    case Kind::kTernary:
      return "exactly 0, 0.5, or 1, where 0 means incorrect, 0.5 means uncertain, "
             "and 1 means correct";
    case Kind::kLikert:
      return "an integer from 1 to 5, where 1 is the worst and 5 is the best "
             "(1 maps to 0, 2 to 0.25, 3 to 0.5, 4 to 0.75, 5 to 1)";
    case Kind::kContinuous:
      return "a number between 0 and 1 inclusive, where 0 means incorrect and 1 "
             "means correct";
  }
  throw Error("unreachable scoring template kind");
}

namespace {

void replace_all(std::string& text, const std::string& placeholder, const std::string& value) {
  std::size_t pos = 0;
  while ((pos = text.find(placeholder, pos)) != std::string::npos) {
    text.replace(pos, placeholder.size(), value);
    pos += value.size();
  }
}

}  // namespace

std::string render_template(const std::string& template_text, const std::string& question,
                            const std::string& response, const ScoringTemplate& scoring) {
  if (trim(question).empty()) {
    throw ValidationError("judge prompt needs a non-empty question");
  }
  if (trim(response).empty()) {
    throw ValidationError("judge prompt needs a non-empty response");
  }
  std::string rendered = template_text;
  replace_all(rendered, "{question}", question);
  replace_all(rendered, "{response}", response);
  replace_all(rendered, "{value_vocabulary}", scoring.value_vocabulary());
  return rendered;
}

std::string render_judge_prompt(const std::string& question, const std::string& response,
                                const ScoringTemplate& scoring) {
  return render_template(kJudgePromptTemplate, question, response, scoring);
}

std::optional<double> try_parse_verdict(const std::string& raw,
                                        const ScoringTemplate& scoring) {
  static const std::regex number_pattern(
      R"([-+]?(?:[0-9]+\.?[0-9]*|\.[0-9]+)(?:[eE][-+]?[0-9]+)?)");
  std::smatch match;
  if (!std::regex_search(raw, match, number_pattern)) {
    return std::nullopt;
  }
  double value = 0.0;
  try {
    value = std::stod(match.str());
  } catch (const std::exception&) {
    return std::nullopt;
  }
  if (!std::isfinite(value)) {
    return std::nullopt;
  }
  if (scoring.kind() == ScoringTemplate::Kind::kLikert) {
    // Judges answer on the 1..5 scale; anything else is rejected, never
    // rounded.
    if (value < 1.0 || value > 5.0 || value != std::floor(value)) {
      return std::nullopt;
    }
    return (value - 1.0) / 4.0;
  }
  if (!scoring.is_admissible(value)) {
    return std::nullopt;
  }
  return value;
}

double parse_verdict(const std::string& raw, const ScoringTemplate& scoring) {
  const std::optional<double> parsed = try_parse_verdict(raw, scoring);
  if (!parsed.has_value()) {
    std::string shown = raw.size() > 120 ? raw.substr(0, 120) + "..." : raw;
    throw ParseFailure("no admissible " + scoring.name() + " verdict in reply: \"" + shown +
                       "\"");
  }
  return *parsed;
}

std::optional<PanelAggregates> aggregate_verdicts(const std::vector<JudgeVerdict>& verdicts) {
  std::vector<double> scores;
  for (const JudgeVerdict& verdict : verdicts) {
    if (verdict.parsed_score.has_value()) {
      scores.push_back(*verdict.parsed_score);
    }
  }
  if (scores.empty()) {
    return std::nullopt;
  }
  std::sort(scores.begin(), scores.end());
  PanelAggregates aggregates;
  aggregates.min = scores.front();
  aggregates.max = scores.back();
  double sum = 0.0;
  for (const double score : scores) {
    sum += score;
  }
  aggregates.avg = sum / static_cast<double>(scores.size());
  const std::size_t mid = scores.size() / 2;
  aggregates.median = scores.size() % 2 == 1 ? scores[mid] : (scores[mid - 1] + scores[mid]) / 2.0;
  return aggregates;
}

ScoreVector panel_score_vector(const PanelResult& panel) {
  ScoreVector scores;
  for (const JudgeVerdict& verdict : panel.verdicts) {
    if (verdict.parsed_score.has_value()) {
      scores[verdict.judge_id] = *verdict.parsed_score;
    }
  }
  if (panel.aggregates.has_value()) {
    scores["panel_min"] = panel.aggregates->min;
    scores["panel_max"] = panel.aggregates->max;
    scores["panel_avg"] = panel.aggregates->avg;
    scores["panel_median"] = panel.aggregates->median;
  }
  return scores;
}

PanelEngine::PanelEngine(std::shared_ptr<ChatProvider> generator, std::vector<JudgeSpec> judges,
                         PanelOptions options)
    : generator_(std::move(generator)), judges_(std::move(judges)), options_(options) {
  if (generator_ == nullptr) {
    throw ConfigError("panel engine needs a generator provider");
  }
  if (judges_.empty()) {
    throw ConfigError("panel engine needs at least one judge");
  }
  std::set<std::string> seen;
  for (const JudgeSpec& judge : judges_) {
    if (judge.provider == nullptr) {
      throw ConfigError("judge '" + judge.judge_id + "' has no provider");
    }
    if (trim(judge.judge_id).empty()) {
      throw ConfigError("judges need a non-empty id");
    }
    if (judge.judge_id.rfind("panel_", 0) == 0) {
      throw ConfigError("judge id '" + judge.judge_id +
                        "' collides with the panel aggregate names");
    }
    if (!seen.insert(judge.judge_id).second) {
      throw ConfigError("duplicate judge id '" + judge.judge_id + "'");
    }
  }
}

PanelResult PanelEngine::score_response(const std::string& question, const std::string& response,
                                        std::uint64_t prompt_index) const {
  PanelResult result;
  result.verdicts.reserve(judges_.size());
  for (const JudgeSpec& judge : judges_) {
    const std::string base_prompt =
        judge.prompt_template.has_value()
            ? render_template(*judge.prompt_template, question, response, judge.scoring)
            : render_judge_prompt(question, response, judge.scoring);

    JudgeVerdict verdict;
    verdict.judge_id = judge.judge_id;

    ChatRequest request;
    request.prompt = base_prompt;
    request.sample_count = 1;
    request.temperature = judge.temperature;
    request.seed = derive_seed(options_.seed, "judge." + judge.judge_id, prompt_index);

    try {
      verdict.attempts = 1;
      verdict.raw_reply = chat_generate(*judge.provider, request).front().text;
      const std::optional<double> parsed = try_parse_verdict(verdict.raw_reply, judge.scoring);
      if (parsed.has_value()) {
        verdict.parsed_score = parsed;
      } else {
        // One stricter retry, then give up and leave the verdict null.
        request.prompt = base_prompt + kJudgeRetrySuffix;
        verdict.attempts = 2;
        verdict.raw_reply = chat_generate(*judge.provider, request).front().text;
        verdict.parsed_score = try_parse_verdict(verdict.raw_reply, judge.scoring);
      }
    } catch (const Error&) {
      // Transport failure: null verdict, attempts records how far we got.
      verdict.parsed_score = std::nullopt;
    }
    result.verdicts.push_back(std::move(verdict));
  }
  result.aggregates = aggregate_verdicts(result.verdicts);
  return result;
}

std::vector<PanelOutcome> PanelEngine::generate_and_score(
    const std::vector<std::string>& prompts) const {
  std::vector<PanelOutcome> outcomes(prompts.size());
  parallel_for(prompts.size(), options_.max_in_flight, [&](std::size_t i) {
    PanelOutcome outcome;
    outcome.prompt = prompts[i];
    try {
      ChatRequest request;
      request.prompt = prompts[i];
      request.sample_count = 1;
      request.temperature = options_.generator_temperature;
      request.seed = derive_seed(options_.seed, "chat.original", i);
      outcome.generation = chat_generate(*generator_, request).front();
      outcome.panel = score_response(prompts[i], outcome.generation.text, i);
      if (!outcome.panel.scored()) {
        outcome.error = "no judge produced an admissible verdict";
      }
    } catch (const Error& error) {
      outcome.error = error.what();
    }
    outcomes[i] = std::move(outcome);
  });
  return outcomes;
}

}  // namespace uq
