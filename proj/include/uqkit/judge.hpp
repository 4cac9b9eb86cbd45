#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "uqkit/backend.hpp"
#include "uqkit/types.hpp"

namespace uq {

// Verdict vocabulary a judge must answer in, and its mapping onto [0,1].
class ScoringTemplate {
 public:
  enum class Kind { kBinary, kTernary, kLikert, kContinuous };

  explicit ScoringTemplate(Kind kind) : kind_(kind) {}

  // "binary", "ternary", "likert" or "continuous"; anything else throws
  // ConfigError.
  static ScoringTemplate from_name(const std::string& name);

  Kind kind() const { return kind_; }
  std::string name() const;

  // Discrete admissible scores; empty for continuous, whose admissible set
  // is the whole interval [0,1].
  std::vector<double> admissible_values() const;
  bool is_admissible(double score) const;

  // Human-readable reply vocabulary, spliced into the judge prompt. The
  // likert wording states the 1..5 -> 0..1 mapping explicitly.
  std::string value_vocabulary() const;

 private:
  Kind kind_;
};

// Built-in judge prompt wording; templates/judge_prompt.txt ships the same
// text and a test keeps the two in sync. Placeholders: {question},
// {response}, {value_vocabulary}.
extern const char kJudgePromptTemplate[];

// Appended to the prompt on the single retry after a parse failure.
extern const char kJudgeRetrySuffix[];

// Substitutes the three placeholders into template_text.
std::string render_template(const std::string& template_text, const std::string& question,
                            const std::string& response, const ScoringTemplate& scoring);

// render_template over the built-in wording. question and response must be
// non-empty.
std::string render_judge_prompt(const std::string& question, const std::string& response,
                                const ScoringTemplate& scoring);

// First numeric token of raw, mapped through the template (likert integers
// 1..5 land on 0,0.25,0.5,0.75,1). nullopt when there is no numeric token
// or the value is not admissible; out-of-range values are never clamped.
std::optional<double> try_parse_verdict(const std::string& raw,
                                        const ScoringTemplate& scoring);

// Throwing variant: ParseFailure instead of nullopt.
double parse_verdict(const std::string& raw, const ScoringTemplate& scoring);

struct JudgeVerdict {
  std::string judge_id;
  std::string raw_reply;  // last reply received; empty when transport failed
  std::optional<double> parsed_score;
  int attempts = 0;
};

struct PanelAggregates {
  double min = 0.0;
  double max = 0.0;
  double avg = 0.0;
  double median = 0.0;  // even count: mean of the two middle values
};

// Aggregates over the non-null verdicts; nullopt when every verdict is null.
std::optional<PanelAggregates> aggregate_verdicts(const std::vector<JudgeVerdict>& verdicts);

struct PanelResult {
  std::vector<JudgeVerdict> verdicts;  // configured judge order
  std::optional<PanelAggregates> aggregates;

  bool scored() const { return aggregates.has_value(); }
};

// Flattens a panel into named scores: one entry per non-null verdict under
// its judge_id, plus panel_min/panel_max/panel_avg/panel_median when the
// aggregates are defined.
ScoreVector panel_score_vector(const PanelResult& panel);

struct JudgeSpec {
  std::string judge_id;
  ScoringTemplate scoring{ScoringTemplate::Kind::kContinuous};
  std::shared_ptr<ChatProvider> provider;
  // Overrides the built-in prompt wording (config loads it from a file).
  std::optional<std::string> prompt_template;
  double temperature = 0.0;
};

struct PanelOutcome {
  std::string prompt;
  Generation generation;
  PanelResult panel;
  std::optional<std::string> error;
};

struct PanelOptions {
  double generator_temperature = 0.0;
  std::uint64_t seed = 0;
  int max_in_flight = 4;
};

// Generate-then-judge workflow: one generation per prompt, then one verdict
// per judge with at most one parse retry. A judge may share the generator's
// provider (self-judge) with no special casing.
class PanelEngine {
 public:
  PanelEngine(std::shared_ptr<ChatProvider> generator, std::vector<JudgeSpec> judges,
              PanelOptions options);

  // Verdicts for one already-generated response, in configured judge order.
  // Transport failures null the affected verdict; parse failures retry once
  // with the stricter suffix, then null.
  PanelResult score_response(const std::string& question, const std::string& response,
                             std::uint64_t prompt_index) const;

  std::vector<PanelOutcome> generate_and_score(const std::vector<std::string>& prompts) const;

  const std::vector<JudgeSpec>& judges() const { return judges_; }

 private:
  std::shared_ptr<ChatProvider> generator_;
  std::vector<JudgeSpec> judges_;
  PanelOptions options_;
};

}  // namespace uq
