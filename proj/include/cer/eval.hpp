#pragma once

// Benchmark loading, metrics, baselines, and the video-level deepfake rule.

#include <array>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cer/core.hpp"

namespace cer::pipeline {
class Pipeline;
}

namespace cer::eval {

enum class Dataset { HealthFC, BioASQ7b, SciFact, Custom };
std::string_view to_string(Dataset d);
Dataset parse_dataset(std::string_view s);

enum class Split { Train, Dev, Test };
std::string_view to_string(Split s);
Split parse_split(std::string_view s);

struct LabeledClaim {
  std::string claim_text;
  VerdictLabel gold = VerdictLabel::Nei;
  Dataset dataset = Dataset::Custom;
  Split split = Split::Test;
  std::vector<std::string> gold_evidence;
};

std::vector<VerdictLabel> label_space_for(Dataset d);
bool is_binary_dataset(Dataset d);

/// Loads a benchmark file in its public release format:
///   healthfc  CSV with a claim column (en_claim | claim) and a label column
///             (label | verdict). Numeric labels follow the release coding
///             0 = supported, 1 = not enough information, 2 = refuted; text
///             labels go through parse_label. Optional split column.
///   bioasq7b  JSON {"questions":[{"body","type":"yesno","exact_answer":"yes"|"no"}]}.
///   scifact   JSON-Lines claims_{train,dev,test}.jsonl; label from the
///             evidence sets (SUPPORT / CONTRADICT), NEI when evidence is empty,
///             or from a top-level "label" field. Split from the file name.
///   custom    JSON-Lines {"claim","label"[, "split", "evidence"]}.
/// Throws FormatError, UnknownLabel, or IoError.
std::vector<LabeledClaim> load_dataset(Dataset d, const std::string& path);
std::vector<LabeledClaim> parse_dataset(Dataset d, std::string_view contents, std::string_view origin = "<memory>");

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;
};

struct MacroMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct MetricReport {
  std::vector<VerdictLabel> label_space;
  std::map<VerdictLabel, ClassMetrics> per_class;
  MacroMetrics macro;
  std::size_t n = 0;
  // confusion[g][p]: gold label_space[g], predicted label_space[p].
  std::vector<std::vector<std::size_t>> confusion;
};

/// Per-class P/R/F1 from the confusion matrix (0/0 := 0) and their unweighted
/// means over the label space. Throws LengthMismatch, InvalidArgument (empty),
/// or InvalidForLabelSpace (label outside the space).
MetricReport metrics(std::span<const VerdictLabel> golds, std::span<const VerdictLabel> preds,
                     std::span<const VerdictLabel> label_space);

/// Rounds a [0,1] value to a percentage with 2 decimals, half-up.
double percent_2dp(double fraction);
std::string format_percent(double fraction);

nlohmann::json to_json(const MetricReport& r);
/// Aligned plain-text table with percentages.
std::string render_table(const MetricReport& r, std::string_view title = {});

enum class Baseline { AllTrue, AllFalse, AllNei };
std::string_view to_string(Baseline b);
Baseline parse_baseline(std::string_view s);
VerdictLabel baseline_label(Baseline b);

/// Constant predictions. Throws InvalidArgument for n < 1 and
/// InvalidForLabelSpace for all_nei on a binary label space.
std::vector<VerdictLabel> baseline_predict(Baseline kind, std::size_t n, std::span<const VerdictLabel> label_space);

struct EvalResult {
  MetricReport report;
  std::size_t degraded = 0;
  std::vector<ClaimAssessment> trace;
};

/// Runs retrieve -> reason -> assess on every claim (no detection step) and
/// scores the final labels. Per-claim backend failures fall back to degraded
/// mode; a claim whose classifier also fails is predicted Nei and counted
/// degraded. When trace_path is set, writes one ClaimAssessment per line.
EvalResult evaluate_pipeline(std::span<const LabeledClaim> data, pipeline::Pipeline& pipeline,
                             const std::optional<std::string>& trace_path = std::nullopt);

enum class VideoLabel { Real, Fake };
std::string_view to_string(VideoLabel v);
VideoLabel parse_video_label(std::string_view s);

struct VideoCase {
  std::string video_id;
  VideoLabel gold = VideoLabel::Real;
  std::vector<std::pair<std::string, ClaimAssessment>> claims;
};

struct VideoVerdict {
  VideoLabel label = VideoLabel::Real;
  bool no_claims_warning = false;
};

/// Fake iff at least one assessment is labelled False; a video without
/// claims is Real with a warning.
VideoVerdict video_verdict(std::span<const ClaimAssessment> assessments);

struct VideoMetrics {
  std::map<VideoLabel, ClassMetrics> per_class;
  // confusion[g][p] with index 0 = real, 1 = fake.
  std::array<std::array<std::size_t, 2>, 2> confusion{};
  std::size_t no_claim_videos = 0;
};

/// Binary per-class metrics (real and fake). Throws InvalidArgument on empty input.
VideoMetrics video_metrics(std::span<const VideoCase> cases);

/// JSON-Lines {"video_id","gold","claims":[...]}; each claim is either a full
/// ClaimAssessment object or the shorthand {"text","label"}.
std::vector<VideoCase> load_video_cases(const std::string& path);
std::vector<VideoCase> parse_video_cases(std::string_view contents);

nlohmann::json to_json(const VideoMetrics& m);
std::string render_table(const VideoMetrics& m);

}  // namespace cer::eval
