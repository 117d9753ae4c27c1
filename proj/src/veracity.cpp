#include "cer/veracity.hpp"

#include <algorithm>
#include <cmath>

#include "cer/retrieval.hpp"
#include "cer/util.hpp"

namespace cer::veracity {

ClassifierInput make_input(std::string_view claim_text, std::string_view justification_text) {
  std::string claim = trim(retrieval::strip_separator(claim_text, kSeparator));
  const std::string just = trim(retrieval::strip_separator(justification_text, kSeparator));
  if (just.empty()) return {std::move(claim)};
  return {claim + " " + std::string(kSeparator) + " " + just};
}

std::string_view to_string(BackendKind k) {
  switch (k) {
    case BackendKind::ZeroShotNli: return "zero_shot_nli";
    case BackendKind::FinetunedEndpoint: return "finetuned_endpoint";
    case BackendKind::Mock: return "mock";
  }
  return "mock";
}

BackendKind parse_backend_kind(std::string_view s) {
  if (s == "zero_shot_nli") return BackendKind::ZeroShotNli;
  if (s == "finetuned_endpoint") return BackendKind::FinetunedEndpoint;
  if (s == "mock") return BackendKind::Mock;
  throw Error(ErrorCode::ConfigError, "unknown classifier kind '" + std::string(s) + "'");
}

bool is_binary(std::span<const VerdictLabel> label_space) {
  return std::find(label_space.begin(), label_space.end(), VerdictLabel::Nei) == label_space.end();
}

void validate(const ClassifierBackendSpec& spec) {
  if (spec.kind != BackendKind::Mock && !spec.endpoint)
    throw Error(ErrorCode::ConfigError, "classifier endpoint required for kind " + std::string(to_string(spec.kind)));
  const std::vector<VerdictLabel> three{VerdictLabel::True, VerdictLabel::False, VerdictLabel::Nei};
  const std::vector<VerdictLabel> two{VerdictLabel::True, VerdictLabel::False};
  if (spec.label_space != three && spec.label_space != two)
    throw Error(ErrorCode::LabelSpaceMismatch, "label space must be [true,false,nei] or [true,false]");
}

std::string hypothesis_for(VerdictLabel label) {
  switch (label) {
    case VerdictLabel::True: return "This claim is true given the evidence.";
    case VerdictLabel::False: return "This claim is false given the evidence.";
    case VerdictLabel::Nei: return "This claim is unverifiable given the evidence.";
  }
  return {};
}

ClassifierOutput finalize(std::span<const double> raw, std::span<const VerdictLabel> label_space) {
  if (raw.size() != label_space.size())
    throw Error(ErrorCode::LabelSpaceMismatch, "expected " + std::to_string(label_space.size()) + " scores, got " +
                                                   std::to_string(raw.size()));
  double sum = 0.0;
  for (const double x : raw) {
    if (!std::isfinite(x) || x < 0.0) throw Error(ErrorCode::InvalidBackendOutput, "invalid classifier score");
    sum += x;
  }
  ClassifierOutput out;
  for (const auto l : kAllLabels) out.probs[l] = 0.0;
  for (std::size_t i = 0; i < raw.size(); ++i)
    out.probs[label_space[i]] = sum > 0.0 ? raw[i] / sum : 1.0 / static_cast<double>(raw.size());
  out.label = label_space.front();
  double best = -1.0;
  for (const auto l : kAllLabels) {
    if (std::find(label_space.begin(), label_space.end(), l) == label_space.end()) continue;
    if (out.probs[l] > best) {
      best = out.probs[l];
      out.label = l;
    }
  }
  return out;
}

MockClassifier::MockClassifier(ClassifierBackendSpec spec) : spec_(std::move(spec)) { validate(spec_); }

void MockClassifier::force(const std::string& text, std::vector<double> raw) { forced_[text] = std::move(raw); }

void MockClassifier::force_claim(const std::string& claim_text, std::vector<double> raw) {
  forced_claims_[trim(claim_text)] = std::move(raw);
}

ClassifierOutput MockClassifier::classify(const ClassifierInput& input) {
  if (const auto it = forced_.find(input.text); it != forced_.end()) return finalize(it->second, spec_.label_space);
  const std::string sep = " " + std::string(kSeparator) + " ";
  const auto cut = input.text.find(sep);
  const std::string claim = input.text.substr(0, cut);
  if (const auto it = forced_claims_.find(claim); it != forced_claims_.end())
    return finalize(it->second, spec_.label_space);

  std::uint64_t state = stable_hash64(std::to_string(spec_.seed) + ":" + input.text);
  std::vector<double> raw;
  for (std::size_t i = 0; i < spec_.label_space.size(); ++i)
    raw.push_back(static_cast<double>((splitmix64(state) >> 11) + 1) * 0x1.0p-53);
  return finalize(raw, spec_.label_space);
}

HttpClassifier::HttpClassifier(ClassifierBackendSpec spec, HttpEndpoint endpoint)
    : spec_(std::move(spec)), endpoint_(std::move(endpoint)) {
  validate(spec_);
}

ClassifierOutput HttpClassifier::classify(const ClassifierInput& input) {
  std::vector<std::string> labels;
  for (const auto l : spec_.label_space)
    labels.push_back(spec_.kind == BackendKind::ZeroShotNli ? hypothesis_for(l) : std::string(to_string(l)));
  const nlohmann::json req{{"texts", {input.text}}, {"label_space", labels}};
  const auto res = post_json(endpoint_, req);
  std::vector<std::vector<double>> probs;
  try {
    probs = res.at("probs").get<std::vector<std::vector<double>>>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidBackendOutput, std::string("classifier reply: ") + e.what());
  }
  if (probs.size() != 1) throw Error(ErrorCode::InvalidBackendOutput, "classifier reply has wrong row count");
  return finalize(probs.front(), spec_.label_space);
}

ClassifierOutput classify(const ClassifierInput& input, Classifier& backend) { return backend.classify(input); }

ClaimAssessment assess(const Claim& claim, std::vector<EvidencePassage> evidence, const Justification& justification,
                       Classifier& backend, const std::string& config_fingerprint, bool degraded) {
  if (evidence.size() > kMaxEvidence) throw Error(ErrorCode::InvalidArgument, "more than 3 evidence passages");
  const auto out = classify(make_input(claim.text, justification.text), backend);
  ClaimAssessment a;
  a.claim = claim;
  a.label = out.label;
  a.confidence = std::clamp(out.probs.at(out.label), 0.0, 1.0);
  a.evidence = std::move(evidence);
  a.justification = justification;
  a.config_fingerprint = config_fingerprint;
  a.degraded = degraded;
  return a;
}

}  // namespace cer::veracity
