#pragma once

// Final three-way verdict from claim text plus LLM justification.

#include <array>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cer/core.hpp"
#include "cer/http_json.hpp"

namespace cer::veracity {

inline constexpr std::string_view kSeparator = "[SEP]";

/// claim + " [SEP] " + justification, or the claim alone when the
/// justification is empty. Separator tokens inside either part are blanked.
struct ClassifierInput {
  std::string text;
};

ClassifierInput make_input(std::string_view claim_text, std::string_view justification_text);

struct ClassifierOutput {
  std::map<VerdictLabel, double> probs;
  VerdictLabel label = VerdictLabel::Nei;
};

enum class BackendKind { ZeroShotNli, FinetunedEndpoint, Mock };
std::string_view to_string(BackendKind k);
BackendKind parse_backend_kind(std::string_view s);

struct ClassifierBackendSpec {
  BackendKind kind = BackendKind::Mock;
  std::optional<std::string> endpoint;
  std::vector<VerdictLabel> label_space{VerdictLabel::True, VerdictLabel::False, VerdictLabel::Nei};
  std::uint64_t seed = 0;
};

void validate(const ClassifierBackendSpec& spec);
bool is_binary(std::span<const VerdictLabel> label_space);

/// Entailment hypotheses used by the zero-shot backend, one per label.
std::string hypothesis_for(VerdictLabel label);

/// Validates and renormalizes raw scores over the label space, then picks the
/// argmax with tie order True > False > Nei. Labels outside the space get 0.
/// Throws InvalidBackendOutput for NaN/negative/infinite scores and
/// LabelSpaceMismatch when the score count differs from the label space.
ClassifierOutput finalize(std::span<const double> raw, std::span<const VerdictLabel> label_space);

class Classifier {
 public:
  virtual ~Classifier() = default;
  virtual ClassifierOutput classify(const ClassifierInput& input) = 0;
  virtual const ClassifierBackendSpec& spec() const = 0;
};

/// Seeded deterministic distribution keyed by SHA-256(seed, input text).
/// Specific inputs can be forced to fixed distributions.
class MockClassifier final : public Classifier {
 public:
  explicit MockClassifier(ClassifierBackendSpec spec);

  /// Raw scores in label-space order for inputs equal to `text`.
  void force(const std::string& text, std::vector<double> raw);
  /// Raw scores for inputs whose claim part (before the separator) equals `claim_text`.
  void force_claim(const std::string& claim_text, std::vector<double> raw);

  ClassifierOutput classify(const ClassifierInput& input) override;
  const ClassifierBackendSpec& spec() const override { return spec_; }

 private:
  ClassifierBackendSpec spec_;
  std::map<std::string, std::vector<double>> forced_;
  std::map<std::string, std::vector<double>> forced_claims_;
};

/// HTTP classifier: POST {"texts":[...], "label_space":[...]} -> {"probs":[[...]]}.
/// For ZeroShotNli the label space sent is the list of entailment hypotheses
/// and the returned entailment scores are renormalized.
class HttpClassifier final : public Classifier {
 public:
  HttpClassifier(ClassifierBackendSpec spec, HttpEndpoint endpoint);
  ClassifierOutput classify(const ClassifierInput& input) override;
  const ClassifierBackendSpec& spec() const override { return spec_; }

 private:
  ClassifierBackendSpec spec_;
  HttpEndpoint endpoint_;
};

ClassifierOutput classify(const ClassifierInput& input, Classifier& backend);

/// Builds the classifier input from the claim text and justification text
/// only (never the preliminary judgment), classifies, and assembles the
/// assessment with confidence = probability of the chosen label.
ClaimAssessment assess(const Claim& claim, std::vector<EvidencePassage> evidence, const Justification& justification,
                       Classifier& backend, const std::string& config_fingerprint, bool degraded = false);

}  // namespace cer::veracity
