#include "cer/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <sstream>
#include <thread>

#include "cer/pipeline.hpp"
#include "cer/util.hpp"

namespace cer::eval {

namespace {

using nlohmann::json;

[[noreturn]] void format_error(std::string_view origin, std::size_t line, const std::string& msg) {
  throw Error(ErrorCode::FormatError, std::string(origin) + ":" + std::to_string(line) + ": " + msg);
}

// RFC 4180 records; quoted fields may span lines.
std::vector<std::vector<std::string>> parse_csv(std::string_view s) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false, any = false;
  std::size_t i = 0;
  if (s.starts_with("\xEF\xBB\xBF")) i = 3;
  for (; i < s.size(); ++i) {
    const char c = s[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < s.size() && s[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    switch (c) {
      case '"':
        quoted = true;
        any = true;
        break;
      case ',':
        row.push_back(std::move(field));
        field.clear();
        any = true;
        break;
      case '\r':
        break;
      case '\n':
        if (any || !field.empty()) {
          row.push_back(std::move(field));
          rows.push_back(std::move(row));
        }
        row.clear();
        field.clear();
        any = false;
        break;
      default:
        field += c;
        any = true;
    }
  }
  if (quoted) throw Error(ErrorCode::FormatError, "unterminated quoted CSV field");
  if (any || !field.empty()) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

VerdictLabel healthfc_label(std::string_view raw) {
  const std::string v = trim(raw);
  if (v == "0") return VerdictLabel::True;
  if (v == "1") return VerdictLabel::Nei;
  if (v == "2") return VerdictLabel::False;
  return parse_label(v);
}

Split split_from_name(std::string_view origin) {
  const std::string name = to_lower_ascii(origin.substr(origin.find_last_of('/') == std::string_view::npos
                                                            ? 0
                                                            : origin.find_last_of('/') + 1));
  if (name.find("train") != std::string::npos) return Split::Train;
  if (name.find("dev") != std::string::npos) return Split::Dev;
  return Split::Test;
}

std::vector<LabeledClaim> load_healthfc(std::string_view contents, std::string_view origin) {
  const auto rows = parse_csv(contents);
  if (rows.empty()) format_error(origin, 1, "empty CSV");
  const auto& header = rows.front();
  auto column = [&](std::initializer_list<std::string_view> names) -> std::optional<std::size_t> {
    for (const auto name : names)
      for (std::size_t c = 0; c < header.size(); ++c)
        if (to_lower_ascii(trim(header[c])) == name) return c;
    return std::nullopt;
  };
  const auto claim_col = column({"en_claim", "claim"});
  const auto label_col = column({"label", "verdict"});
  const auto split_col = column({"split"});
  if (!claim_col || !label_col) format_error(origin, 1, "header needs a claim and a label column");
  std::vector<LabeledClaim> out;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() <= std::max(*claim_col, *label_col)) format_error(origin, r + 1, "short row");
    LabeledClaim c;
    c.claim_text = trim(row[*claim_col]);
    if (c.claim_text.empty()) format_error(origin, r + 1, "empty claim");
    c.gold = healthfc_label(row[*label_col]);
    c.dataset = Dataset::HealthFC;
    if (split_col && *split_col < row.size() && !trim(row[*split_col]).empty()) c.split = parse_split(trim(row[*split_col]));
    out.push_back(std::move(c));
  }
  return out;
}

std::vector<LabeledClaim> load_bioasq(std::string_view contents, std::string_view origin) {
  json j;
  try {
    j = json::parse(contents);
  } catch (const json::exception& e) {
    format_error(origin, 1, e.what());
  }
  if (!j.is_object() || !j.contains("questions") || !j["questions"].is_array())
    format_error(origin, 1, "expected an object with a \"questions\" array");
  std::vector<LabeledClaim> out;
  std::size_t idx = 0;
  for (const auto& q : j["questions"]) {
    ++idx;
    if (!q.is_object() || q.value("type", "") != "yesno") continue;
    if (!q.contains("body") || !q.contains("exact_answer")) format_error(origin, idx, "yesno question without body or exact_answer");
    LabeledClaim c;
    c.claim_text = trim(q["body"].get<std::string>());
    const auto& ans = q["exact_answer"];
    const std::string a = ans.is_array() && !ans.empty() ? ans.front().get<std::string>() : ans.get<std::string>();
    c.gold = parse_label(a);
    if (c.gold == VerdictLabel::Nei) format_error(origin, idx, "BioASQ labels are binary");
    c.dataset = Dataset::BioASQ7b;
    c.split = split_from_name(origin) == Split::Train ? Split::Train : Split::Test;
    if (q.contains("documents") && q["documents"].is_array())
      for (const auto& d : q["documents"]) c.gold_evidence.push_back(d.get<std::string>());
    out.push_back(std::move(c));
  }
  return out;
}

template <typename F>
void for_each_jsonl(std::string_view contents, std::string_view origin, F&& f) {
  std::size_t line_no = 0, pos = 0;
  while (pos <= contents.size()) {
    auto nl = contents.find('\n', pos);
    if (nl == std::string_view::npos) nl = contents.size();
    ++line_no;
    const std::string line = trim(contents.substr(pos, nl - pos));
    pos = nl + 1;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      format_error(origin, line_no, e.what());
    }
    if (!j.is_object()) format_error(origin, line_no, "expected an object");
    try {
      f(j, line_no);
    } catch (const json::exception& e) {
      format_error(origin, line_no, e.what());
    }
  }
}

std::vector<LabeledClaim> load_scifact(std::string_view contents, std::string_view origin) {
  std::vector<LabeledClaim> out;
  const Split split = split_from_name(origin);
  for_each_jsonl(contents, origin, [&](const json& j, std::size_t line) {
    LabeledClaim c;
    c.claim_text = trim(j.at("claim").get<std::string>());
    c.dataset = Dataset::SciFact;
    c.split = split;
    if (j.contains("label") && j["label"].is_string()) {
      c.gold = parse_label(j["label"].get<std::string>());
    } else if (j.contains("evidence")) {
      const auto& ev = j["evidence"];
      if (!ev.is_object() || ev.empty()) {
        c.gold = VerdictLabel::Nei;
      } else {
        std::vector<std::string> order;
        if (j.contains("cited_doc_ids"))
          for (const auto& d : j["cited_doc_ids"]) order.push_back(d.is_string() ? d.get<std::string>() : d.dump());
        for (auto it = ev.begin(); it != ev.end(); ++it) {
          c.gold_evidence.push_back(it.key());
          if (std::find(order.begin(), order.end(), it.key()) == order.end()) order.push_back(it.key());
        }
        // Label of the first cited document that carries evidence.
        std::optional<VerdictLabel> label;
        for (const auto& doc : order) {
          if (!ev.contains(doc) || ev[doc].empty()) continue;
          label = parse_label(ev[doc].front().at("label").get<std::string>());
          break;
        }
        if (!label) format_error(origin, line, "evidence without labels");
        c.gold = *label;
      }
    } else {
      format_error(origin, line, "claim without label or evidence");
    }
    out.push_back(std::move(c));
  });
  return out;
}

std::vector<LabeledClaim> load_custom(std::string_view contents, std::string_view origin) {
  std::vector<LabeledClaim> out;
  for_each_jsonl(contents, origin, [&](const json& j, std::size_t line) {
    LabeledClaim c;
    c.claim_text = trim(j.at("claim").get<std::string>());
    if (c.claim_text.empty()) format_error(origin, line, "empty claim");
    c.gold = parse_label(j.at("label").get<std::string>());
    c.dataset = Dataset::Custom;
    if (j.contains("split")) c.split = parse_split(j["split"].get<std::string>());
    if (j.contains("evidence"))
      for (const auto& e : j["evidence"]) c.gold_evidence.push_back(e.is_string() ? e.get<std::string>() : e.dump());
    out.push_back(std::move(c));
  });
  return out;
}

double safe_div(double a, double b) { return b == 0.0 ? 0.0 : a / b; }

ClassMetrics class_metrics(std::size_t tp, std::size_t pred_total, std::size_t gold_total) {
  ClassMetrics m;
  m.precision = safe_div(static_cast<double>(tp), static_cast<double>(pred_total));
  m.recall = safe_div(static_cast<double>(tp), static_cast<double>(gold_total));
  m.f1 = safe_div(2.0 * m.precision * m.recall, m.precision + m.recall);
  m.support = gold_total;
  return m;
}

std::string pad(std::string s, std::size_t w) {
  if (s.size() < w) s.insert(0, w - s.size(), ' ');
  return s;
}

std::string pad_right(std::string s, std::size_t w) {
  if (s.size() < w) s.append(w - s.size(), ' ');
  return s;
}

}  // namespace

std::string_view to_string(Dataset d) {
  switch (d) {
    case Dataset::HealthFC: return "healthfc";
    case Dataset::BioASQ7b: return "bioasq7b";
    case Dataset::SciFact: return "scifact";
    case Dataset::Custom: return "custom";
  }
  return "custom";
}

Dataset parse_dataset(std::string_view s) {
  const auto v = to_lower_ascii(trim(s));
  if (v == "healthfc") return Dataset::HealthFC;
  if (v == "bioasq7b" || v == "bioasq" || v == "bioasq-7b") return Dataset::BioASQ7b;
  if (v == "scifact") return Dataset::SciFact;
  if (v == "custom") return Dataset::Custom;
  throw Error(ErrorCode::InvalidArgument, "unknown dataset '" + std::string(s) + "'");
}

std::string_view to_string(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Dev: return "dev";
    case Split::Test: return "test";
  }
  return "test";
}

Split parse_split(std::string_view s) {
  const auto v = to_lower_ascii(trim(s));
  if (v == "train") return Split::Train;
  if (v == "dev" || v == "validation" || v == "val") return Split::Dev;
  if (v == "test") return Split::Test;
  throw Error(ErrorCode::FormatError, "unknown split '" + std::string(s) + "'");
}

std::vector<VerdictLabel> label_space_for(Dataset d) {
  if (d == Dataset::BioASQ7b) return {VerdictLabel::True, VerdictLabel::False};
  return {VerdictLabel::True, VerdictLabel::False, VerdictLabel::Nei};
}

bool is_binary_dataset(Dataset d) { return d == Dataset::BioASQ7b; }

std::vector<LabeledClaim> parse_dataset(Dataset d, std::string_view contents, std::string_view origin) {
  switch (d) {
    case Dataset::HealthFC: return load_healthfc(contents, origin);
    case Dataset::BioASQ7b: return load_bioasq(contents, origin);
    case Dataset::SciFact: return load_scifact(contents, origin);
    case Dataset::Custom: return load_custom(contents, origin);
  }
  return {};
}

std::vector<LabeledClaim> load_dataset(Dataset d, const std::string& path) {
  return parse_dataset(d, read_file(path), path);
}

MetricReport metrics(std::span<const VerdictLabel> golds, std::span<const VerdictLabel> preds,
                     std::span<const VerdictLabel> label_space) {
  if (golds.size() != preds.size())
    throw Error(ErrorCode::LengthMismatch,
                std::to_string(golds.size()) + " gold labels vs " + std::to_string(preds.size()) + " predictions");
  if (golds.empty()) throw Error(ErrorCode::InvalidArgument, "metrics need at least one item");
  if (label_space.empty()) throw Error(ErrorCode::InvalidArgument, "empty label space");
  const std::size_t k = label_space.size();
  auto index_of = [&](VerdictLabel l) {
    for (std::size_t i = 0; i < k; ++i)
      if (label_space[i] == l) return i;
    throw Error(ErrorCode::InvalidForLabelSpace, "label " + std::string(to_string(l)) + " outside the label space");
  };
  MetricReport r;
  r.label_space.assign(label_space.begin(), label_space.end());
  r.n = golds.size();
  r.confusion.assign(k, std::vector<std::size_t>(k, 0));
  for (std::size_t i = 0; i < golds.size(); ++i) ++r.confusion[index_of(golds[i])][index_of(preds[i])];
  for (std::size_t c = 0; c < k; ++c) {
    std::size_t pred_total = 0, gold_total = 0;
    for (std::size_t o = 0; o < k; ++o) {
      pred_total += r.confusion[o][c];
      gold_total += r.confusion[c][o];
    }
    const auto m = class_metrics(r.confusion[c][c], pred_total, gold_total);
    r.per_class[label_space[c]] = m;
    r.macro.precision += m.precision;
    r.macro.recall += m.recall;
    r.macro.f1 += m.f1;
  }
  r.macro.precision /= static_cast<double>(k);
  r.macro.recall /= static_cast<double>(k);
  r.macro.f1 /= static_cast<double>(k);
  return r;
}

double percent_2dp(double fraction) {
  // The epsilon keeps values like 0.08975 (stored just below) on the half-up side.
  return std::floor(fraction * 10000.0 + 0.5 + 1e-9) / 100.0;
}

std::string format_percent(double fraction) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", percent_2dp(fraction));
  return buf;
}

nlohmann::json to_json(const MetricReport& r) {
  json j;
  j["n"] = r.n;
  j["label_space"] = json::array();
  for (const auto l : r.label_space) j["label_space"].push_back(std::string(to_string(l)));
  j["per_class"] = json::object();
  for (const auto l : r.label_space) {
    const auto& m = r.per_class.at(l);
    j["per_class"][std::string(to_string(l))] = {{"precision", m.precision * 100.0},
                                                 {"recall", m.recall * 100.0},
                                                 {"f1", m.f1 * 100.0},
                                                 {"support", m.support}};
  }
  j["macro"] = {{"precision", r.macro.precision * 100.0},
                {"recall", r.macro.recall * 100.0},
                {"f1", r.macro.f1 * 100.0}};
  j["confusion"] = r.confusion;
  return j;
}

std::string render_table(const MetricReport& r, std::string_view title) {
  std::ostringstream os;
  if (!title.empty()) os << title << "\n";
  os << pad_right("class", 8) << pad("P", 8) << pad("R", 8) << pad("F1", 8) << pad("support", 9) << "\n";
  for (const auto l : r.label_space) {
    const auto& m = r.per_class.at(l);
    os << pad_right(std::string(to_string(l)), 8) << pad(format_percent(m.precision), 8)
       << pad(format_percent(m.recall), 8) << pad(format_percent(m.f1), 8) << pad(std::to_string(m.support), 9)
       << "\n";
  }
  os << pad_right("macro", 8) << pad(format_percent(r.macro.precision), 8) << pad(format_percent(r.macro.recall), 8)
     << pad(format_percent(r.macro.f1), 8) << pad(std::to_string(r.n), 9) << "\n";
  os << "confusion (rows gold, cols pred):\n";
  for (std::size_t g = 0; g < r.label_space.size(); ++g) {
    os << pad_right(std::string(to_string(r.label_space[g])), 8);
    for (const auto c : r.confusion[g]) os << pad(std::to_string(c), 8);
    os << "\n";
  }
  return os.str();
}

std::string_view to_string(Baseline b) {
  switch (b) {
    case Baseline::AllTrue: return "all_true";
    case Baseline::AllFalse: return "all_false";
    case Baseline::AllNei: return "all_nei";
  }
  return "all_true";
}

Baseline parse_baseline(std::string_view s) {
  const auto v = to_lower_ascii(trim(s));
  if (v == "all_true") return Baseline::AllTrue;
  if (v == "all_false") return Baseline::AllFalse;
  if (v == "all_nei") return Baseline::AllNei;
  throw Error(ErrorCode::InvalidArgument, "unknown baseline '" + std::string(s) + "'");
}

VerdictLabel baseline_label(Baseline b) {
  switch (b) {
    case Baseline::AllTrue: return VerdictLabel::True;
    case Baseline::AllFalse: return VerdictLabel::False;
    case Baseline::AllNei: return VerdictLabel::Nei;
  }
  return VerdictLabel::True;
}

std::vector<VerdictLabel> baseline_predict(Baseline kind, std::size_t n, std::span<const VerdictLabel> label_space) {
  if (n < 1) throw Error(ErrorCode::InvalidArgument, "baseline needs n >= 1");
  const auto label = baseline_label(kind);
  if (std::find(label_space.begin(), label_space.end(), label) == label_space.end())
    throw Error(ErrorCode::InvalidForLabelSpace,
                std::string(to_string(kind)) + " is not applicable to this label space");
  return std::vector<VerdictLabel>(n, label);
}

EvalResult evaluate_pipeline(std::span<const LabeledClaim> data, pipeline::Pipeline& pipe,
                             const std::optional<std::string>& trace_path) {
  if (data.empty()) throw Error(ErrorCode::InvalidArgument, "empty dataset");
  std::vector<ClaimAssessment> results(data.size());
  std::atomic<std::size_t> next{0}, degraded{0};
  std::mutex err_mu;
  std::exception_ptr fatal;

  auto worker = [&] {
    for (std::size_t i = next++; i < data.size(); i = next++) {
      Claim claim;
      claim.id = std::string(to_string(data[i].dataset)) + ":" + std::to_string(i);
      claim.text = data[i].claim_text;
      claim.source = ClaimSource::Direct;
      try {
        results[i] = pipe.verify_claim(claim, /*use_cache=*/false).assessment;
      } catch (const Error& e) {
        if (e.code() == ErrorCode::ConfigError || e.code() == ErrorCode::LabelSpaceMismatch) {
          std::lock_guard lock(err_mu);
          if (!fatal) fatal = std::current_exception();
          next = data.size();
          return;
        }
        ClaimAssessment a;
        a.claim = claim;
        a.label = VerdictLabel::Nei;
        a.config_fingerprint = pipe.fingerprint();
        a.degraded = true;
        results[i] = std::move(a);
      }
      if (results[i].degraded) ++degraded;
    }
  };
  const std::size_t threads = std::clamp<std::size_t>(pipe.config().backend_concurrency, 1, data.size());
  std::vector<std::jthread> pool;
  for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  pool.clear();
  if (fatal) std::rethrow_exception(fatal);

  std::vector<VerdictLabel> golds, preds;
  for (std::size_t i = 0; i < data.size(); ++i) {
    golds.push_back(data[i].gold);
    preds.push_back(results[i].label);
  }
  std::vector<VerdictLabel> space = label_space_for(data.front().dataset);
  if (std::any_of(preds.begin(), preds.end(), [&](VerdictLabel p) {
        return std::find(space.begin(), space.end(), p) == space.end();
      }))
    throw Error(ErrorCode::LabelSpaceMismatch, "classifier label space does not match the dataset");

  EvalResult out;
  out.report = metrics(golds, preds, space);
  out.degraded = degraded;
  if (trace_path) {
    std::string buf;
    for (const auto& a : results) buf += json(a).dump() + "\n";
    write_file_atomic(*trace_path, buf);
  }
  out.trace = std::move(results);
  return out;
}

std::string_view to_string(VideoLabel v) { return v == VideoLabel::Fake ? "fake" : "real"; }

VideoLabel parse_video_label(std::string_view s) {
  const auto v = to_lower_ascii(trim(s));
  if (v == "real") return VideoLabel::Real;
  if (v == "fake") return VideoLabel::Fake;
  throw Error(ErrorCode::UnknownLabel, "unknown video label '" + std::string(s) + "'");
}

VideoVerdict video_verdict(std::span<const ClaimAssessment> assessments) {
  VideoVerdict v;
  v.no_claims_warning = assessments.empty();
  for (const auto& a : assessments)
    if (a.label == VerdictLabel::False) v.label = VideoLabel::Fake;
  return v;
}

VideoMetrics video_metrics(std::span<const VideoCase> cases) {
  if (cases.empty()) throw Error(ErrorCode::InvalidArgument, "video_metrics needs at least one case");
  VideoMetrics m;
  for (const auto& c : cases) {
    std::vector<ClaimAssessment> as;
    for (const auto& [text, a] : c.claims) as.push_back(a);
    const auto v = video_verdict(as);
    if (v.no_claims_warning) ++m.no_claim_videos;
    ++m.confusion[c.gold == VideoLabel::Fake][v.label == VideoLabel::Fake];
  }
  for (const int cls : {0, 1}) {
    const std::size_t tp = m.confusion[cls][cls];
    const std::size_t pred_total = m.confusion[0][cls] + m.confusion[1][cls];
    const std::size_t gold_total = m.confusion[cls][0] + m.confusion[cls][1];
    m.per_class[cls ? VideoLabel::Fake : VideoLabel::Real] = class_metrics(tp, pred_total, gold_total);
  }
  return m;
}

std::vector<VideoCase> parse_video_cases(std::string_view contents) {
  std::vector<VideoCase> out;
  for_each_jsonl(contents, "<video cases>", [&](const json& j, std::size_t line) {
    VideoCase c;
    c.video_id = j.at("video_id").get<std::string>();
    c.gold = parse_video_label(j.at("gold").get<std::string>());
    std::size_t k = 0;
    for (const auto& cj : j.at("claims")) {
      ClaimAssessment a;
      std::string text;
      if (cj.contains("claim") && cj["claim"].is_object()) {
        a = cj.get<ClaimAssessment>();
        text = a.claim.text;
      } else {
        text = cj.at("text").get<std::string>();
        a.claim.id = c.video_id + "#" + std::to_string(k);
        a.claim.text = text;
        a.claim.source = ClaimSource::Video;
        a.label = parse_label(cj.at("label").get<std::string>());
        a.confidence = cj.value("confidence", 1.0);
      }
      if (text.empty()) format_error("<video cases>", line, "claim without text");
      c.claims.emplace_back(std::move(text), std::move(a));
      ++k;
    }
    out.push_back(std::move(c));
  });
  return out;
}

std::vector<VideoCase> load_video_cases(const std::string& path) { return parse_video_cases(read_file(path)); }

nlohmann::json to_json(const VideoMetrics& m) {
  json j;
  for (const auto cls : {VideoLabel::Real, VideoLabel::Fake}) {
    const auto& c = m.per_class.at(cls);
    j["per_class"][std::string(to_string(cls))] = {
        {"precision", c.precision * 100.0}, {"recall", c.recall * 100.0}, {"f1", c.f1 * 100.0}, {"support", c.support}};
  }
  j["confusion"] = {{m.confusion[0][0], m.confusion[0][1]}, {m.confusion[1][0], m.confusion[1][1]}};
  j["no_claim_videos"] = m.no_claim_videos;
  return j;
}

std::string render_table(const VideoMetrics& m) {
  std::ostringstream os;
  os << pad_right("class", 8) << pad("P", 8) << pad("R", 8) << pad("F1", 8) << pad("support", 9) << "\n";
  for (const auto cls : {VideoLabel::Real, VideoLabel::Fake}) {
    const auto& c = m.per_class.at(cls);
    os << pad_right(std::string(to_string(cls)), 8) << pad(format_percent(c.precision), 8)
       << pad(format_percent(c.recall), 8) << pad(format_percent(c.f1), 8) << pad(std::to_string(c.support), 9)
       << "\n";
  }
  if (m.no_claim_videos) os << "warning: " << m.no_claim_videos << " video(s) without claims counted as real\n";
  return os.str();
}

}  // namespace cer::eval
