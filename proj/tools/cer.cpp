// Command-line entry point: ingest-corpus, build-index, verify, evaluate, serve.

#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

#include "cer/corpus.hpp"
#include "cer/eval.hpp"
#include "cer/pipeline.hpp"
#include "cer/retrieval.hpp"
#include "cer/service.hpp"
#include "cer/util.hpp"

namespace {

using nlohmann::json;
using namespace cer;

struct Globals {
  std::string config_path;
  bool mock = false;
  std::string retriever;
};

pipeline::PipelineConfig make_config(const Globals& g) {
  std::string path = g.config_path;
  if (path.empty())
    if (const char* env = std::getenv("CER_CONFIG"); env && *env) path = env;
  auto cfg = pipeline::load_config(path);
  if (g.mock) cfg.mock_backends = true;
  if (!g.retriever.empty()) cfg.retrieval.retriever = parse_retriever(g.retriever);
  pipeline::validate(cfg);
  return cfg;
}

void write_report(const std::string& path, const json& j) {
  if (path.empty()) return;
  write_file_atomic(path, j.dump(2) + "\n");
  std::cerr << "report written to " << path << "\n";
}

int cmd_ingest(const Globals& g, const std::string& query, int max_docs, const std::string& from, std::string out) {
  const auto cfg = make_config(g);
  if (out.empty()) out = cfg.corpus_path;
  if (out.empty()) throw Error(ErrorCode::ConfigError, "no output path: pass --out or set corpus_path");
  std::vector<corpus::CorpusDoc> docs;
  if (!from.empty()) {
    docs = corpus::corpus_load(from).docs();
  } else {
    if (query.empty()) throw Error(ErrorCode::InvalidArgument, "pass --query or --from");
    corpus::PubMedConfig pc;
    if (const char* k = std::getenv("CER_PUBMED_API_KEY"); k && *k) pc.api_key = k;
    corpus::PubMedClient client(pc);
    docs = client.search_fetch(query, max_docs);
  }
  const corpus::Corpus c(std::move(docs));
  corpus::corpus_save(c, out);
  std::cout << "wrote " << c.size() << " documents to " << out << "\n";
  return 0;
}

int cmd_build_index(const Globals& g, std::string out) {
  const auto cfg = make_config(g);
  if (out.empty()) out = cfg.index_path;
  if (cfg.corpus_path.empty() || out.empty())
    throw Error(ErrorCode::ConfigError, "build-index needs corpus_path and index_path (or --out)");
  const auto c = corpus::corpus_load(cfg.corpus_path);
  const auto backends = cfg.mock_backends ? pipeline::make_mock_backends(cfg) : pipeline::make_http_backends(cfg);
  const auto bundle = retrieval::build_indexes(c, *backends.embedder, cfg.dense_mode, cfg.hnsw, cfg.bm25);
  retrieval::save_indexes(bundle, out);
  std::cout << "indexed " << c.size() << " documents (" << retrieval::to_string(cfg.dense_mode) << ", dim "
            << bundle.dense.dim() << ") into " << out << "\n";
  return 0;
}

int cmd_verify(const Globals& g, const std::string& text, const std::string& url, const std::string& video,
               const std::string& lang, const std::string& report) {
  const int given = !text.empty() + !url.empty() + !video.empty();
  if (given != 1) throw Error(ErrorCode::InvalidArgument, "pass exactly one of --text, --url, --video");
  pipeline::Pipeline p(make_config(g));
  json out;
  if (!text.empty()) {
    const auto r = p.verify_text(text);
    out = {{"assessment", r.assessment}, {"cached", r.cached}};
  } else {
    ingest::SourceDocument doc;
    if (!url.empty()) {
      doc = p.load_url(url);
    } else {
      const auto media = read_file(video);
      doc = p.load_video(std::as_bytes(std::span(media.data(), media.size())), "file:" + video,
                         lang.empty() ? std::nullopt : std::optional<std::string>(lang));
    }
    out = {{"source", doc.uri.value_or(doc.id)}, {"assessments", p.verify_document(doc)}};
  }
  out["config_fingerprint"] = p.fingerprint();
  std::cout << out.dump(2) << "\n";
  write_report(report, out);
  return 0;
}

std::vector<eval::LabeledClaim> select_split(std::vector<eval::LabeledClaim> data, const std::string& split) {
  if (split == "all") return data;
  const auto want = eval::parse_split(split);
  std::vector<eval::LabeledClaim> out;
  for (auto& c : data)
    if (c.split == want) out.push_back(std::move(c));
  if (out.empty()) throw Error(ErrorCode::InvalidArgument, "no claims in split '" + split + "' (use --split all)");
  return out;
}

int cmd_evaluate(const Globals& g, const std::string& dataset, const std::string& data_path, const std::string& split,
                 const std::string& baseline, const std::string& video_cases, const std::string& report,
                 const std::string& trace) {
  if (!video_cases.empty()) {
    const auto cases = eval::load_video_cases(video_cases);
    const auto m = eval::video_metrics(cases);
    std::cout << "videos: " << cases.size() << "\n" << eval::render_table(m);
    write_report(report, eval::to_json(m));
    return 0;
  }
  if (dataset.empty() || data_path.empty()) throw Error(ErrorCode::InvalidArgument, "pass --dataset and --data");
  const auto ds = eval::parse_dataset(dataset);
  const auto data = select_split(eval::load_dataset(ds, data_path), split);
  const auto space = eval::label_space_for(ds);
  std::vector<VerdictLabel> golds;
  for (const auto& c : data) golds.push_back(c.gold);

  json out{{"dataset", std::string(eval::to_string(ds))}, {"split", split}, {"n", data.size()}};
  eval::MetricReport r;
  if (!baseline.empty()) {
    const auto kind = eval::parse_baseline(baseline);
    r = eval::metrics(golds, eval::baseline_predict(kind, data.size(), space), space);
    out["predictor"] = std::string(eval::to_string(kind));
    std::cout << eval::render_table(r, std::string(eval::to_string(ds)) + " / " + std::string(eval::to_string(kind)));
    if (eval::is_binary_dataset(ds)) {
      const auto cls = eval::baseline_label(kind);
      const auto& pc = r.per_class.at(cls);
      std::cout << "per-class view (" << to_string(cls) << "): P " << eval::format_percent(pc.precision) << "  R "
                << eval::format_percent(pc.recall) << "  F1 " << eval::format_percent(pc.f1) << "\n";
      out["per_class_view"] = {{"label", std::string(to_string(cls))},
                               {"precision", pc.precision * 100.0},
                               {"recall", pc.recall * 100.0},
                               {"f1", pc.f1 * 100.0}};
    }
  } else {
    auto cfg = make_config(g);
    cfg.classifier.label_space = space;
    pipeline::Pipeline p(cfg);
    const auto res = eval::evaluate_pipeline(data, p, trace.empty() ? std::nullopt : std::optional<std::string>(trace));
    r = res.report;
    out["predictor"] = "pipeline";
    out["degraded"] = res.degraded;
    out["config_fingerprint"] = p.fingerprint();
    std::cout << eval::render_table(r, std::string(eval::to_string(ds)) + " / pipeline");
    if (res.degraded) std::cout << "degraded claims: " << res.degraded << "\n";
  }
  out["report"] = eval::to_json(r);
  write_report(report, out);
  return 0;
}

service::Service* g_service = nullptr;

int cmd_serve(const Globals& g, const std::string& host, int port, const std::string& static_dir) {
  auto p = std::make_shared<pipeline::Pipeline>(make_config(g));
  service::ServiceOptions opts;
  opts.host = host;
  opts.port = port;
  if (!static_dir.empty()) opts.static_dir = static_dir;
  service::Service svc(p, opts);
  const int bound = svc.bind();
  g_service = &svc;
  std::signal(SIGINT, [](int) {
    if (g_service) g_service->stop();
  });
  std::signal(SIGTERM, [](int) {
    if (g_service) g_service->stop();
  });
  std::cerr << "listening on http://" << host << ":" << bound << " (corpus " << p->corpus_size()
            << " docs, fingerprint " << p->fingerprint().substr(0, 12) << ")\n";
  svc.serve();
  g_service = nullptr;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Evidence-based biomedical claim verification"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config_path, "Pipeline config JSON (default: $CER_CONFIG)");
  app.add_flag("--mock-backends", g.mock, "Use deterministic mock LLM, embedding, classifier and speech backends");
  app.add_option("--retriever", g.retriever, "Evidence retriever")->check(CLI::IsMember({"dense", "sparse"}));

  auto* ingest = app.add_subcommand("ingest-corpus", "Fetch PubMed abstracts (or import JSON-Lines) into a corpus file");
  std::string query, from, ingest_out;
  int max_docs = 100;
  ingest->add_option("--query", query, "PubMed search query");
  ingest->add_option("--max-docs", max_docs, "Maximum documents to fetch")->check(CLI::PositiveNumber);
  ingest->add_option("--from", from, "Import an existing JSON-Lines corpus instead of querying PubMed");
  ingest->add_option("--out", ingest_out, "Output corpus path (default: corpus_path)");

  auto* build = app.add_subcommand("build-index", "Build dense and sparse indexes for the configured corpus");
  std::string index_out;
  build->add_option("--out", index_out, "Index directory (default: index_path)");

  auto* verify = app.add_subcommand("verify", "Verify a claim, a web page, or a video");
  std::string text, url, video, lang, report, trace;
  verify->add_option("--text", text, "Claim text");
  verify->add_option("--url", url, "Web page URL");
  verify->add_option("--video", video, "Video or audio file");
  verify->add_option("--lang", lang, "Transcription language hint");
  verify->add_option("--report", report, "Also write the JSON result here");

  auto* evaluate = app.add_subcommand("evaluate", "Score baselines or the pipeline on a benchmark");
  std::string dataset, data_path, split = "test", baseline, video_cases;
  evaluate->add_option("--dataset", dataset, "healthfc | bioasq7b | scifact | custom");
  evaluate->add_option("--data", data_path, "Dataset file in its release format");
  evaluate->add_option("--split", split, "train | dev | test | all")
      ->check(CLI::IsMember({"train", "dev", "test", "all"}));
  evaluate->add_option("--baseline", baseline, "Constant predictor instead of the pipeline")
      ->check(CLI::IsMember({"all_true", "all_false", "all_nei"}));
  evaluate->add_option("--video-cases", video_cases, "Score the video rule on a JSON-Lines case file");
  evaluate->add_option("--report", report, "Write the JSON report here");
  evaluate->add_option("--trace", trace, "Write per-claim assessments (JSON-Lines) here");

  auto* serve = app.add_subcommand("serve", "Run the HTTP API");
  std::string host = "127.0.0.1", static_dir;
  int port = 8080;
  serve->add_option("--host", host, "Bind address");
  serve->add_option("--port", port, "Port (0 = any free port)");
  serve->add_option("--static", static_dir, "Serve dashboard assets from this directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*ingest) return cmd_ingest(g, query, max_docs, from, ingest_out);
    if (*build) return cmd_build_index(g, index_out);
    if (*verify) return cmd_verify(g, text, url, video, lang, report);
    if (*evaluate) return cmd_evaluate(g, dataset, data_path, split, baseline, video_cases, report, trace);
    if (*serve) return cmd_serve(g, host, port, static_dir);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.code() == ErrorCode::ConfigError || e.code() == ErrorCode::InvalidArgument ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
