#include "cer/hnsw.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <istream>
#include <ostream>
#include <queue>
#include <random>

#include "cer/core.hpp"

namespace cer::retrieval {

static_assert(std::endian::native == std::endian::little, "index files are little-endian");

namespace {

struct WorstFirst {
  bool operator()(const std::pair<double, std::uint32_t>& a, const std::pair<double, std::uint32_t>& b) const {
    return a.first > b.first || (a.first == b.first && a.second < b.second);
  }
};

struct BestFirst {
  bool operator()(const std::pair<double, std::uint32_t>& a, const std::pair<double, std::uint32_t>& b) const {
    return a.first < b.first || (a.first == b.first && a.second > b.second);
  }
};

double dot(const float* a, const float* b, std::size_t dim) {
  double s = 0.0;
  for (std::size_t i = 0; i < dim; ++i) s += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  return s;
}

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T take(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw Error(ErrorCode::FormatError, "truncated hnsw graph");
  return v;
}

constexpr std::uint32_t kMagic = 0x57534e48;  // "HNSW"

}  // namespace

HnswGraph::HnswGraph(std::size_t dim, HnswParams params) : dim_(dim), params_(params) {
  if (params_.M < 2 || params_.ef_construction < 1 || params_.ef_search < 1)
    throw Error(ErrorCode::ConfigError, "invalid hnsw parameters");
}

double HnswGraph::score(std::span<const float> data, std::uint32_t row, std::span<const float> q) const {
  return dot(data.data() + static_cast<std::size_t>(row) * dim_, q.data(), dim_);
}

std::vector<HnswGraph::Candidate> HnswGraph::search_layer(std::span<const float> data, std::span<const float> q,
                                                          const std::vector<Candidate>& entry, int ef,
                                                          int level) const {
  std::vector<char> visited(levels_.size(), 0);
  std::priority_queue<Candidate, std::vector<Candidate>, BestFirst> frontier;
  std::priority_queue<Candidate, std::vector<Candidate>, WorstFirst> best;
  for (const auto& e : entry) {
    if (visited[e.second]) continue;
    visited[e.second] = 1;
    frontier.push(e);
    best.push(e);
    if (best.size() > static_cast<std::size_t>(ef)) best.pop();
  }
  while (!frontier.empty()) {
    const Candidate c = frontier.top();
    frontier.pop();
    if (best.size() >= static_cast<std::size_t>(ef) && c.first < best.top().first) break;
    for (const std::uint32_t nb : links_[c.second][static_cast<std::size_t>(level)]) {
      if (visited[nb]) continue;
      visited[nb] = 1;
      const double s = score(data, nb, q);
      if (best.size() < static_cast<std::size_t>(ef) || s > best.top().first) {
        frontier.emplace(s, nb);
        best.emplace(s, nb);
        if (best.size() > static_cast<std::size_t>(ef)) best.pop();
      }
    }
  }
  std::vector<Candidate> out;
  out.reserve(best.size());
  while (!best.empty()) {
    out.push_back(best.top());
    best.pop();
  }
  std::reverse(out.begin(), out.end());
  return out;
}

std::vector<std::uint32_t> HnswGraph::select_neighbors(std::span<const float> data, std::vector<Candidate> candidates,
                                                       std::size_t m) const {
  std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    return a.first > b.first || (a.first == b.first && a.second < b.second);
  });
  std::vector<std::uint32_t> kept;
  std::vector<std::uint32_t> pruned;
  for (const auto& [s, row] : candidates) {
    if (kept.size() >= m) break;
    const std::span<const float> v(data.data() + static_cast<std::size_t>(row) * dim_, dim_);
    bool diverse = true;
    for (const std::uint32_t r : kept) {
      if (score(data, r, v) > s) {
        diverse = false;
        break;
      }
    }
    (diverse ? kept : pruned).push_back(row);
  }
  // Keep pruned connections to fill the remaining slots.
  for (std::size_t i = 0; i < pruned.size() && kept.size() < m; ++i) kept.push_back(pruned[i]);
  return kept;
}

void HnswGraph::insert(std::span<const float> data, std::uint32_t row, int level) {
  links_[row].assign(static_cast<std::size_t>(level) + 1, {});
  if (entry_ < 0) {
    entry_ = row;
    max_level_ = level;
    return;
  }
  const std::span<const float> q(data.data() + static_cast<std::size_t>(row) * dim_, dim_);
  const auto ep_row = static_cast<std::uint32_t>(entry_);
  std::vector<Candidate> ep{{score(data, ep_row, q), ep_row}};
  for (int l = max_level_; l > level; --l) ep = search_layer(data, q, ep, 1, l);

  for (int l = std::min(level, max_level_); l >= 0; --l) {
    auto found = search_layer(data, q, ep, params_.ef_construction, l);
    const auto neighbors = select_neighbors(data, found, static_cast<std::size_t>(params_.M));
    links_[row][static_cast<std::size_t>(l)] = neighbors;
    const std::size_t cap = max_links(l);
    for (const std::uint32_t nb : neighbors) {
      auto& back = links_[nb][static_cast<std::size_t>(l)];
      back.push_back(row);
      if (back.size() > cap) {
        const std::span<const float> nv(data.data() + static_cast<std::size_t>(nb) * dim_, dim_);
        std::vector<Candidate> cand;
        cand.reserve(back.size());
        for (const std::uint32_t x : back) cand.emplace_back(score(data, x, nv), x);
        back = select_neighbors(data, std::move(cand), cap);
      }
    }
    ep = std::move(found);
  }
  if (level > max_level_) {
    max_level_ = level;
    entry_ = row;
  }
}

void HnswGraph::build(std::span<const float> data, std::size_t n) {
  if (data.size() != n * dim_) throw Error(ErrorCode::DimensionMismatch, "hnsw data size does not match n*dim");
  levels_.assign(n, 0);
  links_.assign(n, {});
  entry_ = -1;
  max_level_ = -1;
  std::mt19937_64 rng(params_.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double ml = 1.0 / std::log(static_cast<double>(params_.M));
  for (std::size_t i = 0; i < n; ++i) {
    const double u = 1.0 - unit(rng);  // (0, 1]
    levels_[i] = static_cast<int>(std::floor(-std::log(u) * ml));
  }
  for (std::size_t i = 0; i < n; ++i) insert(data, static_cast<std::uint32_t>(i), levels_[i]);
}

std::vector<std::pair<std::uint32_t, double>> HnswGraph::search(std::span<const float> data,
                                                                std::span<const float> query, std::size_t k,
                                                                int ef) const {
  std::vector<std::pair<std::uint32_t, double>> out;
  if (entry_ < 0 || k == 0) return out;
  const auto ep_row = static_cast<std::uint32_t>(entry_);
  std::vector<Candidate> ep{{score(data, ep_row, query), ep_row}};
  for (int l = max_level_; l > 0; --l) ep = search_layer(data, query, ep, 1, l);
  const int width = std::max(ef, static_cast<int>(k));
  const auto found = search_layer(data, query, ep, width, 0);
  for (std::size_t i = 0; i < found.size() && i < k; ++i) out.emplace_back(found[i].second, found[i].first);
  return out;
}

void HnswGraph::write(std::ostream& out) const {
  put(out, kMagic);
  put(out, static_cast<std::uint32_t>(params_.M));
  put(out, static_cast<std::uint32_t>(params_.ef_construction));
  put(out, static_cast<std::uint32_t>(params_.ef_search));
  put(out, params_.seed);
  put(out, static_cast<std::uint64_t>(levels_.size()));
  put(out, entry_);
  put(out, static_cast<std::int32_t>(max_level_));
  for (std::size_t i = 0; i < levels_.size(); ++i) {
    put(out, static_cast<std::int32_t>(levels_[i]));
    for (const auto& layer : links_[i]) {
      put(out, static_cast<std::uint32_t>(layer.size()));
      for (const std::uint32_t nb : layer) put(out, nb);
    }
  }
}

HnswGraph HnswGraph::read(std::istream& in, std::size_t dim) {
  if (take<std::uint32_t>(in) != kMagic) throw Error(ErrorCode::FormatError, "not an hnsw graph file");
  HnswParams p;
  p.M = static_cast<int>(take<std::uint32_t>(in));
  p.ef_construction = static_cast<int>(take<std::uint32_t>(in));
  p.ef_search = static_cast<int>(take<std::uint32_t>(in));
  p.seed = take<std::uint64_t>(in);
  HnswGraph g(dim, p);
  const auto n = take<std::uint64_t>(in);
  g.entry_ = take<std::int64_t>(in);
  g.max_level_ = take<std::int32_t>(in);
  g.levels_.resize(n);
  g.links_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    g.levels_[i] = take<std::int32_t>(in);
    if (g.levels_[i] < 0 || g.levels_[i] > 64) throw Error(ErrorCode::FormatError, "corrupt hnsw level");
    g.links_[i].resize(static_cast<std::size_t>(g.levels_[i]) + 1);
    for (auto& layer : g.links_[i]) {
      const auto count = take<std::uint32_t>(in);
      layer.resize(count);
      for (auto& nb : layer) {
        nb = take<std::uint32_t>(in);
        if (nb >= n) throw Error(ErrorCode::FormatError, "corrupt hnsw link");
      }
    }
  }
  if (n > 0 && (g.entry_ < 0 || static_cast<std::uint64_t>(g.entry_) >= n))
    throw Error(ErrorCode::FormatError, "corrupt hnsw entry point");
  return g;
}

}  // namespace cer::retrieval
