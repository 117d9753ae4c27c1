#pragma once

// Hierarchical navigable small-world graph over unit vectors, scored by inner
// product. The graph does not own vector data: every call takes the row-major
// matrix it was built over.

#include <cstdint>
#include <iosfwd>
#include <span>
#include <utility>
#include <vector>

namespace cer::retrieval {

struct HnswParams {
  int M = 16;
  int ef_construction = 200;
  int ef_search = 100;
  std::uint64_t seed = 42;

  bool operator==(const HnswParams&) const = default;
};

class HnswGraph {
 public:
  HnswGraph() = default;
  HnswGraph(std::size_t dim, HnswParams params);

  /// Inserts rows 0..n-1 of `data` in order.
  void build(std::span<const float> data, std::size_t n);

  /// Approximate top-k by inner product: (row, score), best first.
  std::vector<std::pair<std::uint32_t, double>> search(std::span<const float> data, std::span<const float> query,
                                                       std::size_t k, int ef) const;

  std::size_t size() const { return levels_.size(); }
  const HnswParams& params() const { return params_; }

  void write(std::ostream& out) const;
  static HnswGraph read(std::istream& in, std::size_t dim);

 private:
  using Candidate = std::pair<double, std::uint32_t>;  // (score, row)

  double score(std::span<const float> data, std::uint32_t row, std::span<const float> q) const;
  std::vector<Candidate> search_layer(std::span<const float> data, std::span<const float> q,
                                      const std::vector<Candidate>& entry, int ef, int level) const;
  std::vector<std::uint32_t> select_neighbors(std::span<const float> data, std::vector<Candidate> candidates,
                                              std::size_t m) const;
  void insert(std::span<const float> data, std::uint32_t row, int level);
  std::size_t max_links(int level) const { return level == 0 ? 2 * params_.M : params_.M; }

  std::size_t dim_ = 0;
  HnswParams params_;
  std::vector<int> levels_;
  // links_[row][level] = neighbor rows
  std::vector<std::vector<std::vector<std::uint32_t>>> links_;
  std::int64_t entry_ = -1;
  int max_level_ = -1;
};

}  // namespace cer::retrieval
