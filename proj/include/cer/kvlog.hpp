#pragma once

// Single-file append-log key/value store with an in-memory LRU index.

#include <cstddef>
#include <fstream>
#include <list>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>

namespace cer {

/// Each line is a JSON record {"k","v","c"} where c = SHA-256(k + "\n" + v),
/// or a tombstone {"k","d":true}. Records that fail to parse or verify are
/// dropped at load time. The file is compacted on open. I/O failures are
/// logged and the store degrades to memory-only; they never surface to callers.
class KvLog {
 public:
  struct LoadStats {
    std::size_t records = 0;
    std::size_t corrupt = 0;
    std::size_t live = 0;
  };

  /// Empty path keeps everything in memory. max_entries == 0 means unbounded.
  KvLog(std::string path, std::size_t max_entries);

  std::optional<std::string> get(const std::string& key);
  void put(const std::string& key, std::string value);
  void erase(const std::string& key);

  std::size_t size() const;
  bool persistent() const;
  const LoadStats& load_stats() const { return stats_; }
  const std::string& path() const { return path_; }

 private:
  struct Entry {
    std::string value;
    std::list<std::string>::iterator lru;
  };

  void load_and_compact();
  void append(const std::string& line);
  void evict_over_bound();

  std::string path_;
  std::size_t max_entries_;
  mutable std::mutex mu_;
  std::list<std::string> lru_;  // front = most recently used
  std::unordered_map<std::string, Entry> map_;
  std::ofstream out_;
  LoadStats stats_;
};

}  // namespace cer
