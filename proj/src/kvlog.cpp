#include "cer/kvlog.hpp"

#include <filesystem>
#include <iostream>
#include <sstream>
#include <vector>

#include <json.hpp>

#include "cer/util.hpp"

namespace cer {

namespace {

std::string checksum(const std::string& k, const std::string& v) { return sha256_hex(k + "\n" + v); }

std::string value_record(const std::string& k, const std::string& v) {
  return nlohmann::json{{"k", k}, {"v", v}, {"c", checksum(k, v)}}.dump();
}

}  // namespace

KvLog::KvLog(std::string path, std::size_t max_entries) : path_(std::move(path)), max_entries_(max_entries) {
  if (!path_.empty()) load_and_compact();
}

void KvLog::load_and_compact() {
  std::error_code ec;
  const auto parent = std::filesystem::path(path_).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent, ec);

  if (std::filesystem::exists(path_, ec)) {
    std::ifstream in(path_, std::ios::binary);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      ++stats_.records;
      try {
        const auto j = nlohmann::json::parse(line);
        const auto k = j.at("k").get<std::string>();
        if (j.contains("d")) {
          if (const auto it = map_.find(k); it != map_.end()) {
            lru_.erase(it->second.lru);
            map_.erase(it);
          }
          continue;
        }
        auto v = j.at("v").get<std::string>();
        if (j.at("c").get<std::string>() != checksum(k, v)) {
          ++stats_.corrupt;
          continue;
        }
        if (const auto it = map_.find(k); it != map_.end()) {
          lru_.erase(it->second.lru);
          map_.erase(it);
        }
        lru_.push_front(k);
        map_.emplace(k, Entry{std::move(v), lru_.begin()});
      } catch (const std::exception&) {
        ++stats_.corrupt;
      }
    }
  }
  evict_over_bound();
  stats_.live = map_.size();

  // Rewrite oldest first so replaying the file restores the LRU order.
  std::string compacted;
  for (auto it = lru_.rbegin(); it != lru_.rend(); ++it) compacted += value_record(*it, map_.at(*it).value) + "\n";
  try {
    write_file_atomic(path_, compacted);
    out_.open(path_, std::ios::binary | std::ios::app);
    if (!out_) throw std::runtime_error("cannot open for append");
  } catch (const std::exception& e) {
    std::cerr << "cache: " << path_ << ": " << e.what() << "; continuing without persistence\n";
    out_ = std::ofstream();
  }
}

void KvLog::append(const std::string& line) {
  if (!out_.is_open()) return;
  out_ << line << '\n';
  out_.flush();
  if (!out_) {
    std::cerr << "cache: write to " << path_ << " failed; continuing without persistence\n";
    out_.close();
  }
}

void KvLog::evict_over_bound() {
  if (max_entries_ == 0) return;
  while (map_.size() > max_entries_) {
    const std::string victim = lru_.back();
    lru_.pop_back();
    map_.erase(victim);
    append(nlohmann::json{{"k", victim}, {"d", true}}.dump());
  }
}

std::optional<std::string> KvLog::get(const std::string& key) {
  std::lock_guard lock(mu_);
  const auto it = map_.find(key);
  if (it == map_.end()) return std::nullopt;
  lru_.splice(lru_.begin(), lru_, it->second.lru);
  return it->second.value;
}

void KvLog::put(const std::string& key, std::string value) {
  std::lock_guard lock(mu_);
  append(value_record(key, value));
  if (const auto it = map_.find(key); it != map_.end()) {
    it->second.value = std::move(value);
    lru_.splice(lru_.begin(), lru_, it->second.lru);
  } else {
    lru_.push_front(key);
    map_.emplace(key, Entry{std::move(value), lru_.begin()});
    evict_over_bound();
  }
}

void KvLog::erase(const std::string& key) {
  std::lock_guard lock(mu_);
  const auto it = map_.find(key);
  if (it == map_.end()) return;
  lru_.erase(it->second.lru);
  map_.erase(it);
  append(nlohmann::json{{"k", key}, {"d", true}}.dump());
}

std::size_t KvLog::size() const {
  std::lock_guard lock(mu_);
  return map_.size();
}

bool KvLog::persistent() const {
  std::lock_guard lock(mu_);
  return out_.is_open();
}

}  // namespace cer
