#pragma once

#include <cstdint>
#include <filesystem>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <string>
#include <unordered_map>

#include "crystalgym/calc/calculator.hpp"

namespace crystalgym {

struct PropertyCacheKey {
  std::uint64_t structure_hash = 0;
  std::string composition;  // ordered per-site symbols
  Property property = Property::density;
  std::string calculator_id;
  int calculator_version = 1;

  static PropertyCacheKey make(const Structure& s, const Composition& c, const PropertyCalculator& calc);
  // 16 hex digits; equal keys give equal hashes.
  std::string hash() const;
};

struct CacheStats {
  std::size_t records = 0;
  std::size_t successes = 0;
  std::size_t failures = 0;
  std::size_t skipped_lines = 0;  // partial or malformed lines ignored on load
  std::map<std::string, std::size_t> per_property;
};

// Append-only result store. Each line is
//   <key-hash>\t<property>\t<success 0|1>\t<value or failure reason>\t<wall_time>\n
// Lines without a terminating newline or with the wrong shape are skipped on
// load, so a crash mid-write never corrupts earlier records. Readers run
// concurrently; writers are serialised. An empty path keeps results in memory.
class ResultCache {
 public:
  explicit ResultCache(std::filesystem::path path = {});  // throws StoreError

  const std::filesystem::path& path() const noexcept { return path_; }

  std::optional<CalculatorResult> lookup(const std::string& key_hash) const;
  void store(const std::string& key_hash, Property property, const CalculatorResult& result);

  // Hit: stored result, calculator untouched. Miss: compute, persist, return.
  // Concurrent misses on one key share a single computation.
  CalculatorResult cached(const PropertyCalculator& calculator, const PropertyCacheKey& key,
                          const Structure& structure, const Composition& composition);

  CacheStats stats() const;
  std::size_t size() const;

 private:
  void load();

  std::filesystem::path path_;
  mutable std::shared_mutex mutex_;
  std::unordered_map<std::string, CalculatorResult> results_;
  std::unordered_map<std::string, Property> properties_;
  std::size_t skipped_ = 0;
  std::mutex write_mutex_;
  bool needs_newline_ = false;  // guarded by write_mutex_
  std::mutex inflight_mutex_;
  std::unordered_map<std::string, std::shared_future<CalculatorResult>> inflight_;
};

// Reads a store file without opening it for writing (for `cache stats`).
CacheStats read_cache_stats(const std::filesystem::path& path);

// Calculator decorator that routes every request through a ResultCache.
class CachedCalculator final : public PropertyCalculator {
 public:
  CachedCalculator(std::shared_ptr<const PropertyCalculator> inner, std::shared_ptr<ResultCache> cache);

  std::string_view id() const noexcept override { return inner_->id(); }
  int version() const noexcept override { return inner_->version(); }
  Property property() const noexcept override { return inner_->property(); }
  CalculatorResult compute(const Structure& structure, const Composition& composition) const override;

  const PropertyCalculator& inner() const noexcept { return *inner_; }
  ResultCache& cache() const noexcept { return *cache_; }

 private:
  std::shared_ptr<const PropertyCalculator> inner_;
  std::shared_ptr<ResultCache> cache_;
};

}  // namespace crystalgym
