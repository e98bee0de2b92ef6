#include "crystalgym/calc/cache.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <vector>

#include "crystalgym/core/errors.hpp"

namespace crystalgym {
namespace {

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return h;
}

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    const auto tab = line.find('\t', pos);
    out.push_back(line.substr(pos, tab == std::string_view::npos ? std::string_view::npos : tab - pos));
    if (tab == std::string_view::npos) break;
    pos = tab + 1;
  }
  return out;
}

bool parse_double(std::string_view s, double& out) {
  std::string tmp(s);
  char* end = nullptr;
  out = std::strtod(tmp.c_str(), &end);
  return !tmp.empty() && end == tmp.c_str() + tmp.size();
}

bool is_key_hash(std::string_view s) {
  if (s.size() != 16) return false;
  for (char c : s)
    if (!((c >= '0' && c <= '9') || (c >= 'a' && c <= 'f'))) return false;
  return true;
}

struct Record {
  std::string key;
  Property property;
  CalculatorResult result;
};

std::optional<Record> parse_record(std::string_view line) {
  const auto f = split_tabs(line);
  if (f.size() != 5 || !is_key_hash(f[0])) return std::nullopt;
  Record r;
  r.key = std::string(f[0]);
  try {
    r.property = parse_property(f[1]);
  } catch (const ConfigError&) {
    return std::nullopt;
  }
  double wall = 0.0;
  if (!parse_double(f[4], wall)) return std::nullopt;
  if (f[2] == "1") {
    double v = 0.0;
    if (!parse_double(f[3], v)) return std::nullopt;
    r.result = CalculatorResult::ok(v, wall);
  } else if (f[2] == "0") {
    const auto reason = parse_failure_reason(f[3]);
    if (!reason) return std::nullopt;
    r.result = CalculatorResult::failed(*reason, wall);
  } else {
    return std::nullopt;
  }
  return r;
}

std::string format_record(const std::string& key, Property property, const CalculatorResult& r) {
  char value[64], wall[64];
  if (r.success) {
    std::snprintf(value, sizeof value, "%.17g", *r.value);
  } else {
    std::snprintf(value, sizeof value, "%s",
                  std::string(to_string(r.failure_reason.value_or(FailureReason::simulated))).c_str());
  }
  std::snprintf(wall, sizeof wall, "%.6f", r.wall_time);
  return key + "\t" + std::string(to_string(property)) + "\t" + (r.success ? "1" : "0") + "\t" + value + "\t" +
         wall + "\n";
}

template <class Fn>
std::size_t scan_file(const std::filesystem::path& path, Fn&& on_record) {
  std::error_code ec;
  if (std::filesystem::is_directory(path, ec)) throw StoreError("cache path is a directory: " + path.string());
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    if (!std::filesystem::exists(path, ec)) return 0;
    throw StoreError("cannot read cache store " + path.string());
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw StoreError("error reading cache store " + path.string());
  const std::string text = buf.str();
  std::size_t skipped = 0, pos = 0;
  while (pos < text.size()) {
    const auto nl = text.find('\n', pos);
    if (nl == std::string::npos) {
      ++skipped;  // partial trailing write
      break;
    }
    const std::string_view line(text.data() + pos, nl - pos);
    pos = nl + 1;
    if (line.empty()) continue;
    if (auto rec = parse_record(line)) {
      on_record(std::move(*rec));
    } else {
      ++skipped;
    }
  }
  return skipped;
}

}  // namespace

PropertyCacheKey PropertyCacheKey::make(const Structure& s, const Composition& c, const PropertyCalculator& calc) {
  return {s.content_hash(), composition_string(c), calc.property(), std::string(calc.id()), calc.version()};
}

std::string PropertyCacheKey::hash() const {
  std::ostringstream os;
  os << std::hex << structure_hash << '|' << composition << '|' << to_string(property) << '|' << calculator_id << '|'
     << std::dec << calculator_version;
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(os.str())));
  return buf;
}

ResultCache::ResultCache(std::filesystem::path path) : path_(std::move(path)) {
  if (!path_.empty()) load();
}

void ResultCache::load() {
  skipped_ = scan_file(path_, [this](Record r) {
    properties_[r.key] = r.property;
    results_[r.key] = r.result;
  });
  if (!path_.parent_path().empty()) {
    std::error_code ec;
    std::filesystem::create_directories(path_.parent_path(), ec);
  }
  std::ofstream touch(path_, std::ios::binary | std::ios::app);
  if (!touch) throw StoreError("cannot open cache store for appending: " + path_.string());
  touch.close();
  // A torn final record would otherwise swallow the next appended one.
  std::ifstream tail(path_, std::ios::binary | std::ios::ate);
  if (tail && tail.tellg() > 0) {
    tail.seekg(-1, std::ios::end);
    needs_newline_ = tail.get() != '\n';
  }
}

std::optional<CalculatorResult> ResultCache::lookup(const std::string& key_hash) const {
  std::shared_lock lock(mutex_);
  const auto it = results_.find(key_hash);
  if (it == results_.end()) return std::nullopt;
  return it->second;
}

void ResultCache::store(const std::string& key_hash, Property property, const CalculatorResult& result) {
  {
    std::unique_lock lock(mutex_);
    if (results_.count(key_hash)) return;
    results_[key_hash] = result;
    properties_[key_hash] = property;
  }
  if (path_.empty()) return;
  std::string line = format_record(key_hash, property, result);
  std::lock_guard lock(write_mutex_);
  if (needs_newline_) {
    line.insert(line.begin(), '\n');
    needs_newline_ = false;
  }
  std::FILE* f = std::fopen(path_.c_str(), "ab");
  if (!f) throw StoreError("cannot append to cache store " + path_.string());
  const bool ok = std::fwrite(line.data(), 1, line.size(), f) == line.size();
  const bool closed = std::fclose(f) == 0;
  if (!ok || !closed) throw StoreError("failed to append to cache store " + path_.string());
}

CalculatorResult ResultCache::cached(const PropertyCalculator& calculator, const PropertyCacheKey& key,
                                     const Structure& structure, const Composition& composition) {
  const std::string h = key.hash();
  if (auto hit = lookup(h)) return *hit;

  std::promise<CalculatorResult> promise;
  std::shared_future<CalculatorResult> pending;
  bool owner = false;
  {
    std::lock_guard lock(inflight_mutex_);
    if (auto hit = lookup(h)) return *hit;
    auto it = inflight_.find(h);
    if (it == inflight_.end()) {
      pending = promise.get_future().share();
      inflight_.emplace(h, pending);
      owner = true;
    } else {
      pending = it->second;
    }
  }
  if (!owner) return pending.get();

  try {
    const CalculatorResult result = calculator.compute(structure, composition);
    store(h, key.property, result);
    promise.set_value(result);
  } catch (...) {
    promise.set_exception(std::current_exception());
    std::lock_guard lock(inflight_mutex_);
    inflight_.erase(h);
    throw;
  }
  std::lock_guard lock(inflight_mutex_);
  inflight_.erase(h);
  return pending.get();
}

CacheStats ResultCache::stats() const {
  std::shared_lock lock(mutex_);
  CacheStats s;
  s.records = results_.size();
  s.skipped_lines = skipped_;
  for (const auto& [key, r] : results_) {
    (r.success ? s.successes : s.failures)++;
    s.per_property[std::string(to_string(properties_.at(key)))]++;
  }
  return s;
}

std::size_t ResultCache::size() const {
  std::shared_lock lock(mutex_);
  return results_.size();
}

CacheStats read_cache_stats(const std::filesystem::path& path) {
  std::unordered_map<std::string, Record> records;
  CacheStats s;
  s.skipped_lines = scan_file(path, [&](Record r) { records.emplace(r.key, std::move(r)); });
  s.records = records.size();
  for (const auto& [key, r] : records) {
    (r.result.success ? s.successes : s.failures)++;
    s.per_property[std::string(to_string(r.property))]++;
  }
  return s;
}

CachedCalculator::CachedCalculator(std::shared_ptr<const PropertyCalculator> inner, std::shared_ptr<ResultCache> cache)
    : inner_(std::move(inner)), cache_(std::move(cache)) {
  if (!inner_ || !cache_) throw ConfigError("cached calculator needs a calculator and a cache");
}

CalculatorResult CachedCalculator::compute(const Structure& structure, const Composition& composition) const {
  require_filled(structure, composition);
  return cache_->cached(*inner_, PropertyCacheKey::make(structure, composition, *inner_), structure, composition);
}

}  // namespace crystalgym
