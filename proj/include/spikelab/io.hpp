// Persistence: disorder tensor cache, CSV writers (17 significant digits),
// JSON reports, and the key=value config format used by the CLI.
//
// Tensor cache format (one file per (p, N, seed), little-endian):
//   magic "STLD" | version u32 | N u32 | p u32 | seed u64 | entry_count u64
// followed by entry_count float64 values, row-major.
#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>

#include "json.hpp"
#include "spikelab/conditions.hpp"
#include "spikelab/dynamics.hpp"
#include "spikelab/freeenergy.hpp"
#include "spikelab/landscape.hpp"

namespace spikelab {

// $SPIKELAB_CACHE_DIR, or empty (caching disabled).
std::string default_cache_dir();

std::string tensor_cache_filename(int p, int N, std::uint64_t seed);
void save_tensor_cache(const std::string& dir, const Tensor& t, std::uint64_t seed);
// false: no cache file.  Header mismatches against (p, N, seed) are errors.
bool try_load_tensor_cache(const std::string& dir, int p, int N, std::uint64_t seed, Tensor* out);

// sample_disorder, but loading any cached tensors from cache_dir and saving
// the ones it had to draw.  Empty cache_dir = plain sample_disorder.
Disorder sample_disorder_cached(const MixtureSpec& mix, int N, std::uint64_t seed,
                                std::uint64_t entry_budget, const std::string& cache_dir);

// --- CSV ---------------------------------------------------------------
// Columns t,m,energy,l0m,gradnorm; cells empty when a series was not
// recorded; float64 as %.17g.
void write_trajectory_csv(const std::string& path, const Trajectory& traj);
// Columns chain,tau,censored.
void write_exit_times_csv(const std::string& path, const ExitTimeResult& res);

// Low-level row writer shared by the table emitters.
class CsvWriter {
 public:
  explicit CsvWriter(const std::string& path);
  ~CsvWriter();
  CsvWriter(const CsvWriter&) = delete;
  CsvWriter& operator=(const CsvWriter&) = delete;
  void field(const std::string& s);
  void field(double v);        // %.17g
  void field(std::uint64_t v);
  void empty_field();
  void end_row();

 private:
  std::FILE* f_;
  bool row_started_ = false;
};

// --- JSON ----------------------------------------------------------------
nlohmann::json to_json(const ConditionReport& rep);
nlohmann::json to_json(const Condition2Curve& curve);
nlohmann::json to_json(const WellReport& rep);
nlohmann::json to_json(const ExitTimeResult& res);
void write_json(const std::string& path, const nlohmann::json& j);

// --- config ----------------------------------------------------------------
// key = value lines, '#' comments.  Every key must be consumed by a get_*
// call before finish(), so typos in files or --set overrides fail loudly.
class Config {
 public:
  Config() = default;
  static Config from_file(const std::string& path);
  void set_override(const std::string& key_equals_value);  // "key=value"

  bool has(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& def);
  double get_double(const std::string& key, double def);
  int get_int(const std::string& key, int def);
  std::uint64_t get_u64(const std::string& key, std::uint64_t def);
  bool get_bool(const std::string& key, bool def);
  // Comma-separated doubles, e.g. "16,32,64".
  std::vector<double> get_double_list(const std::string& key, const std::vector<double>& def);

  void finish() const;  // error on never-consumed keys

 private:
  std::string raw(const std::string& key, bool* found);
  std::map<std::string, std::string> kv_;
  std::set<std::string> consumed_;
};

}  // namespace spikelab
