#include "spikelab/io.hpp"

#include <atomic>
#include <bit>
#include <cerrno>
#include <climits>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <vector>

#include "spikelab/common.hpp"

// The cache format is raw little-endian float64; bail out at compile time on
// exotic hosts rather than byte-swapping.
static_assert(std::endian::native == std::endian::little,
              "tensor cache assumes a little-endian host");
static_assert(sizeof(double) == 8, "tensor cache assumes 8-byte IEEE double");

namespace spikelab {
namespace {

constexpr char kMagic[4] = {'S', 'T', 'L', 'D'};
constexpr std::uint32_t kCacheVersion = 1;

void write_u32(std::FILE* f, std::uint32_t v) {
  if (std::fwrite(&v, sizeof v, 1, f) != 1) fail("tensor cache: short write");
}
void write_u64(std::FILE* f, std::uint64_t v) {
  if (std::fwrite(&v, sizeof v, 1, f) != 1) fail("tensor cache: short write");
}
std::uint32_t read_u32(std::FILE* f, const std::string& path) {
  std::uint32_t v = 0;
  if (std::fread(&v, sizeof v, 1, f) != 1) fail("tensor cache: truncated header in " + path);
  return v;
}
std::uint64_t read_u64(std::FILE* f, const std::string& path) {
  std::uint64_t v = 0;
  if (std::fread(&v, sizeof v, 1, f) != 1) fail("tensor cache: truncated header in " + path);
  return v;
}

std::uint64_t entries_for(int p, int N) {
  std::uint64_t n = 1;
  for (int i = 0; i < p; ++i) n *= static_cast<std::uint64_t>(N);
  return n;
}

}  // namespace

std::string default_cache_dir() {
  const char* env = std::getenv("SPIKELAB_CACHE_DIR");
  return env ? std::string(env) : std::string();
}

std::string tensor_cache_filename(int p, int N, std::uint64_t seed) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "stld_p%d_n%d_seed%016llx.bin", p, N,
                static_cast<unsigned long long>(seed));
  return buf;
}

void save_tensor_cache(const std::string& dir, const Tensor& t, std::uint64_t seed) {
  if (dir.empty()) fail("save_tensor_cache: empty cache dir");
  const std::string path = dir + "/" + tensor_cache_filename(t.p, t.N, seed);
  // Unique tmp per writer: concurrent workers may save the same tensor, and
  // rename() is atomic while a shared tmp name is not.
  static std::atomic<unsigned> tmp_counter{0};
  const std::string tmp = path + ".tmp" + std::to_string(tmp_counter.fetch_add(1));
  std::FILE* f = std::fopen(tmp.c_str(), "wb");
  if (!f) fail("tensor cache: cannot open " + tmp + " for writing: " + std::strerror(errno));
  if (std::fwrite(kMagic, 1, 4, f) != 4) fail("tensor cache: short write");
  write_u32(f, kCacheVersion);
  write_u32(f, static_cast<std::uint32_t>(t.N));
  write_u32(f, static_cast<std::uint32_t>(t.p));
  write_u64(f, seed);
  write_u64(f, static_cast<std::uint64_t>(t.w.size()));
  if (std::fwrite(t.w.data(), sizeof(double), t.w.size(), f) != t.w.size())
    fail("tensor cache: short write of payload to " + tmp);
  if (std::fclose(f) != 0) fail("tensor cache: close failed for " + tmp);
  // Atomic publish so a concurrent reader never sees a half-written file.
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    fail("tensor cache: rename to " + path + " failed: " + std::strerror(errno));
}

bool try_load_tensor_cache(const std::string& dir, int p, int N, std::uint64_t seed,
                           Tensor* out) {
  if (dir.empty()) return false;
  const std::string path = dir + "/" + tensor_cache_filename(p, N, seed);
  std::FILE* f = std::fopen(path.c_str(), "rb");
  if (!f) return false;  // cache miss
  char magic[4];
  if (std::fread(magic, 1, 4, f) != 4 || std::memcmp(magic, kMagic, 4) != 0)
    fail("tensor cache: bad magic in " + path);
  const std::uint32_t version = read_u32(f, path);
  if (version != kCacheVersion)
    fail("tensor cache: unsupported version " + std::to_string(version) + " in " + path);
  const std::uint32_t file_n = read_u32(f, path);
  const std::uint32_t file_p = read_u32(f, path);
  const std::uint64_t file_seed = read_u64(f, path);
  const std::uint64_t count = read_u64(f, path);
  if (file_n != static_cast<std::uint32_t>(N) || file_p != static_cast<std::uint32_t>(p) ||
      file_seed != seed)
    fail("tensor cache: header of " + path + " does not match requested (p, N, seed)");
  if (count != entries_for(p, N))
    fail("tensor cache: entry count mismatch in " + path);
  out->p = p;
  out->N = N;
  out->w.assign(count, 0.0);
  if (std::fread(out->w.data(), sizeof(double), count, f) != count)
    fail("tensor cache: truncated payload in " + path);
  std::fclose(f);
  return true;
}

Disorder sample_disorder_cached(const MixtureSpec& mix, int N, std::uint64_t seed,
                                std::uint64_t entry_budget, const std::string& cache_dir) {
  if (cache_dir.empty()) return sample_disorder(mix, N, seed, entry_budget);
  std::uint64_t total = 0;
  for (const auto& tm : mix.terms) {
    const std::uint64_t n = entries_for(tm.p, N);
    total += n;
    if (total > entry_budget)
      fail("disorder: order p = " + std::to_string(tm.p) + " pushes the entry count to " +
           std::to_string(total) + ", over the budget of " + std::to_string(entry_budget) +
           " (raise it explicitly to proceed)");
  }
  Disorder d;
  d.N = N;
  d.seed = seed;
  d.fingerprint = mixture_fingerprint(mix, N);
  d.tensors.reserve(mix.terms.size());
  for (const auto& tm : mix.terms) {
    Tensor t;
    if (!try_load_tensor_cache(cache_dir, tm.p, N, seed, &t)) {
      t = sample_tensor(tm.p, N, seed);
      save_tensor_cache(cache_dir, t, seed);
    }
    d.tensors.push_back(std::move(t));
  }
  return d;
}

// --- CSV ---------------------------------------------------------------

CsvWriter::CsvWriter(const std::string& path) {
  f_ = std::fopen(path.c_str(), "w");
  if (!f_) fail("csv: cannot open " + path + " for writing: " + std::strerror(errno));
}

CsvWriter::~CsvWriter() {
  if (f_) std::fclose(f_);
}

void CsvWriter::field(const std::string& s) {
  if (row_started_) std::fputc(',', f_);
  std::fputs(s.c_str(), f_);
  row_started_ = true;
}

void CsvWriter::field(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  field(std::string(buf));
}

void CsvWriter::field(std::uint64_t v) {
  field(std::to_string(v));
}

void CsvWriter::empty_field() {
  if (row_started_) std::fputc(',', f_);
  row_started_ = true;
}

void CsvWriter::end_row() {
  std::fputc('\n', f_);
  row_started_ = false;
}

void write_trajectory_csv(const std::string& path, const Trajectory& traj) {
  CsvWriter w(path);
  w.field(std::string("t"));
  w.field(std::string("m"));
  w.field(std::string("energy"));
  w.field(std::string("l0m"));
  w.field(std::string("gradnorm"));
  w.end_row();
  const std::size_t n = traj.t.size();
  const bool has_energy = traj.energy.size() == n;
  const bool has_l0m = traj.l0m.size() == n;
  const bool has_gradnorm = traj.gradnorm.size() == n;
  for (std::size_t i = 0; i < n; ++i) {
    w.field(traj.t[i]);
    w.field(traj.m[i]);
    if (has_energy) w.field(traj.energy[i]); else w.empty_field();
    if (has_l0m) w.field(traj.l0m[i]); else w.empty_field();
    if (has_gradnorm) w.field(traj.gradnorm[i]); else w.empty_field();
    w.end_row();
  }
}

void write_exit_times_csv(const std::string& path, const ExitTimeResult& res) {
  CsvWriter w(path);
  w.field(std::string("chain"));
  w.field(std::string("tau"));
  w.field(std::string("censored"));
  w.end_row();
  for (std::size_t i = 0; i < res.tau.size(); ++i) {
    w.field(static_cast<std::uint64_t>(i));
    w.field(res.tau[i]);
    w.field(static_cast<std::uint64_t>(res.censored[i]));
    w.end_row();
  }
}

// --- JSON ----------------------------------------------------------------

nlohmann::json to_json(const ConditionReport& rep) {
  return nlohmann::json{{"level", rep.level},
                        {"T", rep.T},
                        {"delta", rep.delta},
                        {"threshold", rep.threshold},
                        {"per_sample", rep.per_sample},
                        {"fraction_violating", rep.fraction_violating},
                        {"mc_std_error", rep.mc_std_error}};
}

nlohmann::json to_json(const Condition2Curve& curve) {
  return nlohmann::json{{"epsilon", curve.epsilon}, {"fraction", curve.fraction}};
}

nlohmann::json to_json(const WellReport& rep) {
  nlohmann::json j{{"grid", rep.grid},
                   {"eps", rep.eps},
                   {"I", rep.I},
                   {"I_err", rep.I_err},
                   {"sphere_f", rep.sphere_f},
                   {"sphere_f_err", rep.sphere_f_err},
                   {"warnings", rep.warnings}};
  if (rep.well) {
    j["well"] = nlohmann::json{{"a", rep.well->a},
                               {"c", rep.well->c},
                               {"b", rep.well->b},
                               {"height", rep.well->height}};
  } else {
    j["well"] = nullptr;
  }
  return j;
}

nlohmann::json to_json(const ExitTimeResult& res) {
  std::vector<int> cens(res.censored.begin(), res.censored.end());
  return nlohmann::json{{"tau", res.tau},
                        {"censored", cens},
                        {"n_censored", res.n_censored},
                        {"median", res.median},
                        {"exit_m_threshold", res.exit_m_threshold},
                        {"warnings", res.warnings}};
}

void write_json(const std::string& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) fail("json: cannot open " + path + " for writing");
  out << j.dump(2) << '\n';
  if (!out) fail("json: write to " + path + " failed");
}

// --- config ----------------------------------------------------------------

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

// Splits "key = value"; line_no only for error messages (0 = --set override).
std::pair<std::string, std::string> split_kv(const std::string& line, int line_no) {
  const std::size_t eq = line.find('=');
  const std::string where =
      line_no > 0 ? "config line " + std::to_string(line_no) : "--set override";
  if (eq == std::string::npos) fail(where + ": expected key=value, got \"" + line + "\"");
  std::string key = trim(line.substr(0, eq));
  std::string val = trim(line.substr(eq + 1));
  if (key.empty()) fail(where + ": empty key in \"" + line + "\"");
  return {key, val};
}

}  // namespace

Config Config::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("config: cannot open " + path);
  Config cfg;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    auto [key, val] = split_kv(line, line_no);
    if (cfg.kv_.count(key))
      fail("config line " + std::to_string(line_no) + ": duplicate key \"" + key + "\"");
    cfg.kv_[key] = val;
  }
  return cfg;
}

void Config::set_override(const std::string& key_equals_value) {
  auto [key, val] = split_kv(key_equals_value, 0);
  kv_[key] = val;  // overrides are allowed to replace file values
}

bool Config::has(const std::string& key) const { return kv_.count(key) != 0; }

std::string Config::raw(const std::string& key, bool* found) {
  auto it = kv_.find(key);
  if (it == kv_.end()) {
    *found = false;
    return {};
  }
  consumed_.insert(key);
  *found = true;
  return it->second;
}

std::string Config::get_string(const std::string& key, const std::string& def) {
  bool found;
  std::string v = raw(key, &found);
  return found ? v : def;
}

double Config::get_double(const std::string& key, double def) {
  bool found;
  std::string v = raw(key, &found);
  if (!found) return def;
  const char* s = v.c_str();
  char* end = nullptr;
  double x = std::strtod(s, &end);
  if (end == s || *end != '\0') fail("config: key \"" + key + "\": bad number \"" + v + "\"");
  return x;
}

int Config::get_int(const std::string& key, int def) {
  bool found;
  std::string v = raw(key, &found);
  if (!found) return def;
  const char* s = v.c_str();
  char* end = nullptr;
  long x = std::strtol(s, &end, 10);
  if (end == s || *end != '\0' || x < INT_MIN || x > INT_MAX)
    fail("config: key \"" + key + "\": bad integer \"" + v + "\"");
  return static_cast<int>(x);
}

std::uint64_t Config::get_u64(const std::string& key, std::uint64_t def) {
  bool found;
  std::string v = raw(key, &found);
  if (!found) return def;
  const char* s = v.c_str();
  char* end = nullptr;
  errno = 0;
  unsigned long long x = std::strtoull(s, &end, 0);  // base 0: decimal or 0x hex
  if (end == s || *end != '\0' || errno == ERANGE || v[0] == '-')
    fail("config: key \"" + key + "\": bad unsigned integer \"" + v + "\"");
  return x;
}

bool Config::get_bool(const std::string& key, bool def) {
  bool found;
  std::string v = raw(key, &found);
  if (!found) return def;
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  fail("config: key \"" + key + "\": bad bool \"" + v + "\" (want true/false)");
}

std::vector<double> Config::get_double_list(const std::string& key,
                                            const std::vector<double>& def) {
  bool found;
  std::string v = raw(key, &found);
  if (!found) return def;
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos <= v.size()) {
    std::size_t comma = v.find(',', pos);
    if (comma == std::string::npos) comma = v.size();
    std::string item = trim(v.substr(pos, comma - pos));
    if (item.empty()) fail("config: key \"" + key + "\": empty item in list \"" + v + "\"");
    const char* s = item.c_str();
    char* end = nullptr;
    double x = std::strtod(s, &end);
    if (end == s || *end != '\0')
      fail("config: key \"" + key + "\": bad number \"" + item + "\" in list");
    out.push_back(x);
    pos = comma + 1;
  }
  return out;
}

void Config::finish() const {
  std::string unknown;
  for (const auto& [key, val] : kv_) {
    if (!consumed_.count(key)) {
      if (!unknown.empty()) unknown += ", ";
      unknown += key;
    }
  }
  if (!unknown.empty()) fail("config: unknown key(s): " + unknown);
}

}  // namespace spikelab
