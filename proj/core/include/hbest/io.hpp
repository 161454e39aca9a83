#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "hbest/evaluate.hpp"
#include "hbest/sampler.hpp"
#include "hbest/simulate.hpp"
#include "hbest/types.hpp"

namespace hbest::io {

inline constexpr const char* kArtifactVersion = "0.1.0";
inline constexpr int kSchemaVersion = 1;

// 17 significant digits: doubles round-trip exactly through this.
std::string fmt17(double v);

std::string read_text(const std::filesystem::path& path);
// Writes via a temporary file in the same directory plus rename, creating
// parent directories as needed.
void atomic_write_text(const std::filesystem::path& path, const std::string& content);
std::string sha256_file(const std::filesystem::path& path);

// Series files: header "t,value", one row per observation, t = 1..n.
// The replicate label is the file stem.
void write_series_csv(const std::filesystem::path& path, const TimeSeries& series);
TimeSeries read_series_csv(const std::filesystem::path& path);

// Fit configuration (JSON, versioned, unknown keys rejected).
struct FitConfig {
  SamplerConfig sampler;
  bool standardize = false;
  std::string chain_format = "csv";  // csv | binary
  int eval_grid_K = 1000;
  double trim_lo = 0.05, trim_hi = 0.95;

  EvalGrid grid() const { return {eval_grid_K, trim_lo, trim_hi}; }
};
FitConfig default_fit_config();
FitConfig parse_fit_config(const std::string& json_text);
std::string fit_config_json(const FitConfig& config);  // full snapshot

// Simulation setting (JSON, versioned, unknown keys rejected). `standardize`
// is optional in the file; when absent the family default applies.
struct SimulateSetting {
  std::string family;  // ma4 | ar2_mixture | hierarchical
  int S = 1;           // number of datasets
  int eval_grid_K = 1000;
  Ma4Setting ma4;
  Ar2MixSetting ar2;
  HierSetting hier;

  std::uint64_t seed() const;
  void set_seed(std::uint64_t s);
  void set_standardize(bool s);
};
SimulateSetting parse_simulate_setting(const std::string& json_text);
std::string simulate_setting_json(const SimulateSetting& setting);

// Run manifest: the reproducibility record every output directory carries.
struct Manifest {
  std::string command;  // simulate | fit | evaluate
  std::string artifact_version = kArtifactVersion;
  std::uint64_t seed = 0;
  std::string config_json;  // effective config/setting snapshot
  std::vector<std::pair<std::string, std::string>> inputs;  // (path, sha256)
  std::string mode;
  std::string chain_format;
  std::vector<std::string> labels;
  double seconds_total = 0.0, seconds_post_burnin = 0.0;
  double accept_global = -1.0;
  std::vector<double> accept_local;
};
void write_manifest(const std::filesystem::path& path, const Manifest& manifest);
Manifest read_manifest(const std::filesystem::path& path);

// Chain storage. CSV layout (one file per parameter block):
//   chain_global.csv        iter,loglik,tau,b0..bB     (hierarchical, common)
//   chain_local_<label>.csv iter,zeta,b0..bB           (hierarchical)
//   chain_<label>.csv       iter,loglik,tau,b0..bB     (independent)
// The binary option packs the same numbers into chain.bin (native doubles).
void write_chain_files(const std::filesystem::path& dir, const Chain& chain,
                       const std::string& format);
Chain read_chain_files(const std::filesystem::path& dir);

// Tabulated truth: CSV "series,omega,g_true", series-major.
struct TruthTable {
  Vec omegas;
  std::vector<std::string> labels;
  std::vector<Vec> g_true;
};
void write_truth_csv(const std::filesystem::path& path, const TruthTable& table);
TruthTable read_truth_csv(const std::filesystem::path& path);

// Recovers the evaluation grid from tabulated omegas; validates the
// pi*k/(K-1) layout.
EvalGrid grid_from_omegas(const Vec& omegas, double trim_lo = 0.05, double trim_hi = 0.95);

// Plot-ready long format: frequency,estimate,lower,upper,series,kind with
// kind in {global, individual, local}.
void write_summary_csv(const std::filesystem::path& path, const SpectrumSummary& summary);
void write_summary_json(const std::filesystem::path& path, const SpectrumSummary& summary);

// Group spec CSV "label,group"; a replicate may appear at most once.
std::map<std::string, std::string> read_group_spec(const std::filesystem::path& path);

}  // namespace hbest::io
