#include "hbest/io.hpp"

#include <openssl/evp.h>

#include <json.hpp>

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include "hbest/errors.hpp"

namespace hbest::io {

namespace fs = std::filesystem;
using nlohmann::json;

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot open '" + path.string() + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void atomic_write_text(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InvalidInput("cannot write '" + tmp.string() + "'");
    out << content;
    if (!out.good()) throw InvalidInput("short write to '" + tmp.string() + "'");
  }
  fs::rename(tmp, path);
}

std::string sha256_file(const fs::path& path) {
  const std::string bytes = read_text(path);
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr))
    throw std::runtime_error("sha256 failed for '" + path.string() + "'");
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xF]);
  }
  return out;
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

double parse_double(const std::string& s, const fs::path& path, std::size_t line_no) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0')
    throw InvalidInput("'" + path.string() + "' line " + std::to_string(line_no) +
                       ": not a number: '" + s + "'");
  return v;
}

std::vector<std::string> read_lines(const fs::path& path) {
  std::istringstream in(read_text(path));
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

void require_header(const std::vector<std::string>& lines, const std::string& header,
                    const fs::path& path) {
  if (lines.empty())
    throw InvalidInput("'" + path.string() + "': empty file");
  std::string first = lines[0];
  if (!first.empty() && first.back() == '\r') first.pop_back();
  if (first != header)
    throw InvalidInput("'" + path.string() + "': expected header '" + header + "', got '" +
                       first + "'");
}

void check_label(const std::string& label) {
  if (label.empty()) throw InvalidInput("replicate label must not be empty");
  for (char c : label)
    if (c == ',' || c == '\n' || c == '\r' || c == '/')
      throw InvalidInput("replicate label '" + label + "' contains a forbidden character");
}

// Strict JSON object wrapper: every key must be consumed, everything else is
// reported as an error (silent typos in hyperparameters corrupt experiments).
class StrictObject {
 public:
  StrictObject(const json& j, std::string context) : j_(j), context_(std::move(context)) {
    if (!j_.is_object())
      throw InvalidInput(context_ + ": expected a JSON object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  template <typename T>
  T require(const std::string& key) {
    if (!j_.contains(key))
      throw InvalidInput(context_ + ": missing required key '" + key + "'");
    return get<T>(key);
  }

  template <typename T>
  T value_or(const std::string& key, T fallback) {
    if (!j_.contains(key)) return fallback;
    return get<T>(key);
  }

  json raw(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }

  void finish() const {
    std::string unknown;
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) unknown += (unknown.empty() ? "" : ", ") + it.key();
    if (!unknown.empty())
      throw InvalidInput(context_ + ": unknown key(s): " + unknown);
  }

 private:
  template <typename T>
  T get(const std::string& key) {
    seen_.insert(key);
    try {
      return j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw InvalidInput(context_ + ": key '" + key + "': " + e.what());
    }
  }

  const json& j_;
  std::string context_;
  std::set<std::string> seen_;
};

json parse_json_text(const std::string& text, const std::string& context) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    // Translate the byte offset into line/column for the diagnostic.
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw InvalidInput(context + ": parse error at line " + std::to_string(line) +
                       ", column " + std::to_string(col) + ": " + e.what());
  }
}

void check_schema_version(StrictObject& obj, const std::string& context) {
  const int v = obj.require<int>("schema_version");
  if (v != kSchemaVersion)
    throw InvalidInput(context + ": unsupported schema_version " + std::to_string(v));
}

}  // namespace

void write_series_csv(const fs::path& path, const TimeSeries& series) {
  check_label(series.label);
  std::string out = "t,value\n";
  for (int t = 0; t < series.n(); ++t)
    out += std::to_string(t + 1) + "," + fmt17(series.values[t]) + "\n";
  atomic_write_text(path, out);
}

TimeSeries read_series_csv(const fs::path& path) {
  const auto lines = read_lines(path);
  require_header(lines, "t,value", path);
  TimeSeries ts;
  ts.label = path.stem().string();
  std::vector<double> values;
  values.reserve(lines.size());
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto fields = split_csv(lines[i]);
    if (fields.size() != 2)
      throw InvalidInput("'" + path.string() + "' line " + std::to_string(i + 1) +
                         ": expected 2 fields, got " + std::to_string(fields.size()));
    values.push_back(parse_double(fields[1], path, i + 1));
  }
  ts.values = Eigen::Map<const Vec>(values.data(), values.size());
  return ts;
}

FitConfig default_fit_config() { return {}; }

FitConfig parse_fit_config(const std::string& text) {
  const json j = parse_json_text(text, "fit config");
  StrictObject obj(j, "fit config");
  check_schema_version(obj, "fit config");

  FitConfig cfg;
  SamplerConfig& sc = cfg.sampler;
  Hyperparameters& hp = sc.hp;
  sc.iterations = obj.value_or<long>("iterations", sc.iterations);
  sc.burn_in = obj.value_or<long>("burn_in", sc.burn_in);
  sc.seed = obj.value_or<std::uint64_t>("seed", sc.seed);
  sc.threads = obj.value_or<int>("threads", sc.threads);
  sc.mode = model_mode_from_string(obj.value_or<std::string>("mode", to_string(sc.mode)));
  sc.paper_literal_ratio = obj.value_or<bool>("paper_literal_ratio", sc.paper_literal_ratio);
  sc.check_consistency = obj.value_or<bool>("check_consistency", sc.check_consistency);
  sc.init_tau = obj.value_or<double>("init_tau", sc.init_tau);
  sc.init_map = obj.value_or<bool>("init_map", sc.init_map);
  if (obj.has("init_zeta")) sc.init_zeta = obj.raw("init_zeta").get<double>();
  hp.B = obj.value_or<int>("B", hp.B);
  hp.nu_tau = obj.value_or<double>("nu_tau", hp.nu_tau);
  hp.nu_zeta = obj.value_or<double>("nu_zeta", hp.nu_zeta);
  hp.sigma2_alpha = obj.value_or<double>("sigma2_alpha", hp.sigma2_alpha);
  hp.delta2 = obj.value_or<double>("delta2", hp.delta2);
  hp.tau_min = obj.value_or<double>("tau_min", hp.tau_min);
  hp.tau_max = obj.value_or<double>("tau_max", hp.tau_max);
  hp.zeta_min = obj.value_or<double>("zeta_min", hp.zeta_min);
  hp.zeta_max = obj.value_or<double>("zeta_max", hp.zeta_max);
  hp.K_tau = obj.value_or<int>("K_tau", hp.K_tau);
  hp.K_zeta = obj.value_or<int>("K_zeta", hp.K_zeta);
  hp.eta = obj.value_or<double>("eta", hp.eta);
  cfg.standardize = obj.value_or<bool>("standardize", cfg.standardize);
  cfg.chain_format = obj.value_or<std::string>("chain_format", cfg.chain_format);
  cfg.eval_grid_K = obj.value_or<int>("eval_grid_K", cfg.eval_grid_K);
  if (obj.has("trim")) {
    const auto trim = obj.raw("trim").get<std::vector<double>>();
    if (trim.size() != 2) throw InvalidInput("fit config: 'trim' must be [lo, hi]");
    cfg.trim_lo = trim[0];
    cfg.trim_hi = trim[1];
  }
  obj.finish();

  if (cfg.chain_format != "csv" && cfg.chain_format != "binary")
    throw InvalidInput("fit config: chain_format must be 'csv' or 'binary'");
  cfg.sampler.validate();
  cfg.grid().validate();
  return cfg;
}

std::string fit_config_json(const FitConfig& cfg) {
  const SamplerConfig& sc = cfg.sampler;
  const Hyperparameters& hp = sc.hp;
  json j;
  j["schema_version"] = kSchemaVersion;
  j["iterations"] = sc.iterations;
  j["burn_in"] = sc.burn_in;
  j["seed"] = sc.seed;
  j["threads"] = sc.threads;
  j["mode"] = to_string(sc.mode);
  j["paper_literal_ratio"] = sc.paper_literal_ratio;
  j["check_consistency"] = sc.check_consistency;
  j["init_tau"] = sc.init_tau;
  j["init_map"] = sc.init_map;
  if (sc.init_zeta) j["init_zeta"] = *sc.init_zeta;
  j["B"] = hp.B;
  j["nu_tau"] = hp.nu_tau;
  j["nu_zeta"] = hp.nu_zeta;
  j["sigma2_alpha"] = hp.sigma2_alpha;
  j["delta2"] = hp.delta2;
  j["tau_min"] = hp.tau_min;
  j["tau_max"] = hp.tau_max;
  j["zeta_min"] = hp.zeta_min;
  j["zeta_max"] = hp.zeta_max;
  j["K_tau"] = hp.K_tau;
  j["K_zeta"] = hp.K_zeta;
  j["eta"] = hp.eta;
  j["standardize"] = cfg.standardize;
  j["chain_format"] = cfg.chain_format;
  j["eval_grid_K"] = cfg.eval_grid_K;
  j["trim"] = {cfg.trim_lo, cfg.trim_hi};
  return j.dump(2) + "\n";
}

std::uint64_t SimulateSetting::seed() const {
  if (family == "ma4") return ma4.seed;
  if (family == "ar2_mixture") return ar2.seed;
  return hier.seed;
}

void SimulateSetting::set_seed(std::uint64_t s) {
  ma4.seed = s;
  ar2.seed = s;
  hier.seed = s;
}

void SimulateSetting::set_standardize(bool s) {
  ma4.standardize = s;
  ar2.standardize = s;
  hier.standardize = s;
}

namespace {

Ma4Variation variation_from_string(const std::string& s) {
  if (s == "none") return Ma4Variation::None;
  if (s == "moderate") return Ma4Variation::Moderate;
  if (s == "high") return Ma4Variation::High;
  throw InvalidInput("simulate setting: unknown variation '" + s +
                     "' (expected none|moderate|high)");
}

std::string variation_to_string(Ma4Variation v) {
  switch (v) {
    case Ma4Variation::None: return "none";
    case Ma4Variation::Moderate: return "moderate";
    case Ma4Variation::High: return "high";
  }
  return "none";
}

}  // namespace

SimulateSetting parse_simulate_setting(const std::string& text) {
  const json j = parse_json_text(text, "simulate setting");
  StrictObject obj(j, "simulate setting");
  check_schema_version(obj, "simulate setting");

  SimulateSetting s;
  s.family = obj.require<std::string>("family");
  s.S = obj.value_or<int>("S", 1);
  s.eval_grid_K = obj.value_or<int>("eval_grid_K", 1000);
  if (s.S < 1) throw InvalidInput("simulate setting: S must be >= 1");
  const auto seed = obj.value_or<std::uint64_t>("seed", 0);
  const int L = obj.value_or<int>("L", 15);

  if (s.family == "ma4") {
    s.ma4.L = L;
    s.ma4.n = obj.value_or<int>("n", 1000);
    s.ma4.variation = variation_from_string(obj.value_or<std::string>("variation", "none"));
    s.ma4.standardize = obj.value_or<bool>("standardize", s.ma4.standardize);
  } else if (s.family == "ar2_mixture") {
    s.ar2.L = L;
    s.ar2.n = obj.value_or<int>("n", 1000);
    s.ar2.standardize = obj.value_or<bool>("standardize", s.ar2.standardize);
  } else if (s.family == "hierarchical") {
    s.hier.L = L;
    s.hier.kappa = obj.value_or<double>("kappa", 0.1);
    s.hier.B = obj.value_or<int>("B", 15);
    s.hier.standardize = obj.value_or<bool>("standardize", s.hier.standardize);
    if (obj.has("length_mix")) {
      s.hier.length_mix.clear();
      for (const auto& e : obj.raw("length_mix")) {
        StrictObject entry(e, "simulate setting: length_mix entry");
        LengthMixEntry me;
        me.n = entry.require<int>("n");
        me.proportion = entry.require<double>("prop");
        entry.finish();
        s.hier.length_mix.push_back(me);
      }
    }
  } else {
    throw InvalidInput("simulate setting: unknown family '" + s.family +
                       "' (expected ma4|ar2_mixture|hierarchical)");
  }
  obj.finish();
  s.set_seed(seed);
  return s;
}

std::string simulate_setting_json(const SimulateSetting& s) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["family"] = s.family;
  j["S"] = s.S;
  j["eval_grid_K"] = s.eval_grid_K;
  j["seed"] = s.seed();
  if (s.family == "ma4") {
    j["L"] = s.ma4.L;
    j["n"] = s.ma4.n;
    j["variation"] = variation_to_string(s.ma4.variation);
    j["standardize"] = s.ma4.standardize;
  } else if (s.family == "ar2_mixture") {
    j["L"] = s.ar2.L;
    j["n"] = s.ar2.n;
    j["standardize"] = s.ar2.standardize;
  } else {
    j["L"] = s.hier.L;
    j["kappa"] = s.hier.kappa;
    j["B"] = s.hier.B;
    j["standardize"] = s.hier.standardize;
    json mix = json::array();
    for (const auto& e : s.hier.length_mix) mix.push_back({{"n", e.n}, {"prop", e.proportion}});
    j["length_mix"] = mix;
  }
  return j.dump(2) + "\n";
}

void write_manifest(const fs::path& path, const Manifest& m) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["command"] = m.command;
  j["artifact_version"] = m.artifact_version;
  j["seed"] = m.seed;
  j["config"] = m.config_json.empty() ? json::object() : parse_json_text(m.config_json, "manifest config");
  json inputs = json::array();
  for (const auto& [p, digest] : m.inputs) inputs.push_back({{"path", p}, {"sha256", digest}});
  j["inputs"] = inputs;
  if (!m.mode.empty()) j["mode"] = m.mode;
  if (!m.chain_format.empty()) j["chain_format"] = m.chain_format;
  j["labels"] = m.labels;
  j["timings"] = {{"seconds_total", m.seconds_total},
                  {"seconds_post_burnin", m.seconds_post_burnin}};
  json acc;
  if (m.accept_global >= 0.0) acc["global_rate"] = m.accept_global;
  acc["local_rates"] = m.accept_local;
  j["acceptance"] = acc;
  atomic_write_text(path, j.dump(2) + "\n");
}

Manifest read_manifest(const fs::path& path) {
  const json j = parse_json_text(read_text(path), "manifest '" + path.string() + "'");
  StrictObject obj(j, "manifest");
  check_schema_version(obj, "manifest");
  Manifest m;
  m.command = obj.require<std::string>("command");
  m.artifact_version = obj.require<std::string>("artifact_version");
  m.seed = obj.require<std::uint64_t>("seed");
  m.config_json = obj.raw("config").dump();
  for (const auto& e : obj.raw("inputs"))
    m.inputs.emplace_back(e.at("path").get<std::string>(), e.at("sha256").get<std::string>());
  m.mode = obj.value_or<std::string>("mode", "");
  m.chain_format = obj.value_or<std::string>("chain_format", "");
  m.labels = obj.value_or<std::vector<std::string>>("labels", {});
  const json t = obj.raw("timings");
  m.seconds_total = t.at("seconds_total").get<double>();
  m.seconds_post_burnin = t.at("seconds_post_burnin").get<double>();
  const json acc = obj.raw("acceptance");
  if (acc.contains("global_rate")) m.accept_global = acc.at("global_rate").get<double>();
  m.accept_local = acc.at("local_rates").get<std::vector<double>>();
  obj.finish();
  return m;
}

namespace {

std::string spline_header(const std::string& prefix, int B) {
  std::string h = prefix;
  for (int b = 0; b <= B; ++b) h += ",b" + std::to_string(b);
  return h;
}

std::string csv_global_block(const Chain& chain, const std::vector<ParameterState>& samples,
                             const std::vector<double>& loglik) {
  const long burn = chain.config.burn_in;
  std::string out = spline_header("iter,loglik,tau", chain.config.hp.B) + "\n";
  for (std::size_t i = 0; i < samples.size(); ++i) {
    out += std::to_string(burn + 1 + long(i)) + "," + fmt17(loglik[i]) + "," +
           fmt17(samples[i].tau);
    for (int b = 0; b < samples[i].beta_glob.size(); ++b)
      out += "," + fmt17(samples[i].beta_glob[b]);
    out += "\n";
  }
  return out;
}

std::vector<double> parse_row(const std::string& line, std::size_t expected,
                              const fs::path& path, std::size_t line_no) {
  const auto fields = split_csv(line);
  if (fields.size() != expected)
    throw InvalidInput("'" + path.string() + "' line " + std::to_string(line_no) +
                       ": expected " + std::to_string(expected) + " fields");
  std::vector<double> vals(fields.size());
  for (std::size_t f = 0; f < fields.size(); ++f)
    vals[f] = parse_double(fields[f], path, line_no);
  return vals;
}

void append_doubles(std::string& buf, const double* vals, std::size_t count) {
  buf.append(reinterpret_cast<const char*>(vals), count * sizeof(double));
}

}  // namespace

void write_chain_files(const fs::path& dir, const Chain& chain, const std::string& format) {
  fs::create_directories(dir);
  const int B = chain.config.hp.B;
  const bool independent = chain.config.mode == ModelMode::Independent;
  const bool hierarchical = chain.config.mode == ModelMode::Hierarchical;

  if (format == "csv") {
    if (independent) {
      for (std::size_t ell = 0; ell < chain.replicate_samples.size(); ++ell) {
        atomic_write_text(dir / ("chain_" + chain.labels[ell] + ".csv"),
                          csv_global_block(chain, chain.replicate_samples[ell],
                                           chain.replicate_loglik[ell]));
      }
      return;
    }
    atomic_write_text(dir / "chain_global.csv",
                      csv_global_block(chain, chain.samples, chain.loglik));
    if (hierarchical) {
      for (std::size_t ell = 0; ell < chain.labels.size(); ++ell) {
        std::string out = spline_header("iter,zeta", B) + "\n";
        for (std::size_t i = 0; i < chain.samples.size(); ++i) {
          const auto& st = chain.samples[i];
          out += std::to_string(chain.config.burn_in + 1 + long(i)) + "," +
                 fmt17(st.zeta[ell]);
          for (int b = 0; b <= B; ++b) out += "," + fmt17(st.beta_loc[ell][b]);
          out += "\n";
        }
        atomic_write_text(dir / ("chain_local_" + chain.labels[ell] + ".csv"), out);
      }
    }
    return;
  }

  if (format != "binary")
    throw InvalidInput("chain format must be 'csv' or 'binary', got '" + format + "'");

  std::string buf = "HBCHAIN1";
  const auto push_u64 = [&buf](std::uint64_t v) {
    buf.append(reinterpret_cast<const char*>(&v), sizeof(v));
  };
  push_u64(independent ? 2 : (hierarchical ? 0 : 1));
  push_u64(chain.labels.size());
  push_u64(B + 1);
  push_u64(chain.stored());
  if (independent) {
    for (std::size_t ell = 0; ell < chain.replicate_samples.size(); ++ell) {
      for (std::size_t i = 0; i < chain.replicate_samples[ell].size(); ++i) {
        const auto& st = chain.replicate_samples[ell][i];
        const double head[2] = {chain.replicate_loglik[ell][i], st.tau};
        append_doubles(buf, head, 2);
        append_doubles(buf, st.beta_glob.data(), B + 1);
      }
    }
  } else {
    for (std::size_t i = 0; i < chain.samples.size(); ++i) {
      const auto& st = chain.samples[i];
      const double head[2] = {chain.loglik[i], st.tau};
      append_doubles(buf, head, 2);
      append_doubles(buf, st.beta_glob.data(), B + 1);
      if (hierarchical) {
        for (std::size_t ell = 0; ell < chain.labels.size(); ++ell) {
          append_doubles(buf, &st.zeta[ell], 1);
          append_doubles(buf, st.beta_loc[ell].data(), B + 1);
        }
      }
    }
  }
  atomic_write_text(dir / "chain.bin", buf);
}

Chain read_chain_files(const fs::path& dir) {
  const Manifest m = read_manifest(dir / "manifest.json");
  const FitConfig cfg = parse_fit_config(m.config_json);
  Chain chain;
  chain.config = cfg.sampler;
  chain.labels = m.labels;
  const int B = cfg.sampler.hp.B;
  const int p = B + 1;
  const bool independent = cfg.sampler.mode == ModelMode::Independent;
  const bool hierarchical = cfg.sampler.mode == ModelMode::Hierarchical;
  const int L = static_cast<int>(m.labels.size());

  if (m.chain_format == "binary") {
    const std::string buf = read_text(dir / "chain.bin");
    std::size_t pos = 0;
    const auto take_u64 = [&]() {
      std::uint64_t v;
      if (pos + sizeof(v) > buf.size()) throw InvalidInput("chain.bin: truncated");
      std::memcpy(&v, buf.data() + pos, sizeof(v));
      pos += sizeof(v);
      return v;
    };
    if (buf.substr(0, 8) != "HBCHAIN1") throw InvalidInput("chain.bin: bad magic");
    pos = 8;
    take_u64();  // mode (redundant with manifest)
    const std::uint64_t n_labels = take_u64();
    const std::uint64_t p_file = take_u64();
    const std::uint64_t count = take_u64();
    if (n_labels != std::uint64_t(L) || p_file != std::uint64_t(p))
      throw InvalidInput("chain.bin: dimensions disagree with manifest");
    const auto take_doubles = [&](double* dst, std::size_t k) {
      if (pos + k * sizeof(double) > buf.size()) throw InvalidInput("chain.bin: truncated");
      std::memcpy(dst, buf.data() + pos, k * sizeof(double));
      pos += k * sizeof(double);
    };
    if (independent) {
      chain.replicate_samples.assign(L, {});
      chain.replicate_loglik.assign(L, {});
      for (int ell = 0; ell < L; ++ell) {
        for (std::uint64_t i = 0; i < count; ++i) {
          ParameterState st;
          double head[2];
          take_doubles(head, 2);
          st.beta_glob.resize(p);
          take_doubles(st.beta_glob.data(), p);
          st.tau = head[1];
          chain.replicate_loglik[ell].push_back(head[0]);
          chain.replicate_samples[ell].push_back(std::move(st));
        }
      }
    } else {
      for (std::uint64_t i = 0; i < count; ++i) {
        ParameterState st;
        double head[2];
        take_doubles(head, 2);
        st.tau = head[1];
        st.beta_glob.resize(p);
        take_doubles(st.beta_glob.data(), p);
        if (hierarchical) {
          st.zeta.resize(L);
          st.beta_loc.assign(L, SplineVector(p));
          for (int ell = 0; ell < L; ++ell) {
            take_doubles(&st.zeta[ell], 1);
            take_doubles(st.beta_loc[ell].data(), p);
          }
        }
        chain.loglik.push_back(head[0]);
        chain.samples.push_back(std::move(st));
      }
    }
    return chain;
  }

  const auto read_global_block = [&](const fs::path& file, std::vector<ParameterState>& samples,
                                     std::vector<double>& loglik) {
    const auto lines = read_lines(file);
    require_header(lines, spline_header("iter,loglik,tau", B), file);
    for (std::size_t i = 1; i < lines.size(); ++i) {
      if (lines[i].empty()) continue;
      const auto vals = parse_row(lines[i], 3 + p, file, i + 1);
      ParameterState st;
      st.tau = vals[2];
      st.beta_glob.resize(p);
      for (int b = 0; b < p; ++b) st.beta_glob[b] = vals[3 + b];
      loglik.push_back(vals[1]);
      samples.push_back(std::move(st));
    }
  };

  if (independent) {
    chain.replicate_samples.assign(L, {});
    chain.replicate_loglik.assign(L, {});
    for (int ell = 0; ell < L; ++ell)
      read_global_block(dir / ("chain_" + m.labels[ell] + ".csv"),
                        chain.replicate_samples[ell], chain.replicate_loglik[ell]);
    return chain;
  }

  read_global_block(dir / "chain_global.csv", chain.samples, chain.loglik);
  if (hierarchical) {
    for (auto& st : chain.samples) {
      st.zeta.resize(L);
      st.beta_loc.assign(L, SplineVector(p));
    }
    for (int ell = 0; ell < L; ++ell) {
      const fs::path file = dir / ("chain_local_" + m.labels[ell] + ".csv");
      const auto lines = read_lines(file);
      require_header(lines, spline_header("iter,zeta", B), file);
      if (lines.size() < chain.samples.size() + 1)
        throw InvalidInput("'" + file.string() + "': fewer rows than chain_global.csv");
      for (std::size_t i = 0; i < chain.samples.size(); ++i) {
        const auto vals = parse_row(lines[i + 1], 2 + p, file, i + 2);
        chain.samples[i].zeta[ell] = vals[1];
        for (int b = 0; b < p; ++b) chain.samples[i].beta_loc[ell][b] = vals[2 + b];
      }
    }
  }
  return chain;
}

void write_truth_csv(const fs::path& path, const TruthTable& table) {
  std::string out = "series,omega,g_true\n";
  for (std::size_t ell = 0; ell < table.labels.size(); ++ell) {
    for (int k = 0; k < table.omegas.size(); ++k)
      out += table.labels[ell] + "," + fmt17(table.omegas[k]) + "," +
             fmt17(table.g_true[ell][k]) + "\n";
  }
  atomic_write_text(path, out);
}

TruthTable read_truth_csv(const fs::path& path) {
  const auto lines = read_lines(path);
  require_header(lines, "series,omega,g_true", path);
  TruthTable table;
  std::vector<double> omegas;
  std::vector<double> current;
  std::string current_label;
  const auto flush = [&]() {
    if (current_label.empty()) return;
    table.labels.push_back(current_label);
    table.g_true.push_back(Eigen::Map<const Vec>(current.data(), current.size()));
    current.clear();
  };
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto fields = split_csv(lines[i]);
    if (fields.size() != 3)
      throw InvalidInput("'" + path.string() + "' line " + std::to_string(i + 1) +
                         ": expected 3 fields");
    if (fields[0] != current_label) {
      flush();
      current_label = fields[0];
    }
    if (table.labels.empty()) omegas.push_back(parse_double(fields[1], path, i + 1));
    current.push_back(parse_double(fields[2], path, i + 1));
  }
  flush();
  table.omegas = Eigen::Map<const Vec>(omegas.data(), omegas.size());
  for (const auto& g : table.g_true)
    if (g.size() != table.omegas.size())
      throw InvalidInput("'" + path.string() + "': ragged truth table");
  return table;
}

EvalGrid grid_from_omegas(const Vec& omegas, double trim_lo, double trim_hi) {
  const int K = static_cast<int>(omegas.size());
  EvalGrid grid{K, trim_lo, trim_hi};
  grid.validate();
  const Vec expected = grid.omegas();
  for (int k = 0; k < K; ++k)
    if (std::abs(omegas[k] - expected[k]) > 1e-9)
      throw InvalidInput("truth grid is not of the form pi*k/(K-1)");
  return grid;
}

namespace {

void append_summary_rows(std::string& out, const Vec& omegas, const SeriesSummary& s,
                         const std::string& series, const std::string& kind) {
  for (int k = 0; k < omegas.size(); ++k)
    out += fmt17(omegas[k]) + "," + fmt17(s.mean[k]) + "," + fmt17(s.lower[k]) + "," +
           fmt17(s.upper[k]) + "," + series + "," + kind + "\n";
}

json summary_block(const Vec& omegas, const SeriesSummary& s) {
  json j;
  j["mean"] = std::vector<double>(s.mean.data(), s.mean.data() + s.mean.size());
  j["lower"] = std::vector<double>(s.lower.data(), s.lower.data() + s.lower.size());
  j["upper"] = std::vector<double>(s.upper.data(), s.upper.data() + s.upper.size());
  (void)omegas;
  return j;
}

}  // namespace

void write_summary_csv(const fs::path& path, const SpectrumSummary& summary) {
  const Vec omegas = summary.grid.omegas();
  std::string out = "frequency,estimate,lower,upper,series,kind\n";
  if (summary.global) append_summary_rows(out, omegas, *summary.global, "", "global");
  for (std::size_t ell = 0; ell < summary.individual.size(); ++ell)
    append_summary_rows(out, omegas, summary.individual[ell], summary.labels[ell],
                        "individual");
  for (std::size_t ell = 0; ell < summary.local.size(); ++ell)
    append_summary_rows(out, omegas, summary.local[ell], summary.labels[ell], "local");
  atomic_write_text(path, out);
}

void write_summary_json(const fs::path& path, const SpectrumSummary& summary) {
  const Vec omegas = summary.grid.omegas();
  json j;
  j["schema_version"] = kSchemaVersion;
  j["grid"] = {{"K", summary.grid.K},
               {"trim", {summary.grid.trim_lo, summary.grid.trim_hi}},
               {"omega_max", omegas[omegas.size() - 1]}};
  if (summary.global) j["global"] = summary_block(omegas, *summary.global);
  json series = json::object();
  for (std::size_t ell = 0; ell < summary.individual.size(); ++ell) {
    json entry;
    entry["individual"] = summary_block(omegas, summary.individual[ell]);
    if (ell < summary.local.size())
      entry["local"] = summary_block(omegas, summary.local[ell]);
    series[summary.labels[ell]] = entry;
  }
  j["series"] = series;
  atomic_write_text(path, j.dump() + "\n");
}

std::map<std::string, std::string> read_group_spec(const fs::path& path) {
  const auto lines = read_lines(path);
  require_header(lines, "label,group", path);
  std::map<std::string, std::string> groups;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto fields = split_csv(lines[i]);
    if (fields.size() != 2)
      throw InvalidInput("'" + path.string() + "' line " + std::to_string(i + 1) +
                         ": expected 2 fields");
    if (groups.count(fields[0]))
      throw InvalidInput("group spec: replicate '" + fields[0] + "' assigned twice");
    groups[fields[0]] = fields[1];
  }
  return groups;
}

}  // namespace hbest::io
