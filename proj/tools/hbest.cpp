// hbest: batch front-end for simulating, fitting, and scoring log power
// spectra of replicated stationary time series.
//
// Exit codes: 0 success, 2 input error, 3 numerical/sampler failure.

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hbest/errors.hpp"
#include "hbest/evaluate.hpp"
#include "hbest/io.hpp"
#include "hbest/model.hpp"
#include "hbest/sampler.hpp"
#include "hbest/simulate.hpp"
#include "hbest/spectral.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace hbest;

namespace {

struct CommonFlags {
  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> mode;
  std::optional<int> threads;
  bool standardize = false;
  std::string groups_path;
};

int threads_or_env(const std::optional<int>& flag) {
  if (flag) return *flag;
  if (const char* env = std::getenv("HBEST_THREADS")) {
    try {
      return std::max(1, std::stoi(env));
    } catch (...) {
      throw InvalidInput("HBEST_THREADS is not an integer: '" + std::string(env) + "'");
    }
  }
  return 1;
}

std::vector<fs::path> collect_series_files(const std::vector<std::string>& data_args) {
  std::vector<fs::path> files;
  for (const auto& arg : data_args) {
    const fs::path p(arg);
    if (fs::is_directory(p)) {
      std::vector<fs::path> found;
      for (const auto& e : fs::directory_iterator(p)) {
        if (e.is_regular_file() && e.path().extension() == ".csv" &&
            e.path().filename().string().rfind("truth", 0) != 0)
          found.push_back(e.path());
      }
      std::sort(found.begin(), found.end());
      files.insert(files.end(), found.begin(), found.end());
    } else if (fs::is_regular_file(p)) {
      files.push_back(p);
    } else {
      throw InvalidInput("data path '" + arg + "' is neither a file nor a directory");
    }
  }
  if (files.empty()) throw InvalidInput("no series files found");
  return files;
}

json truth_params_json(const SimulatedReplicate& rep) {
  json j;
  if (const auto* ma = std::get_if<Ma4Params>(&rep.truth)) {
    j["theta"] = ma->theta;
  } else if (const auto* ar = std::get_if<Ar2MixParams>(&rep.truth)) {
    j["gamma"] = {ar->gamma1, ar->gamma2};
    j["kappa"] = {ar->kappa1, ar->kappa2};
    j["phi"] = {{ar->phi11, ar->phi12}, {ar->phi21, ar->phi22}};
  } else {
    const auto& h = std::get<HierParams>(rep.truth);
    j["coeffs"] = std::vector<double>(h.coeffs.data(), h.coeffs.data() + h.coeffs.size());
    j["zeta_star"] = h.zeta_star;
  }
  j["process_variance"] = rep.process_variance;
  j["log_offset"] = rep.log_offset;
  j["n"] = rep.series.n();
  return j;
}

void write_dataset(const fs::path& dir, const SimulatedDataset& data,
                   const io::SimulateSetting& setting, std::uint64_t dataset_seed,
                   const std::vector<std::pair<std::string, std::string>>& inputs) {
  fs::create_directories(dir);
  const EvalGrid grid{setting.eval_grid_K, 0.05, 0.95};
  const Vec omegas = grid.omegas();

  io::TruthTable truth;
  truth.omegas = omegas;
  json meta_reps = json::object();
  for (int ell = 0; ell < data.L(); ++ell) {
    const auto& rep = data.replicates[ell];
    io::write_series_csv(dir / (rep.series.label + ".csv"), rep.series);
    truth.labels.push_back(rep.series.label);
    truth.g_true.push_back(data.truth_on_grid(ell, omegas));
    meta_reps[rep.series.label] = truth_params_json(rep);
  }
  io::write_truth_csv(dir / "truth.csv", truth);

  json meta;
  meta["schema_version"] = io::kSchemaVersion;
  meta["family"] = data.family;
  meta["setting"] = json::parse(io::simulate_setting_json(setting));
  meta["dataset_seed"] = dataset_seed;
  meta["standardized"] = data.standardized;
  if (data.family == "hierarchical") {
    meta["tau_star"] = data.hier_tau_star;
    meta["global_coeffs"] = std::vector<double>(
        data.hier_global.data(), data.hier_global.data() + data.hier_global.size());
  }
  meta["replicates"] = meta_reps;
  io::atomic_write_text(dir / "metadata.json", meta.dump(2) + "\n");

  io::Manifest manifest;
  manifest.command = "simulate";
  manifest.seed = dataset_seed;
  manifest.config_json = io::simulate_setting_json(setting);
  manifest.inputs = inputs;
  manifest.labels = truth.labels;
  io::write_manifest(dir / "manifest.json", manifest);
}

int cmd_simulate(const CommonFlags& flags, bool standardize_flag) {
  io::SimulateSetting setting = io::parse_simulate_setting(io::read_text(flags.config_path));
  if (flags.seed) setting.set_seed(*flags.seed);
  if (standardize_flag) setting.set_standardize(true);

  const std::vector<std::pair<std::string, std::string>> inputs{
      {flags.config_path, io::sha256_file(flags.config_path)}};

  const auto generate = [&](const io::SimulateSetting& s) {
    if (s.family == "ma4") return gen_ma4(s.ma4);
    if (s.family == "ar2_mixture") return gen_ar2_mixture(s.ar2);
    return gen_hierarchical(s.hier);
  };

  const fs::path out(flags.out_dir);
  if (setting.S == 1) {
    write_dataset(out, generate(setting), setting, setting.seed(), inputs);
  } else {
    for (int s = 0; s < setting.S; ++s) {
      io::SimulateSetting per = setting;
      per.set_seed(derive_seed(setting.seed(), 0, StreamStep::SimulateDataset, s + 1));
      char name[16];
      std::snprintf(name, sizeof(name), "set%02d", s + 1);
      write_dataset(out / name, generate(per), per, per.seed(), inputs);
    }
  }
  return 0;
}

void warn_low_acceptance(const Chain& chain) {
  const auto warn = [](const std::string& what, double rate) {
    if (rate <= 0.1)
      std::cerr << "warning: " << what << " acceptance rate " << rate
                << " is at or below 0.1; mixing may be poor\n";
  };
  if (chain.accept.global_total > 0) warn("global spline", chain.accept.global_rate());
  for (std::size_t ell = 0; ell < chain.accept.local_total.size(); ++ell)
    if (chain.accept.local_total[ell] > 0)
      warn("local spline [" + chain.labels[ell] + "]", chain.accept.local_rate(ell));
}

void run_one_fit(const std::vector<TimeSeries>& series, const io::FitConfig& cfg,
                 const fs::path& out_dir,
                 const std::vector<std::pair<std::string, std::string>>& inputs) {
  std::vector<TimeSeries> prepared = series;
  if (cfg.standardize)
    for (auto& s : prepared) s = standardize(s);

  const Dataset data = make_dataset(prepared, cfg.sampler.hp.B);
  const Chain chain = run_chain(data, cfg.sampler);
  warn_low_acceptance(chain);

  io::write_chain_files(out_dir, chain, cfg.chain_format);
  const SpectrumSummary summary = posterior_summary(chain, cfg.grid());
  io::write_summary_csv(out_dir / "summary.csv", summary);
  io::write_summary_json(out_dir / "summary.json", summary);

  io::Manifest manifest;
  manifest.command = "fit";
  manifest.seed = cfg.sampler.seed;
  manifest.config_json = io::fit_config_json(cfg);
  manifest.inputs = inputs;
  manifest.mode = to_string(cfg.sampler.mode);
  manifest.chain_format = cfg.chain_format;
  manifest.labels = chain.labels;
  manifest.seconds_total = chain.seconds_total;
  manifest.seconds_post_burnin = chain.seconds_post_burnin;
  manifest.accept_global = chain.accept.global_total > 0 ? chain.accept.global_rate() : -1.0;
  for (std::size_t ell = 0; ell < chain.accept.local_total.size(); ++ell)
    manifest.accept_local.push_back(chain.accept.local_rate(ell));
  io::write_manifest(out_dir / "manifest.json", manifest);
}

int cmd_fit(const CommonFlags& flags, const std::vector<std::string>& data_args) {
  io::FitConfig cfg = flags.config_path.empty()
                          ? io::default_fit_config()
                          : io::parse_fit_config(io::read_text(flags.config_path));
  if (flags.seed) cfg.sampler.seed = *flags.seed;
  if (flags.mode) cfg.sampler.mode = model_mode_from_string(*flags.mode);
  if (flags.standardize) cfg.standardize = true;
  cfg.sampler.threads = threads_or_env(flags.threads);
  cfg.sampler.validate();

  const auto files = collect_series_files(data_args);
  std::vector<std::pair<std::string, std::string>> inputs;
  if (!flags.config_path.empty())
    inputs.emplace_back(flags.config_path, io::sha256_file(flags.config_path));
  std::vector<TimeSeries> series;
  for (const auto& f : files) {
    series.push_back(io::read_series_csv(f));
    inputs.emplace_back(f.string(), io::sha256_file(f));
  }

  const fs::path out(flags.out_dir);
  if (flags.groups_path.empty()) {
    run_one_fit(series, cfg, out, inputs);
    return 0;
  }

  const auto spec = io::read_group_spec(flags.groups_path);
  inputs.emplace_back(flags.groups_path, io::sha256_file(flags.groups_path));
  std::map<std::string, std::vector<TimeSeries>> by_group;
  for (const auto& s : series) {
    const auto it = spec.find(s.label);
    if (it == spec.end()) {
      std::cerr << "warning: series '" << s.label << "' has no group assignment; skipped\n";
      continue;
    }
    by_group[it->second].push_back(s);
  }
  if (by_group.empty()) throw InvalidInput("group spec matches no input series");
  int index = 0;
  for (const auto& [group, members] : by_group) {
    io::FitConfig per = cfg;
    per.sampler.seed = derive_seed(cfg.sampler.seed, 0, StreamStep::GroupFit, index++);
    run_one_fit(members, per, out / group, inputs);
  }
  return 0;
}

struct LoadedFit {
  std::string name;
  fs::path dir;
  Chain chain;
  io::FitConfig config;
};

int cmd_evaluate(const std::vector<std::string>& fit_dirs, const std::string& truth_dir,
                 const std::string& out_dir) {
  if (fit_dirs.empty()) throw InvalidInput("evaluate: need at least one --fit directory");
  std::vector<LoadedFit> fits;
  std::vector<std::pair<std::string, std::string>> inputs;
  for (const auto& d : fit_dirs) {
    LoadedFit lf;
    lf.dir = d;
    lf.name = fs::path(d).filename().string();
    if (lf.name.empty()) lf.name = fs::path(d).parent_path().filename().string();
    for (const auto& other : fits)
      if (other.name == lf.name) lf.name += "_" + std::to_string(fits.size());
    const io::Manifest m = io::read_manifest(fs::path(d) / "manifest.json");
    lf.config = io::parse_fit_config(m.config_json);
    lf.chain = io::read_chain_files(d);
    inputs.emplace_back((fs::path(d) / "manifest.json").string(),
                        io::sha256_file(fs::path(d) / "manifest.json"));
    fits.push_back(std::move(lf));
  }

  std::optional<io::TruthTable> truth;
  EvalGrid grid = fits.front().config.grid();
  if (!truth_dir.empty()) {
    truth = io::read_truth_csv(fs::path(truth_dir) / "truth.csv");
    grid = io::grid_from_omegas(truth->omegas, fits.front().config.trim_lo,
                                fits.front().config.trim_hi);
    inputs.emplace_back((fs::path(truth_dir) / "truth.csv").string(),
                        io::sha256_file(fs::path(truth_dir) / "truth.csv"));
  }

  const fs::path out(out_dir);
  fs::create_directories(out);
  json report;
  report["schema_version"] = io::kSchemaVersion;
  json report_fits = json::array();

  struct Score {
    double trimmed, untrimmed;
  };
  std::vector<Score> scores;

  for (auto& lf : fits) {
    json jf;
    jf["name"] = lf.name;
    jf["mode"] = to_string(lf.chain.config.mode);

    // Posterior summaries for every fit.
    const SpectrumSummary summary = posterior_summary(lf.chain, grid);
    io::write_summary_csv(out / ("summary_" + lf.name + ".csv"), summary);
    io::write_summary_json(out / ("summary_" + lf.name + ".json"), summary);

    // Cross-replicate spread of the local estimates (hierarchical fits only).
    if (lf.chain.config.mode == ModelMode::Hierarchical && lf.chain.labels.size() >= 2) {
      const Vec sd = local_sd(lf.chain, grid);
      const Vec omegas = grid.omegas();
      std::string csv = "frequency,local_sd\n";
      for (int k = 0; k < omegas.size(); ++k)
        csv += io::fmt17(omegas[k]) + "," + io::fmt17(sd[k]) + "\n";
      io::atomic_write_text(out / ("local_sd_" + lf.name + ".csv"), csv);
    }

    // ESS of the posterior log-spectrum samples over the trimmed grid.
    {
      const Mat phi = basis_matrix(grid.omegas(), lf.chain.config.hp.B).rows;
      const auto idx = grid.trimmed_indices();
      const bool independent = lf.chain.config.mode == ModelMode::Independent;
      const long I = lf.chain.stored();
      const int L = independent ? int(lf.chain.replicate_samples.size()) : 1;
      std::string csv = "frequency,ess,ess_per_second\n";
      double mean_ess = 0.0;
      const double secs = std::max(lf.chain.seconds_post_burnin, 1e-12);
      Vec samples(I);
      for (const int k : idx) {
        double e_here = 0.0;
        for (int src = 0; src < L; ++src) {
          for (long i = 0; i < I; ++i) {
            const SplineVector& c = independent
                                        ? lf.chain.replicate_samples[src][i].beta_glob
                                        : lf.chain.samples[i].beta_glob;
            samples[i] = phi.row(k).dot(c);
          }
          e_here += ess(samples).ess;
        }
        e_here /= L;
        mean_ess += e_here;
        csv += io::fmt17(grid.omegas()[k]) + "," + io::fmt17(e_here) + "," +
               io::fmt17(e_here / secs) + "\n";
      }
      mean_ess /= double(idx.size());
      io::atomic_write_text(out / ("ess_" + lf.name + ".csv"), csv);
      jf["mean_ess"] = mean_ess;
      jf["mean_ess_per_second"] = mean_ess / secs;
    }

    if (truth) {
      // Align truth rows with the chain's replicate order by label.
      std::vector<Vec> truths;
      for (const auto& label : lf.chain.labels) {
        const auto it = std::find(truth->labels.begin(), truth->labels.end(), label);
        if (it == truth->labels.end())
          throw InvalidInput("truth table has no series '" + label + "'");
        truths.push_back(truth->g_true[it - truth->labels.begin()]);
      }
      Score sc{aepl(lf.chain, truths, grid), aepl_untrimmed(lf.chain, truths, grid)};
      scores.push_back(sc);
      jf["aepl_trimmed"] = sc.trimmed;
      jf["aepl_untrimmed"] = sc.untrimmed;
    }
    report_fits.push_back(jf);
  }
  report["fits"] = report_fits;

  if (truth) {
    std::string csv = "fit,aepl_trimmed,aepl_untrimmed\n";
    for (std::size_t i = 0; i < fits.size(); ++i)
      csv += fits[i].name + "," + io::fmt17(scores[i].trimmed) + "," +
             io::fmt17(scores[i].untrimmed) + "\n";
    io::atomic_write_text(out / "aepl.csv", csv);

    json ratios = json::array();
    std::string rcsv = "fit_a,fit_b,log_ratio_trimmed,log_ratio_untrimmed\n";
    for (std::size_t a = 0; a < fits.size(); ++a) {
      for (std::size_t b = a + 1; b < fits.size(); ++b) {
        const double rt = std::log(scores[a].trimmed / scores[b].trimmed);
        const double ru = std::log(scores[a].untrimmed / scores[b].untrimmed);
        rcsv += fits[a].name + "," + fits[b].name + "," + io::fmt17(rt) + "," +
                io::fmt17(ru) + "\n";
        ratios.push_back({{"fit_a", fits[a].name},
                          {"fit_b", fits[b].name},
                          {"log_ratio_trimmed", rt},
                          {"log_ratio_untrimmed", ru}});
      }
    }
    if (fits.size() > 1) io::atomic_write_text(out / "aepl_ratios.csv", rcsv);
    report["aepl_ratios"] = ratios;
  }

  io::atomic_write_text(out / "report.json", report.dump(2) + "\n");

  io::Manifest manifest;
  manifest.command = "evaluate";
  manifest.config_json = "{}";
  manifest.inputs = inputs;
  io::write_manifest(out / "manifest.json", manifest);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hierarchical Bayesian estimation of log power spectra for replicated "
               "stationary time series"};
  app.require_subcommand(1);

  CommonFlags flags;
  std::vector<std::string> data_args, fit_dirs;
  std::string truth_dir;
  bool standardize_flag = false;

  auto* sim = app.add_subcommand("simulate", "Generate datasets from a setting file");
  sim->add_option("--config", flags.config_path, "Setting file (JSON)")->required();
  sim->add_option("--out", flags.out_dir, "Output directory")->required();
  sim->add_option("--seed", [&flags](const std::vector<std::string>& v) {
       flags.seed = std::stoull(v[0]);
       return true;
     }, "Override the setting's seed");
  sim->add_flag("--standardize", standardize_flag, "Standardize generated series");

  auto* fit = app.add_subcommand("fit", "Run the sampler on series files");
  fit->add_option("--data", data_args, "Series CSV files or directories")->required();
  fit->add_option("--config", flags.config_path, "Fit configuration (JSON)");
  fit->add_option("--out", flags.out_dir, "Output directory")->required();
  fit->add_option("--seed", [&flags](const std::vector<std::string>& v) {
       flags.seed = std::stoull(v[0]);
       return true;
     }, "Override the config seed");
  fit->add_option("--mode", [&flags](const std::vector<std::string>& v) {
       flags.mode = v[0];
       return true;
     }, "hierarchical|common|independent");
  fit->add_option("--groups", flags.groups_path, "Group spec CSV (label,group)");
  fit->add_flag("--standardize", flags.standardize, "Standardize series before fitting");
  fit->add_option("--threads", [&flags](const std::vector<std::string>& v) {
       flags.threads = std::stoi(v[0]);
       return true;
     }, "Worker threads (HBEST_THREADS env as fallback)");

  auto* ev = app.add_subcommand("evaluate", "Score and summarize fit outputs");
  ev->add_option("--fit", fit_dirs, "Fit output directories")->required();
  ev->add_option("--truth", truth_dir, "Directory containing truth.csv");
  ev->add_option("--out", flags.out_dir, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  }

  try {
    if (sim->parsed()) return cmd_simulate(flags, standardize_flag);
    if (fit->parsed()) return cmd_fit(flags, data_args);
    return cmd_evaluate(fit_dirs, truth_dir, flags.out_dir);
  } catch (const SamplerFailure& e) {
    std::cerr << "sampler failure: " << e.what() << "\n";
    if (!e.state_dump.empty() && !flags.out_dir.empty()) {
      try {
        json dump;
        dump["iteration"] = e.iteration;
        dump["state"] = json::parse(e.state_dump);
        io::atomic_write_text(fs::path(flags.out_dir) / "failure_state.json",
                              dump.dump(2) + "\n");
        std::cerr << "state dump: " << (fs::path(flags.out_dir) / "failure_state.json").string()
                  << "\n";
      } catch (...) {
      }
    }
    return 3;
  } catch (const InvalidInput& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "failure: " << e.what() << "\n";
    return 3;
  }
}
