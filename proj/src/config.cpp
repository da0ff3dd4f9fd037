#include "proxskip/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace proxskip {

using nlohmann::json;

std::vector<ConfigKey> const &config_keys()
{
  static std::vector<ConfigKey> const keys{
    {"problem", "sinogram", "path of the measured sinogram (metadata file)"},
    {"problem", "reference", "path of the reference solution x* used for rel_err and tolerance stops"},
    {"problem", "ground_truth", "path of the ground-truth image used for PSNR/SSIM"},
    {"problem", "output", "output path: image file for reconstruct, directory for sweep"},
    {"problem", "width", "reconstruction width in pixels (default: from reference or ground truth)"},
    {"problem", "height", "reconstruction height in pixels (default: from reference or ground truth, else the width)"},

    {"solver", "algorithm", "ista, fista, proxskip, proxsgd[skip], proxsaga[skip], proxsvrg[skip], proxlsvrg[skip]"},
    {"solver", "gamma", "step size; default 1.99/L (ISTA, ProxSkip), 1/L (FISTA, SGD, SVRG, LSVRG), 1/(3L) (SAGA)"},
    {"solver", "skip_probability", "prox probability p in (0, 1]; default 1 (or sqrt(mu/L) with solver.mu); forced to 1 for non-skipped algorithms"},
    {"solver", "n_subsets", "number N of staggered angle subsets for stochastic estimators"},
    {"solver", "seed", "seed for subset sampling, prox skipping and LSVRG refresh streams"},
    {"solver", "init", "initial image: zero or fbp"},
    {"solver", "log_every", "data passes between logged rows"},
    {"solver", "mu", "strong convexity constant; when set and p is not, p = sqrt(mu/L)"},
    {"solver", "objective", "log the objective value on every row"},

    {"tv", "alpha", "TV regularisation weight alpha > 0"},
    {"tv", "inner_iterations", "FGP iterations per prox evaluation"},
    {"tv", "warm_start", "reuse FGP dual variables between prox calls"},
    {"tv", "nonneg", "add the nonnegativity constraint"},

    {"denoiser", "kind", "gaussian, median or external (presence of this section selects plug-and-play mode)"},
    {"denoiser", "sigma", "denoiser strength for non-skipped runs; skipped runs use sigma/sqrt(p)"},
    {"denoiser", "pixel_scale", "Gaussian kernel std in pixels per unit sigma"},
    {"denoiser", "command", "shell command for the external denoiser"},

    {"stopping", "tolerance", "stop once ||x - x*||^2/||x*||^2 drops below this"},
    {"stopping", "max_data_passes", "data-pass budget"},
    {"stopping", "time_budget", "CPU-time budget in seconds"},

    {"sweep", "algorithms", "list of algorithm names"},
    {"sweep", "n_subsets", "list of subset counts N"},
    {"sweep", "probabilities", "list of skip probabilities p"},
    {"sweep", "inner_iterations", "list of FGP inner iteration counts"},
    {"sweep", "repetitions", "seeds 0..repetitions-1 per cell"},
    {"sweep", "seeds", "explicit seed list (overrides repetitions)"},
    {"sweep", "tolerances", "error thresholds reported in the summary"},
    {"sweep", "jobs", "number of cells run concurrently"},

    {"lipschitz", "power_iterations", "power-method iterations for L = ||A||^2"},
    {"lipschitz", "seed", "power-method seed"},
    {"lipschitz", "value", "use this L instead of estimating it"},
  };
  return keys;
}

std::string config_reference()
{
  std::ostringstream s;
  s << "Config file keys (JSON, {\"section\": {\"key\": value}}):\n";
  std::string section;
  for (auto const &k : config_keys()) {
    if (k.section != section) {
      section = k.section;
      s << "  [" << section << "]\n";
    }
    s << "    " << k.path() << "  " << k.description << '\n';
  }
  return s.str();
}

void RunConfigFile::validate() const
{
  algorithm_from_name(algorithm);
  if (gamma && !(*gamma > 0.0)) { throw ConfigError("solver.gamma must be positive"); }
  if (skip_probability && !(*skip_probability > 0.0 && *skip_probability <= 1.0)) { throw ConfigError("solver.skip_probability must lie in (0, 1]"); }
  if (n_subsets < 1) { throw ConfigError("solver.n_subsets must be >= 1"); }
  if (init != "zero" && init != "fbp") { throw ConfigError("solver.init must be zero or fbp"); }
  if (!(log_every > 0.0)) { throw ConfigError("solver.log_every must be positive"); }
  if (width < 0 || height < 0) { throw ConfigError("problem.width/height must be positive"); }
  if (jobs < 1) { throw ConfigError("sweep.jobs must be >= 1"); }
  if (power_iterations < 1) { throw ConfigError("lipschitz.power_iterations must be >= 1"); }
  if (lipschitz && !(*lipschitz > 0.0)) { throw ConfigError("lipschitz.value must be positive"); }
  tv.validate();
  if (denoiser) { denoiser->validate(); }
  stopping.validate();
  sweep.validate();
}

namespace {

template <typename T>
void read(json const &sec, char const *key, T &out)
{
  if (sec.contains(key)) { out = sec.at(key).get<T>(); }
}

template <typename T>
void read(json const &sec, char const *key, std::optional<T> &out)
{
  if (sec.contains(key)) { out = sec.at(key).get<T>(); }
}

} // namespace

RunConfigFile parse_run_config(json const &doc, RunConfigFile cfg)
{
  if (!doc.is_object()) { throw ConfigError("config must be a JSON object"); }
  std::set<std::string> known;
  std::set<std::string> sections;
  for (auto const &k : config_keys()) {
    known.insert(k.path());
    sections.insert(k.section);
  }
  for (auto const &[name, sec] : doc.items()) {
    if (!sections.contains(name)) { throw ConfigError("unknown config section '" + name + "'"); }
    if (!sec.is_object()) { throw ConfigError("config section '" + name + "' must be an object"); }
    for (auto const &[key, _] : sec.items()) {
      if (!known.contains(name + "." + key)) { throw ConfigError("unknown config key '" + name + "." + key + "'"); }
    }
  }

  auto section = [&](char const *name) { return doc.contains(name) ? doc.at(name) : json::object(); };
  try {
    json const problem = section("problem");
    read(problem, "sinogram", cfg.sinogram);
    read(problem, "reference", cfg.reference);
    read(problem, "ground_truth", cfg.ground_truth);
    read(problem, "output", cfg.output);
    read(problem, "width", cfg.width);
    read(problem, "height", cfg.height);

    json const solver = section("solver");
    read(solver, "algorithm", cfg.algorithm);
    read(solver, "gamma", cfg.gamma);
    read(solver, "skip_probability", cfg.skip_probability);
    read(solver, "n_subsets", cfg.n_subsets);
    read(solver, "seed", cfg.seed);
    read(solver, "init", cfg.init);
    read(solver, "log_every", cfg.log_every);
    read(solver, "mu", cfg.mu);
    read(solver, "objective", cfg.objective);

    json const tv = section("tv");
    read(tv, "alpha", cfg.tv.alpha);
    read(tv, "inner_iterations", cfg.tv.inner_iterations);
    read(tv, "warm_start", cfg.tv.warm_start);
    read(tv, "nonneg", cfg.tv.nonneg);

    if (doc.contains("denoiser")) {
      json const den = doc.at("denoiser");
      DenoiserSpec spec = cfg.denoiser.value_or(DenoiserSpec{});
      if (den.contains("kind")) { spec.kind = denoiser_kind_from_string(den.at("kind").get<std::string>()); }
      read(den, "sigma", spec.sigma);
      read(den, "pixel_scale", spec.pixel_scale);
      read(den, "command", spec.command);
      cfg.denoiser = spec;
    }

    json const stop = section("stopping");
    read(stop, "tolerance", cfg.stopping.tolerance);
    read(stop, "max_data_passes", cfg.stopping.max_data_passes);
    read(stop, "time_budget", cfg.stopping.time_budget);

    json const sweep = section("sweep");
    read(sweep, "algorithms", cfg.sweep.algorithms);
    read(sweep, "n_subsets", cfg.sweep.n_subsets);
    read(sweep, "probabilities", cfg.sweep.probabilities);
    read(sweep, "inner_iterations", cfg.sweep.inner_iterations);
    read(sweep, "repetitions", cfg.sweep.repetitions);
    read(sweep, "seeds", cfg.sweep.seeds);
    read(sweep, "tolerances", cfg.sweep.tolerances);
    read(sweep, "jobs", cfg.jobs);

    json const lip = section("lipschitz");
    read(lip, "power_iterations", cfg.power_iterations);
    read(lip, "seed", cfg.power_seed);
    read(lip, "value", cfg.lipschitz);
  } catch (json::exception const &e) {
    throw ConfigError(std::string("config value has the wrong type: ") + e.what());
  } catch (ParameterError const &e) {
    throw ConfigError(e.what());
  }
  return cfg;
}

RunConfigFile load_run_config(std::filesystem::path const &path, RunConfigFile base)
{
  std::ifstream f(path);
  if (!f) { throw ConfigError("cannot open config file " + path.string()); }
  json doc;
  try {
    f >> doc;
  } catch (json::exception const &e) {
    throw ConfigError("config file " + path.string() + " is not valid JSON: " + e.what());
  }
  return parse_run_config(doc, std::move(base));
}

} // namespace proxskip
