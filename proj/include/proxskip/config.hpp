#pragma once

#include "proxskip/bench.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace proxskip {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// One documented key of the run configuration file, addressed as "section.key".
struct ConfigKey
{
  std::string section;
  std::string key;
  std::string description;

  std::string path() const { return section + "." + key; }
};

/// Every accepted key. The parser rejects anything not listed here.
std::vector<ConfigKey> const &config_keys();

/// Human-readable listing of config_keys(), used by --help.
std::string config_reference();

/// JSON run configuration. Sections mirror the library types:
///   problem   -> input/output paths and image size
///   solver    -> SolverConfig + algorithm selection
///   tv        -> TvProxConfig
///   denoiser  -> DenoiserSpec (presence switches to plug-and-play mode)
///   stopping  -> StoppingRule
///   sweep     -> SweepGrid
///   lipschitz -> power-method settings
struct RunConfigFile
{
  // problem
  std::string sinogram;
  std::string reference;
  std::string ground_truth;
  std::string output;
  Index width = 0;
  Index height = 0;

  // solver
  std::string algorithm = "ista";
  std::optional<double> gamma;
  std::optional<double> skip_probability; // default 1, or sqrt(mu/L) when mu is set
  Index n_subsets = 1;
  std::uint64_t seed = 0;
  std::string init = "zero";
  double log_every = 1.0;
  std::optional<double> mu;
  bool objective = false;

  TvProxConfig tv;
  std::optional<DenoiserSpec> denoiser;
  StoppingRule stopping;
  SweepGrid sweep;
  int jobs = 1;

  int power_iterations = 100;
  std::uint64_t power_seed = 0;
  std::optional<double> lipschitz;

  void validate() const;
};

RunConfigFile parse_run_config(nlohmann::json const &doc, RunConfigFile base = {});
RunConfigFile load_run_config(std::filesystem::path const &path, RunConfigFile base = {});

} // namespace proxskip
