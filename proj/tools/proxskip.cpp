// proxskip: phantoms, sinograms, reference solutions, reconstructions and sweeps.
//
// Exit codes: 0 success, 1 runtime failure, 2 configuration error, 3 divergence.

#include "proxskip/bench.hpp"
#include "proxskip/config.hpp"
#include "proxskip/io.hpp"
#include "proxskip/metrics.hpp"
#include "proxskip/pdhg.hpp"
#include "proxskip/phantoms.hpp"
#include "proxskip/projector.hpp"
#include "proxskip/selfcheck.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iomanip>
#include <iostream>

using namespace proxskip;

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitDivergence = 3;

template <typename T>
void apply(std::optional<T> const &flag, T &target)
{
  if (flag) { target = *flag; }
}

template <typename T>
void apply(std::optional<T> const &flag, std::optional<T> &target)
{
  if (flag) { target = *flag; }
}

/// Flags shared by `reconstruct` and `sweep`; each overrides the matching config key.
struct Overrides
{
  std::string config;
  std::optional<std::string> sinogram, reference, ground_truth, output, algorithm, init, denoiser;
  std::optional<Index> width, height, n_subsets;
  std::optional<double> gamma, p, mu, alpha, tolerance, max_passes, time_budget, sigma, log_every, lipschitz;
  std::optional<int> inner, jobs;
  std::optional<std::uint64_t> seed;
  std::optional<bool> nonneg, objective;

  void attach(CLI::App &cmd)
  {
    cmd.add_option("-c,--config", config, "JSON run configuration file")->check(CLI::ExistingFile);
    cmd.add_option("--sinogram", sinogram, "problem.sinogram");
    cmd.add_option("--reference", reference, "problem.reference");
    cmd.add_option("--ground-truth", ground_truth, "problem.ground_truth");
    cmd.add_option("-o,--out", output, "problem.output");
    cmd.add_option("--width", width, "problem.width");
    cmd.add_option("--height", height, "problem.height");
    cmd.add_option("--algorithm", algorithm, "solver.algorithm");
    cmd.add_option("--gamma", gamma, "solver.gamma");
    cmd.add_option("-p,--skip-probability", p, "solver.skip_probability");
    cmd.add_option("-N,--subsets", n_subsets, "solver.n_subsets");
    cmd.add_option("--seed", seed, "solver.seed");
    cmd.add_option("--init", init, "solver.init");
    cmd.add_option("--log-every", log_every, "solver.log_every");
    cmd.add_option("--mu", mu, "solver.mu");
    cmd.add_option("--objective", objective, "solver.objective");
    cmd.add_option("--alpha", alpha, "tv.alpha");
    cmd.add_option("--inner-iterations", inner, "tv.inner_iterations");
    cmd.add_option("--nonneg", nonneg, "tv.nonneg");
    cmd.add_option("--denoiser", denoiser, "denoiser.kind");
    cmd.add_option("--sigma", sigma, "denoiser.sigma");
    cmd.add_option("--tolerance", tolerance, "stopping.tolerance");
    cmd.add_option("--max-passes", max_passes, "stopping.max_data_passes");
    cmd.add_option("--time-budget", time_budget, "stopping.time_budget");
    cmd.add_option("-j,--jobs", jobs, "sweep.jobs");
    cmd.add_option("--lipschitz", lipschitz, "lipschitz.value");
  }

  RunConfigFile resolve() const
  {
    RunConfigFile cfg = config.empty() ? RunConfigFile{} : load_run_config(config);
    apply(sinogram, cfg.sinogram);
    apply(reference, cfg.reference);
    apply(ground_truth, cfg.ground_truth);
    apply(output, cfg.output);
    apply(width, cfg.width);
    apply(height, cfg.height);
    apply(algorithm, cfg.algorithm);
    apply(gamma, cfg.gamma);
    apply(p, cfg.skip_probability);
    apply(n_subsets, cfg.n_subsets);
    apply(seed, cfg.seed);
    apply(init, cfg.init);
    apply(log_every, cfg.log_every);
    apply(mu, cfg.mu);
    apply(objective, cfg.objective);
    apply(alpha, cfg.tv.alpha);
    apply(inner, cfg.tv.inner_iterations);
    apply(nonneg, cfg.tv.nonneg);
    if (denoiser) {
      DenoiserSpec spec = cfg.denoiser.value_or(DenoiserSpec{});
      spec.kind = denoiser_kind_from_string(*denoiser);
      cfg.denoiser = spec;
    }
    if (sigma) {
      if (!cfg.denoiser) { throw ConfigError("--sigma needs a denoiser (--denoiser or a denoiser section)"); }
      cfg.denoiser->sigma = *sigma;
    }
    apply(tolerance, cfg.stopping.tolerance);
    apply(max_passes, cfg.stopping.max_data_passes);
    apply(time_budget, cfg.stopping.time_budget);
    apply(jobs, cfg.jobs);
    apply(lipschitz, cfg.lipschitz);
    try {
      cfg.validate();
    } catch (ParameterError const &e) {
      throw ConfigError(e.what());
    }
    return cfg;
  }
};

/// Everything loaded from disk for one problem.
struct Loaded
{
  Sinogram sino;
  Index width = 0;
  Index height = 0;
  std::optional<Image> reference;
  std::optional<Image> ground_truth;
  std::shared_ptr<ParallelProjector const> projector;
  double lipschitz = 1.0;
  Image x0;
};

Loaded load_problem(RunConfigFile const &cfg)
{
  if (cfg.sinogram.empty()) { throw ConfigError("problem.sinogram is required"); }
  Loaded out;
  out.sino = load_sinogram(cfg.sinogram);
  if (!cfg.reference.empty()) { out.reference = load_image(cfg.reference); }
  if (!cfg.ground_truth.empty()) { out.ground_truth = load_image(cfg.ground_truth); }
  out.width = cfg.width;
  out.height = cfg.height;
  for (auto const *img : {out.reference ? &*out.reference : nullptr, out.ground_truth ? &*out.ground_truth : nullptr}) {
    if (img == nullptr) { continue; }
    if (out.width == 0) { out.width = img->cols(); }
    if (out.height == 0) { out.height = img->rows(); }
    if (img->cols() != out.width || img->rows() != out.height) {
      throw ConfigError("reference/ground-truth image size does not match the reconstruction size");
    }
  }
  if (out.height == 0) { out.height = out.width; }
  if (out.width == 0) {
    throw ConfigError("reconstruction size unknown: set problem.width (and height) or give a reference image");
  }
  out.projector = std::make_shared<ParallelProjector const>(out.sino.geometry, out.width, out.height);
  out.lipschitz = cfg.lipschitz ? *cfg.lipschitz : operator_norm_sq(*out.projector, cfg.power_iterations, cfg.power_seed);
  out.x0 = cfg.init == "fbp" ? fbp(out.sino, out.width, out.height) : Image::Zero(out.height, out.width);
  return out;
}

Regularizer make_regularizer(RunConfigFile const &cfg)
{
  if (cfg.denoiser) { return DenoiserRegularizer{*cfg.denoiser}; }
  return TvRegularizer{cfg.tv};
}

double data_range_of(std::optional<Image> const &gt)
{
  if (!gt) { return 1.0; }
  double const r = gt->maxCoeff() - gt->minCoeff();
  return r > 0.0 ? r : 1.0;
}

int cmd_phantom(std::string const &kind, FoamSpec const &foam, std::string const &out, std::string const &pgm)
{
  Image img;
  if (kind == "foam") {
    FoamPhantom const ph = foam_phantom(foam);
    if (ph.packing_warning) {
      std::cerr << "warning: only " << ph.bubbles.size() << " of " << foam.bubble_count << " bubbles fit\n";
    }
    img = ph.image;
  } else {
    img = shepp_logan(foam.size);
  }
  save_image(out, img);
  if (!pgm.empty()) { save_pgm(pgm, img); }
  return 0;
}

int cmd_project(std::string const &phantom, Index angles, Index bins, double bin_spacing, double pixel_size,
                NoiseSpec const &noise, std::string const &out)
{
  Image const img = load_image(phantom);
  ParallelGeometry const g = ParallelGeometry::uniform(angles, bins, bin_spacing, pixel_size);
  save_sinogram(out, simulate_sinogram(img, g, noise));
  return 0;
}

int cmd_reference(RunConfigFile const &cfg, int iterations)
{
  Loaded const L = load_problem(cfg);
  auto const data = std::make_shared<LeastSquaresData const>(L.projector, L.sino.values,
                                                             SubsetPartition(L.sino.geometry.n_angles(), 1));
  PdhgOptions opts;
  opts.n_iterations = iterations;
  Image const x = run_pdhg_reference(*data, cfg.tv.alpha, cfg.tv.nonneg, opts);
  std::string const out = cfg.output.empty() ? "reference.img" : cfg.output;
  save_image(out, x);
  std::cout << "reference written to " << out << " (" << iterations << " PDHG iterations, objective "
            << std::setprecision(12) << 0.5 * (L.projector->forward(x) - L.sino.values).squaredNorm() +
                                          cfg.tv.alpha * tv_value(x)
            << ")\n";
  return 0;
}

int cmd_reconstruct(RunConfigFile const &cfg, std::string csv_path)
{
  Loaded const L = load_problem(cfg);
  Algorithm const alg = algorithm_from_name(cfg.algorithm);

  SolverConfig sc;
  double p = cfg.skip_probability.value_or(1.0);
  if (!cfg.skip_probability && cfg.mu) { p = optimal_p(*cfg.mu, L.lipschitz); }
  sc.skip_probability = p;
  sc.mu = cfg.mu;
  sc.gamma = cfg.gamma ? *cfg.gamma : default_step_size(alg, L.lipschitz);
  sc.n_subsets = alg.stochastic() ? cfg.n_subsets : 1;
  sc.seed = cfg.seed;
  sc.tolerance = L.reference ? cfg.stopping.tolerance : 0.0;
  sc.max_data_passes = cfg.stopping.max_data_passes;
  sc.time_budget = cfg.stopping.time_budget;

  Problem problem;
  problem.data = std::make_shared<LeastSquaresData const>(L.projector, L.sino.values,
                                                          build_staggered_partition(L.sino.geometry.n_angles(), sc.n_subsets));
  problem.regularizer = make_regularizer(cfg);
  if (auto *den = std::get_if<DenoiserRegularizer>(&problem.regularizer); den && alg.skip && p < 1.0) {
    den->spec.sigma = skip_sigma(den->spec.sigma, p);
  }

  RunLogger logger;
  logger.reference = L.reference;
  logger.ground_truth = L.ground_truth;
  logger.data_range = data_range_of(L.ground_truth);
  logger.objective = cfg.objective;
  logger.log_every = cfg.log_every;

  std::string const out = cfg.output.empty() ? "reconstruction.img" : cfg.output;
  if (csv_path.empty()) { csv_path = out + ".csv"; }
  try {
    RunResult const res = run_algorithm(alg, sc, problem, L.x0, logger);
    save_image(out, res.x);
    std::ofstream csv(csv_path);
    write_csv(csv, res.record);
    RunRow const &last = res.record.rows.back();
    std::cout << alg.name << ": stopped on " << to_string(res.reason) << " after " << last.iteration << " iterations, "
              << last.data_passes << " data passes, " << last.prox_calls << " prox calls";
    if (last.rel_err) { std::cout << ", rel_err " << std::setprecision(6) << *last.rel_err; }
    if (last.psnr) { std::cout << ", PSNR " << std::setprecision(6) << *last.psnr << " dB"; }
    std::cout << '\n';
  } catch (DivergenceError const &e) {
    std::ofstream csv(csv_path);
    write_csv(csv, e.partial);
    throw;
  }
  return 0;
}

int cmd_sweep(RunConfigFile const &cfg)
{
  Loaded const L = load_problem(cfg);
  if (!L.reference && !(cfg.denoiser && L.ground_truth)) {
    throw ConfigError("sweep needs problem.reference (or a ground truth in denoiser mode)");
  }
  SweepContext ctx;
  ctx.projector = L.projector;
  ctx.measured = L.sino.values;
  ctx.regularizer = make_regularizer(cfg);
  ctx.reference = L.reference;
  ctx.ground_truth = L.ground_truth;
  ctx.data_range = data_range_of(L.ground_truth);
  ctx.lipschitz = L.lipschitz;
  ctx.x0 = L.x0;
  ctx.stopping = cfg.stopping;
  ctx.log_every = cfg.log_every;
  if (cfg.gamma) {
    for (auto const &a : cfg.sweep.algorithms) { ctx.step_overrides[algorithm_from_name(a).name] = *cfg.gamma; }
  }
  std::filesystem::path const dir = cfg.output.empty() ? "sweep" : cfg.output;
  SweepReport const report = run_sweep(cfg.sweep, ctx, dir, cfg.jobs);
  int diverged = 0;
  for (auto const &c : report.cells) {
    if (c.diverged) {
      ++diverged;
      std::cerr << "cell " << c.cell.label() << " diverged: " << c.error << '\n';
    }
  }
  std::cout << report.cells.size() << " cells written to " << dir.string() << '\n';
  write_summary(std::cout, report);
  return 0;
}

int cmd_validate()
{
  bool ok = true;
  for (auto const &r : run_self_checks()) {
    std::cout << (r.passed ? "PASS " : "FAIL ") << r.name << ": " << std::setprecision(3) << r.measured
              << " (threshold " << r.threshold << ")";
    if (!r.detail.empty()) { std::cout << " [" << r.detail << "]"; }
    std::cout << '\n';
    ok = ok && r.passed;
  }
  return ok ? 0 : kExitFailure;
}

} // namespace

int main(int argc, char **argv)
{
  CLI::App app{"Stochastic proximal-gradient reconstruction with skipped proximal steps for parallel-beam tomography"};
  app.require_subcommand(1);
  app.footer(config_reference());

  std::string kind = "foam";
  FoamSpec foam;
  std::string out;
  std::string pgm;
  auto *phantom = app.add_subcommand("phantom", "generate a foam or Shepp-Logan phantom");
  phantom->add_option("--kind", kind, "foam or shepp-logan")->check(CLI::IsMember({"foam", "shepp-logan"}));
  phantom->add_option("--size", foam.size, "image side length in pixels");
  phantom->add_option("--seed", foam.seed, "foam placement seed");
  phantom->add_option("--bubbles", foam.bubble_count, "number of foam bubbles");
  phantom->add_option("--out", out, "output image (metadata path)")->required();
  phantom->add_option("--pgm", pgm, "optional 8-bit PGM preview");

  std::string phantom_path;
  Index angles = 60;
  Index bins = 95;
  double bin_spacing = 1.0;
  double pixel_size = 1.0;
  NoiseSpec noise;
  auto *project = app.add_subcommand("project", "simulate a noisy parallel-beam sinogram of an image");
  project->add_option("--phantom", phantom_path, "input image")->required()->check(CLI::ExistingFile);
  project->add_option("--angles", angles, "number of uniform angles on [0, pi)");
  project->add_option("--bins", bins, "detector bins");
  project->add_option("--bin-spacing", bin_spacing, "detector bin spacing");
  project->add_option("--pixel-size", pixel_size, "pixel side length");
  project->add_option("--noise", noise.level, "Gaussian noise std as a fraction of the sinogram maximum");
  project->add_option("--noise-seed", noise.seed, "noise seed");
  project->add_option("--out", out, "output sinogram (metadata path)")->required();

  std::string sino_path;
  Index fbp_w = 0;
  Index fbp_h = 0;
  auto *fbp_cmd = app.add_subcommand("fbp", "filtered back-projection");
  fbp_cmd->add_option("--sinogram", sino_path, "input sinogram")->required()->check(CLI::ExistingFile);
  fbp_cmd->add_option("--width", fbp_w, "image width")->required();
  fbp_cmd->add_option("--height", fbp_h, "image height (default: width)");
  fbp_cmd->add_option("--out", out, "output image")->required();

  Overrides ref_over;
  int pdhg_iterations = 50'000;
  auto *reference = app.add_subcommand("reference", "reference solution x* by preconditioned PDHG");
  ref_over.attach(*reference);
  reference->add_option("--iterations", pdhg_iterations, "PDHG iterations");
  reference->footer(config_reference());

  Overrides rec_over;
  std::string csv;
  auto *reconstruct = app.add_subcommand("reconstruct", "run one algorithm; writes the image and its run-record CSV");
  rec_over.attach(*reconstruct);
  reconstruct->add_option("--csv", csv, "run-record CSV (default: <out>.csv)");
  reconstruct->footer(config_reference());

  Overrides sweep_over;
  auto *sweep = app.add_subcommand("sweep", "run an (algorithm x N x p x inner iterations x seed) grid");
  sweep_over.attach(*sweep);
  sweep->footer(config_reference());

  auto *validate = app.add_subcommand("validate", "run the oracle and property self-checks");

  try {
    app.parse(argc, argv);
  } catch (CLI::CallForHelp const &e) {
    return app.exit(e);
  } catch (CLI::CallForAllHelp const &e) {
    return app.exit(e);
  } catch (CLI::ParseError const &e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (phantom->parsed()) { return cmd_phantom(kind, foam, out, pgm); }
    if (project->parsed()) { return cmd_project(phantom_path, angles, bins, bin_spacing, pixel_size, noise, out); }
    if (fbp_cmd->parsed()) {
      save_image(out, fbp(load_sinogram(sino_path), fbp_w, fbp_h > 0 ? fbp_h : fbp_w));
      return 0;
    }
    if (reference->parsed()) { return cmd_reference(ref_over.resolve(), pdhg_iterations); }
    if (reconstruct->parsed()) { return cmd_reconstruct(rec_over.resolve(), csv); }
    if (sweep->parsed()) { return cmd_sweep(sweep_over.resolve()); }
    if (validate->parsed()) { return cmd_validate(); }
  } catch (ConfigError const &e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (ParameterError const &e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (DivergenceError const &e) {
    std::cerr << "diverged: " << e.what() << '\n';
    return kExitDivergence;
  } catch (std::exception const &e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitFailure;
}
