#include "proxskip/denoise.hpp"
#include "proxskip/io.hpp"

#include <json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <unistd.h>

namespace proxskip {

std::string to_string(DenoiserKind const kind)
{
  switch (kind) {
  case DenoiserKind::Gaussian: return "gaussian";
  case DenoiserKind::Median: return "median";
  case DenoiserKind::External: return "external";
  }
  return "unknown";
}

DenoiserKind denoiser_kind_from_string(std::string const &name)
{
  if (name == "gaussian" || name == "builtin-gaussian") { return DenoiserKind::Gaussian; }
  if (name == "median" || name == "builtin-median") { return DenoiserKind::Median; }
  if (name == "external" || name == "external-command") { return DenoiserKind::External; }
  throw ParameterError("unknown denoiser kind '" + name + "'");
}

void DenoiserSpec::validate() const
{
  if (!(sigma > 0.0)) { throw ParameterError("denoiser sigma must be positive"); }
  if (!(pixel_scale > 0.0)) { throw ParameterError("denoiser pixel_scale must be positive"); }
  if (kind == DenoiserKind::External && command.empty()) { throw ParameterError("external denoiser needs a command"); }
}

Image gaussian_blur(Image const &image, double const std_pixels)
{
  if (!(std_pixels > 0.0)) { return image; }
  auto const radius = static_cast<Index>(std::ceil(3.0 * std_pixels));
  double const t = std_pixels * std_pixels;
  Eigen::VectorXd kernel(2 * radius + 1);
  for (Index k = -radius; k <= radius; ++k) {
    // e^-t I_k(t) has variance t on the integers; the sampled density is used once the Bessel form overflows.
    kernel(k + radius) = t < 50.0 ? std::exp(-t) * std::cyl_bessel_i(static_cast<double>(std::abs(k)), t)
                                  : std::exp(-0.5 * static_cast<double>(k * k) / t);
  }
  kernel /= kernel.sum();

  Index const h = image.rows();
  Index const w = image.cols();
  Image tmp(h, w);
  for (Index i = 0; i < h; ++i) {
    for (Index j = 0; j < w; ++j) {
      double acc = 0.0;
      for (Index k = -radius; k <= radius; ++k) { acc += kernel(k + radius) * image(i, std::clamp<Index>(j + k, 0, w - 1)); }
      tmp(i, j) = acc;
    }
  }
  Image out(h, w);
  for (Index i = 0; i < h; ++i) {
    for (Index j = 0; j < w; ++j) {
      double acc = 0.0;
      for (Index k = -radius; k <= radius; ++k) { acc += kernel(k + radius) * tmp(std::clamp<Index>(i + k, 0, h - 1), j); }
      out(i, j) = acc;
    }
  }
  return out;
}

Image median3x3(Image const &image)
{
  Index const h = image.rows();
  Index const w = image.cols();
  Image out(h, w);
  std::array<double, 9> win{};
  for (Index i = 0; i < h; ++i) {
    for (Index j = 0; j < w; ++j) {
      size_t n = 0;
      for (Index di = -1; di <= 1; ++di) {
        for (Index dj = -1; dj <= 1; ++dj) {
          win[n++] = image(std::clamp<Index>(i + di, 0, h - 1), std::clamp<Index>(j + dj, 0, w - 1));
        }
      }
      std::nth_element(win.begin(), win.begin() + 4, win.end());
      out(i, j) = win[4];
    }
  }
  return out;
}

namespace {

std::mutex external_mutex;

Image run_external(Image const &image, DenoiserSpec const &spec)
{
  std::lock_guard const lock(external_mutex);
  namespace fs = std::filesystem;
  std::string tmpl = (fs::temp_directory_path() / "proxskip-denoise-XXXXXX").string();
  if (mkdtemp(tmpl.data()) == nullptr) { throw DenoiserError("could not create a temporary directory"); }
  fs::path const dir(tmpl);
  fs::path const in = dir / "in.bin";
  fs::path const out = dir / "out.bin";
  fs::path const err = dir / "err.txt";

  {
    std::ofstream f(in, std::ios::binary);
    nlohmann::json const meta{{"width", image.cols()}, {"height", image.rows()}, {"sigma", spec.sigma}};
    f << meta.dump() << '\n';
    write_raw_f64(f, std::span<double const>(image.data(), static_cast<size_t>(image.size())));
  }

  std::string const cmd = "(" + spec.command + ") < '" + in.string() + "' > '" + out.string() + "' 2> '" + err.string() + "'";
  int const status = std::system(cmd.c_str());

  auto cleanup = [&] {
    std::error_code ec;
    fs::remove_all(dir, ec);
  };

  if (status != 0) {
    std::ifstream ef(err);
    std::stringstream diag;
    diag << ef.rdbuf();
    cleanup();
    throw DenoiserError("external denoiser '" + spec.command + "' failed with status " + std::to_string(status) +
                        (diag.str().empty() ? std::string() : ": " + diag.str()));
  }

  Image result(image.rows(), image.cols());
  try {
    std::ifstream f(out, std::ios::binary);
    read_raw_f64(f, std::span<double>(result.data(), static_cast<size_t>(result.size())));
  } catch (IoError const &e) {
    cleanup();
    throw DenoiserError(std::string("external denoiser output unreadable: ") + e.what());
  }
  cleanup();
  return result;
}

} // namespace

Image apply_denoiser(Image const &image, DenoiserSpec const &spec)
{
  spec.validate();
  switch (spec.kind) {
  case DenoiserKind::Gaussian: return gaussian_blur(image, spec.sigma * spec.pixel_scale);
  case DenoiserKind::Median: return median3x3(image);
  case DenoiserKind::External: return run_external(image, spec);
  }
  return image;
}

double skip_sigma(double const sigma_nonskip, double const p)
{
  if (!(p > 0.0 && p <= 1.0)) { throw ParameterError("skip probability must lie in (0, 1]"); }
  if (!(sigma_nonskip > 0.0)) { throw ParameterError("sigma must be positive"); }
  return sigma_nonskip / std::sqrt(p);
}

} // namespace proxskip
