#include "proxskip/metrics.hpp"

namespace proxskip {

namespace {

double ssim_formula(double const mx, double const my, double const vx, double const vy, double const cxy, double const c1,
                    double const c2)
{
  return ((2.0 * mx * my + c1) * (2.0 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
}

double reference_range(Image const &ref)
{
  double const r = ref.maxCoeff() - ref.minCoeff();
  return r > 0.0 ? r : 1.0;
}

// Valid-mode separable filtering: out(i, j) = sum_{a,b} k(a) k(b) in(i + a, j + b).
Image filter_valid(Image const &in, Eigen::VectorXd const &k)
{
  Index const n = k.size();
  Index const oh = in.rows() - n + 1;
  Index const ow = in.cols() - n + 1;
  Image rows(in.rows(), ow);
  for (Index i = 0; i < in.rows(); ++i) {
    for (Index j = 0; j < ow; ++j) { rows(i, j) = in.row(i).segment(j, n).dot(k.transpose()); }
  }
  Image out(oh, ow);
  for (Index i = 0; i < oh; ++i) {
    for (Index j = 0; j < ow; ++j) { out(i, j) = rows.col(j).segment(i, n).dot(k); }
  }
  return out;
}

} // namespace

double global_ssim(Image const &x, Image const &ref, double const data_range, SsimParams const &params)
{
  double const c1 = (params.k1 * data_range) * (params.k1 * data_range);
  double const c2 = (params.k2 * data_range) * (params.k2 * data_range);
  auto const n = static_cast<double>(x.size());
  double const mx = x.sum() / n;
  double const my = ref.sum() / n;
  double const vx = (x.array() - mx).square().sum() / n;
  double const vy = (ref.array() - my).square().sum() / n;
  double const cxy = ((x.array() - mx) * (ref.array() - my)).sum() / n;
  return ssim_formula(mx, my, vx, vy, cxy, c1, c2);
}

double ssim(Image const &x, Image const &ref, SsimParams const &params)
{
  if (x.rows() != ref.rows() || x.cols() != ref.cols()) { throw ShapeError("SSIM needs equally shaped images"); }
  double const range = reference_range(ref);
  if (x.rows() < params.window || x.cols() < params.window) { return global_ssim(x, ref, range, params); }

  Eigen::VectorXd k(params.window);
  double const centre = 0.5 * (params.window - 1);
  for (Index a = 0; a < k.size(); ++a) {
    double const d = static_cast<double>(a) - centre;
    k(a) = std::exp(-0.5 * d * d / (params.gaussian_sigma * params.gaussian_sigma));
  }
  k /= k.sum();

  Image const mx = filter_valid(x, k);
  Image const my = filter_valid(ref, k);
  Image const xx = filter_valid(x.cwiseProduct(x), k);
  Image const yy = filter_valid(ref.cwiseProduct(ref), k);
  Image const xy = filter_valid(x.cwiseProduct(ref), k);

  double const c1 = (params.k1 * range) * (params.k1 * range);
  double const c2 = (params.k2 * range) * (params.k2 * range);
  double total = 0.0;
  for (Index i = 0; i < mx.size(); ++i) {
    double const ux = mx.data()[i];
    double const uy = my.data()[i];
    total += ssim_formula(ux, uy, xx.data()[i] - ux * ux, yy.data()[i] - uy * uy, xy.data()[i] - ux * uy, c1, c2);
  }
  return total / static_cast<double>(mx.size());
}

} // namespace proxskip
