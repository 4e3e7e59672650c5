#include "uncertainty.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "error.hpp"

namespace smpc::uncertainty {

namespace {

// Stream ids reserved for model-internal draws.
constexpr std::uint64_t kCovarianceStream = 0xc0;
constexpr std::uint64_t kQuantileStream = 0x9a;

}  // namespace

const char * to_string(DisturbanceKind kind)
{
  switch (kind) {
    case DisturbanceKind::uniform_box: return "uniform-on-box";
    case DisturbanceKind::truncated_gaussian: return "truncated-gaussian";
    case DisturbanceKind::mixture_with_core: return "mixture-with-core";
  }
  return "unknown";
}

DisturbanceKind kind_from_string(const std::string & name)
{
  if (name == "uniform-on-box") { return DisturbanceKind::uniform_box; }
  if (name == "truncated-gaussian") { return DisturbanceKind::truncated_gaussian; }
  if (name == "mixture-with-core") { return DisturbanceKind::mixture_with_core; }
  throw Error("schema", "unknown disturbance kind '" + name + "'");
}

DisturbanceModel::DisturbanceModel(DisturbanceKind kind, sets::HPolytope support, DisturbanceParams params,
                                   std::uint64_t seed)
    : kind_(kind), support_(std::move(support)), params_(params), seed_(seed)
{
  const Eigen::Index n = support_.dim();
  if (n == 0 || support_.rows() == 0) { throw Error("dimension", "disturbance support is empty"); }
  if (!sets::contains_origin_in_interior(support_)) {
    throw Error("no_interior", "disturbance support must contain the origin in its interior");
  }
  if (!sets::is_bounded(support_)) { throw Error("unbounded", "disturbance support is unbounded"); }

  lower_.resize(n);
  upper_.resize(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    Vector e = Vector::Zero(n);
    e(j) = 1.0;
    upper_(j) = sets::support(support_, e);
    lower_(j) = -sets::support(support_, -e);
  }
  // Symmetry about 0 is what makes every kind zero-mean.
  const double scale = 1.0 + support_.h().cwiseAbs().maxCoeff();
  for (Eigen::Index i = 0; i < support_.rows(); ++i) {
    const Vector d = support_.H().row(i).transpose();
    if (std::abs(sets::support(support_, d) - sets::support(support_, -d)) > 1e-9 * scale) {
      throw Error("asymmetric", "disturbance support must be symmetric about the origin");
    }
  }
  is_box_ = support_.as_box().has_value();

  switch (kind_) {
    case DisturbanceKind::uniform_box:
      break;
    case DisturbanceKind::truncated_gaussian:
      if (!(params_.sigma > 0.0) || !std::isfinite(params_.sigma)) {
        throw Error("schema", "truncated-gaussian needs sigma > 0");
      }
      break;
    case DisturbanceKind::mixture_with_core:
      if (!(params_.core_weight > 0.0 && params_.core_weight <= 1.0)) {
        throw Error("schema", "mixture-with-core needs core_weight in (0, 1]");
      }
      if (!(params_.core_scale > 0.0 && params_.core_scale < 1.0)) {
        throw Error("schema", "mixture-with-core needs core_scale in (0, 1)");
      }
      break;
  }

  if (kind_ == DisturbanceKind::uniform_box && is_box_) {
    covariance_ = ((upper_ - lower_).array().square() / 12.0).matrix().asDiagonal();
  } else {
    RngStream rng(seed_, kCovarianceStream);
    Matrix acc = Matrix::Zero(n, n);
    for (int k = 0; k < kCovarianceDraws; ++k) {
      const Vector w = sample(rng);
      acc.selfadjointView<Eigen::Lower>().rankUpdate(w);
    }
    covariance_ = acc.selfadjointView<Eigen::Lower>();
    covariance_ /= kCovarianceDraws;
  }
}

DisturbanceModel DisturbanceModel::uniform_box(const Vector & half_widths, std::uint64_t seed)
{
  return DisturbanceModel(DisturbanceKind::uniform_box, sets::HPolytope::symmetric_box(half_widths), {}, seed);
}

Vector DisturbanceModel::uniform_in(RngStream & rng, double scale) const
{
  const Eigen::Index n = dim();
  Vector w(n);
  for (int attempt = 0; attempt < kRejectionCap; ++attempt) {
    for (Eigen::Index j = 0; j < n; ++j) {
      w(j) = scale * (lower_(j) + (upper_(j) - lower_(j)) * rng.uniform());
    }
    if (is_box_ || sets::contains(support_.scaled(scale), w)) { return w; }
  }
  throw Error("rejection_cap", "disturbance sampling exceeded the rejection cap");
}

Vector DisturbanceModel::gaussian_in(RngStream & rng) const
{
  std::normal_distribution<double> normal(0.0, params_.sigma);
  Vector w(dim());
  for (int attempt = 0; attempt < kRejectionCap; ++attempt) {
    for (Eigen::Index j = 0; j < w.size(); ++j) { w(j) = normal(rng); }
    if (sets::contains(support_, w)) { return w; }
  }
  throw Error("rejection_cap", "disturbance sampling exceeded the rejection cap");
}

Vector DisturbanceModel::sample(RngStream & rng) const
{
  Vector w;
  switch (kind_) {
    case DisturbanceKind::uniform_box:
      w = uniform_in(rng, 1.0);
      break;
    case DisturbanceKind::truncated_gaussian:
      w = gaussian_in(rng);
      break;
    case DisturbanceKind::mixture_with_core:
      w = rng.uniform() < params_.core_weight ? uniform_in(rng, params_.core_scale) : uniform_in(rng, 1.0);
      break;
  }
  if (!sets::contains(support_, w)) { throw Error("internal", "disturbance draw left its support"); }
  return w;
}

double tail_quantile(const std::vector<Vector> & draws, const Vector & direction, const Matrix & horizon_map,
                     double p)
{
  if (!(p > 0.0 && p <= 1.0)) { throw Error("domain", "tail_quantile: p must lie in (0, 1]"); }
  if (draws.empty()) { throw Error("domain", "tail_quantile: no samples"); }
  const Vector c = horizon_map.transpose() * direction;
  std::vector<double> v(draws.size());
  for (std::size_t i = 0; i < draws.size(); ++i) { v[i] = c.dot(draws[i]); }
  const double n = static_cast<double>(v.size());
  const auto idx = static_cast<std::size_t>(
      std::min(n, std::ceil(p * n) + std::ceil(std::sqrt(n * p * (1.0 - p)))));
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(idx - 1), v.end());
  return v[idx - 1];
}

double tail_quantile(const DisturbanceModel & model, const Vector & direction, const Matrix & horizon_map,
                     double p, int n_samples, std::uint64_t seed)
{
  if (n_samples < 1000) { throw Error("domain", "tail_quantile: at least 1000 samples required"); }
  if (horizon_map.cols() != model.dim() || horizon_map.rows() != direction.size()) {
    throw Error("dimension", "tail_quantile: map does not match direction and disturbance");
  }
  RngStream rng(seed, kQuantileStream);
  std::vector<Vector> draws;
  draws.reserve(static_cast<std::size_t>(n_samples));
  for (int k = 0; k < n_samples; ++k) { draws.push_back(model.sample(rng)); }
  return tail_quantile(draws, direction, horizon_map, p);
}

}  // namespace smpc::uncertainty
