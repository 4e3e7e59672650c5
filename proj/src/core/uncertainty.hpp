#ifndef SMPC_CORE_UNCERTAINTY_HPP_
#define SMPC_CORE_UNCERTAINTY_HPP_

#include <cstdint>
#include <string>

#include "linalg.hpp"
#include "random.hpp"
#include "sets.hpp"

namespace smpc::uncertainty {

enum class DisturbanceKind { uniform_box, truncated_gaussian, mixture_with_core };

/// "uniform-on-box", "truncated-gaussian", "mixture-with-core".
const char * to_string(DisturbanceKind kind);
DisturbanceKind kind_from_string(const std::string & name);

struct DisturbanceParams
{
  double sigma = 0.0;        ///< truncated-gaussian: per-axis standard deviation
  double core_weight = 0.0;  ///< mixture: probability of the core component
  double core_scale = 0.0;   ///< mixture: core is core_scale * support, in (0, 1)
};

/// Number of draws behind the pinned covariance estimate of non-uniform kinds.
inline constexpr int kCovarianceDraws = 1000000;
/// Rejection attempts allowed per draw.
inline constexpr int kRejectionCap = 10000;

/**
 * Bounded, zero-mean i.i.d. disturbance. The support must be bounded,
 * symmetric about the origin (so the mean is zero) and contain the origin
 * in its interior; every kind has a density that is positive around 0.
 *
 * - uniform_box: uniform on the support (rejection from its bounding box).
 * - truncated_gaussian: N(0, sigma^2 I) conditioned on the support.
 * - mixture_with_core: with probability core_weight uniform on
 *   core_scale * support, otherwise uniform on the support.
 */
class DisturbanceModel
{
public:
  DisturbanceModel(DisturbanceKind kind, sets::HPolytope support, DisturbanceParams params = {},
                   std::uint64_t seed = 0);

  static DisturbanceModel uniform_box(const Vector & half_widths, std::uint64_t seed = 0);

  DisturbanceKind kind() const { return kind_; }
  const sets::HPolytope & support() const { return support_; }
  const DisturbanceParams & params() const { return params_; }
  std::uint64_t seed() const { return seed_; }
  Eigen::Index dim() const { return support_.dim(); }
  const Matrix & covariance() const { return covariance_; }
  const Vector & bounding_lower() const { return lower_; }
  const Vector & bounding_upper() const { return upper_; }

  /// One draw; throws Error("rejection_cap") past kRejectionCap attempts and
  /// Error("internal") if a draw ever leaves the support.
  Vector sample(RngStream & rng) const;

private:
  Vector uniform_in(RngStream & rng, double scale) const;
  Vector gaussian_in(RngStream & rng) const;

  DisturbanceKind kind_;
  sets::HPolytope support_;
  DisturbanceParams params_;
  std::uint64_t seed_;
  Vector lower_;
  Vector upper_;
  bool is_box_ = false;
  Matrix covariance_;
};

/**
 * Conservative empirical p-quantile of direction' * horizon_map * w: the
 * order statistic at ceil(p n) + ceil(sqrt(n p (1 - p))), clipped to the
 * largest sample. Deterministic in seed.
 */
double tail_quantile(const DisturbanceModel & model, const Vector & direction, const Matrix & horizon_map,
                     double p, int n_samples, std::uint64_t seed);

/// Same order statistic for a precomputed set of disturbance draws.
double tail_quantile(const std::vector<Vector> & draws, const Vector & direction, const Matrix & horizon_map,
                     double p);

}  // namespace smpc::uncertainty

#endif  // SMPC_CORE_UNCERTAINTY_HPP_
