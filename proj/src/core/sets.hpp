#ifndef SMPC_CORE_SETS_HPP_
#define SMPC_CORE_SETS_HPP_

#include <functional>
#include <optional>
#include <vector>

#include "linalg.hpp"

namespace smpc::sets {

/// Membership slack used by contains(): H x <= h + kMembershipTol.
inline constexpr double kMembershipTol = 1e-9;

/**
 * @brief Inequality-represented polyhedron {x : H x <= h}.
 *
 * Rows of H must be nonzero. Offsets may be negative, so an empty set is a
 * representable value (see is_empty()).
 */
class HPolytope
{
public:
  HPolytope() = default;
  HPolytope(Matrix H, Vector h);

  static HPolytope box(const Vector & lower, const Vector & upper);
  static HPolytope symmetric_box(const Vector & half_widths);

  const Matrix & H() const { return H_; }
  const Vector & h() const { return h_; }
  Eigen::Index dim() const { return H_.cols(); }
  Eigen::Index rows() const { return H_.rows(); }

  /// Axis-aligned box bounds, when every row is a signed coordinate vector
  /// and every coordinate is bounded on both sides.
  struct Box
  {
    Vector lower;
    Vector upper;
  };
  const std::optional<Box> & as_box() const { return box_; }

  /// {alpha x : x in P} for alpha > 0.
  HPolytope scaled(double alpha) const;
  /// {T x : x in P} for square invertible T.
  HPolytope linear_image(const Matrix & T) const;
  /// Rows rescaled to unit Euclidean norm; offsets scaled alike.
  HPolytope normalized() const;

private:
  void detect_box();

  Matrix H_;
  Vector h_;
  std::optional<Box> box_;
};

struct SupportPoint
{
  double value = 0.0;
  Vector point;        ///< a maximiser
  Vector multipliers;  ///< z >= 0 with H'z = dir and h'z = value
};

/// max over P of dir'x. Throws Error("unbounded") / Error("empty_set").
SupportPoint support_point(const HPolytope & P, const Vector & dir);
double support(const HPolytope & P, const Vector & dir);

bool contains(const HPolytope & P, const Vector & x);
bool is_empty(const HPolytope & P);
bool is_bounded(const HPolytope & P);
/// True iff 0 is strictly inside (all offsets positive).
bool contains_origin_in_interior(const HPolytope & P);

/// P minus S (Pontryagin): {x : x + s in P for all s in S}; may be empty.
HPolytope pontryagin_diff(const HPolytope & P, const HPolytope & S);
HPolytope pontryagin_diff(const HPolytope & P, const std::function<double(const Vector &)> & support_s);

/// Removes rows implied by the others (within 1e-9) and duplicate normals.
HPolytope remove_redundant(const HPolytope & P);

/// LP test: x = sum_{k<s} A^k D w_k for some w_k in W.
bool member_truncated_sum(const Vector & x, const Matrix & A, const Matrix & D, const HPolytope & W, int s);

/**
 * Outer approximation scale * (sum_{k<s} A^k D W) of the minimal robust
 * invariant set of x+ = A x + D w. Support queries are exact; membership is
 * exact too (interval/polygon facets in 1-D/2-D, LP otherwise).
 */
class TruncatedReachSet
{
public:
  TruncatedReachSet(std::vector<Matrix> terms, HPolytope base, double alpha, double epsilon);

  const std::vector<Matrix> & terms() const { return terms_; }
  const HPolytope & base() const { return base_; }
  double alpha() const { return alpha_; }
  double scale() const { return 1.0 / (1.0 - alpha_); }
  double epsilon() const { return epsilon_; }
  int truncation() const { return static_cast<int>(terms_.size()); }
  Eigen::Index dim() const { return dim_; }

  double support(const Vector & dir) const;
  Vector support_argmax(const Vector & dir) const;
  bool contains(const Vector & x) const;
  /// Largest Euclidean norm over the set (exact in 1-D/2-D, box bound otherwise).
  double circumradius() const;

  /// Facet halfspaces d'x <= e (1-D/2-D only; empty otherwise).
  const Matrix & facet_normals() const { return facet_normals_; }
  const Vector & facet_offsets() const { return facet_offsets_; }

private:
  void build_facets();

  std::vector<Matrix> terms_;
  HPolytope base_;
  double alpha_;
  double epsilon_;
  Eigen::Index dim_;
  Matrix facet_normals_;
  Vector facet_offsets_;
  std::vector<Vector> vertices_;
};

/// Contraction factor alpha(s) = min{a : A^s D W subset of a D W}.
double mrpi_alpha(const Matrix & A, const Matrix & D, const HPolytope & W, int s);

/// The s-term truncation scaled by 1/(1 - alpha(s)).
TruncatedReachSet mrpi_truncation(const Matrix & A, const Matrix & D, const HPolytope & W, int s,
                                  double epsilon = 0.0);

/**
 * Smallest s with alpha(s) <= eps / (eps + M(s)), M(s) the coordinate
 * radius of the s-term sum; the result contains the minimal invariant set and
 * lies within eps (per coordinate) of it. Requires Schur A, invertible (or
 * zero) D and 0 in the interior of W. Throws Error("slow_contraction")
 * beyond s = 200.
 */
TruncatedReachSet mrpi_outer(const Matrix & A, const Matrix & D, const HPolytope & W, double eps);

/**
 * Maximal robust positively invariant subset of Xc for x+ = Acl x + D w by
 * the fixed-point iteration Omega <- Xc cap Pre(Omega). Throws
 * Error("no_terminal_set") when the iteration empties the set and
 * Error("max_iter") past 500 iterations.
 */
HPolytope max_rpi(const Matrix & Acl, const Matrix & D, const HPolytope & W, const HPolytope & Xc);

/// max_i [h_Omega(Acl' H_i) + h_W(D' H_i) - h_i]; <= 0 means robustly invariant.
double robust_invariance_margin(const HPolytope & Omega, const Matrix & Acl, const Matrix & D,
                                const HPolytope & W);

}  // namespace smpc::sets

#endif  // SMPC_CORE_SETS_HPP_
