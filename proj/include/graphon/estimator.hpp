#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "graphon/model.hpp"
#include "graphon/spectral.hpp"

namespace graphon::svt {

using spectral::SvdTriple;

/// Hard-thresholding estimate: the singular triples of the input matrix with
/// sigma_i >= lambda (ties retained).
struct SvtEstimate {
  std::vector<SvdTriple> triples;
  double lambda = 0.0;
  Index n = 0;          // input matrix is n x n
  double rho_used = 0.0;

  Index rank() const { return static_cast<Index>(triples.size()); }
  Mat reconstruction() const;
  /// (reconstruction + reconstruction^T) / 2; rank at most 2 * rank().
  Mat symmetrized() const;

  std::string to_json() const;
  static SvtEstimate from_json(const std::string& text);
};

/// Right-hand side of the operator-norm error bound: lambda + w_delta with
/// w_delta = 4 sqrt(n rho) + sqrt(c log(n/delta)). The universal constant of
/// the underlying concentration inequality is not numerically specified, so
/// it is exposed as the knob c_universal.
struct BoundReport {
  double w_delta = 0.0;
  double theoretical_error_bound = 0.0;
  double observed_error = -1.0;  // < 0 when not measured
  double delta = 0.0;
  double c_universal = 1.0;
};

/// Singular value thresholding at level lambda. Discovers the retained rank
/// adaptively: requests 8 triples, doubles until some retained sigma drops
/// below lambda or the full spectrum is reached. Deterministic given
/// (matrix, lambda, seed).
SvtEstimate svt(const spectral::LinearOp& a, double lambda,
                std::uint64_t seed = 0, double rho_used = 1.0);

/// Theory threshold 6 sqrt(n rho). Experiments override with 2 sqrt(n rho),
/// which keeps the retained rank non-trivial at moderate n.
double default_lambda(Index n, double rho);

/// Missing-links variant: thresholds (1/p) A_tilde at lambda / p, so the
/// returned estimate targets Q rather than p Q.
SvtEstimate svt_missing_links(const spectral::LinearOp& a_tilde, double p,
                              double lambda, std::uint64_t seed = 0,
                              double rho_used = 1.0);

/// Empirical graphon of the reconstruction of svt(A, lambda). Values are not
/// clipped to [0,1]; clip_entries opts into the entrywise clamp (which can
/// raise the rank).
StepGraphon estimate_graphon(const SampledNetwork& network, double lambda,
                             std::uint64_t seed = 0,
                             bool clip_entries = false);

BoundReport bound_report(Index n, double rho, double delta, double lambda,
                         double c_universal = 1.0);

}  // namespace graphon::svt
