#pragma once

#include "eitbin/coarse.hpp"
#include "eitbin/fem.hpp"
#include "eitbin/field.hpp"

#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

namespace eitbin {

/// Element-integrated cost gradient with respect to sigma:
/// values[e] = area_e * (-sum_k grad(psi_k) . grad(u_k)) on element e.
///
/// The area weight lives inside the values, so every chain-rule contraction
/// below is a plain dot product over elements.
struct SpatialGradient {
    std::vector<double> values;
};

SpatialGradient spatial_gradient(const Mesh& mesh, const ConductivityField& sigma,
                                 std::span<const PotentialField> forward, std::span<const PotentialField> adjoint);

/// (grad_alpha J)_i = sum_e sample_i[e] * g[e].
std::vector<double> grad_alpha(std::span<const ConductivityField> sample_fields, const SpatialGradient& g);

/// Forward-difference geometry gradient. Parameters are ordered sample by
/// sample, circle by circle, as (x, y, r). Only the owning sample is
/// re-rendered; the cost is never re-evaluated.
std::vector<double> grad_P(const Mesh& mesh, const BlendControl& control, ConductivityPair levels,
                           const SpatialGradient& g, double delta_p);

/// Number of scalar geometry parameters of a blend control (3 per circle).
std::size_t geometry_parameter_count(const BlendControl& control);

/// Cost of the coarse field for a trial control (re-partitions internally).
using CoarseCostFn = std::function<double(const CoarseControl&)>;

struct ZetaGradientOptions {
    double delta_zeta = 0.0;  ///< threshold FD step; 0 means 1e-3 * (fine max - fine min)
    /// While a threshold step leaves the cost unchanged it is doubled, at most
    /// this many times (one evaluation each).
    int max_growth = 8;
};

/// Value components by indicator summation of g over each coarse set;
/// threshold components by one-sided differences of the full cost (at least
/// one extra evaluation per region). The step goes upward, or downward for a
/// region that is currently empty.
std::vector<double> grad_zeta(const PartitionMap& partition, const SpatialGradient& g, const CoarseControl& zeta,
                              const CoarseBounds& bounds, double current_cost, const CoarseCostFn& cost_at,
                              const ZetaGradientOptions& options = {});

struct KappaReport {
    std::vector<double> epsilons;
    std::vector<double> kappa;
    std::vector<double> digits;  ///< log10 |kappa - 1|
};

/// kappa(eps) = [J(x + eps d) - J(x)] / (eps <gradient, d>).
/// `cost_along(eps)` must return J(x + eps d); it is called once at eps = 0.
/// Throws DegenerateDirectionError when <gradient, d> == 0.
KappaReport kappa_test(const std::function<double(double)>& cost_along, std::span<const double> gradient,
                       std::span<const double> direction, std::span<const double> epsilons);

/// 10^0, 10^-1, ..., 10^-12.
std::vector<double> default_kappa_epsilons();

/// Longest run of consecutive entries with |kappa - 1| < tol, returned as
/// [first index, last index]; {-1, -1} when no entry qualifies.
std::pair<int, int> kappa_plateau(const KappaReport& report, double tol);

/// CSV table `epsilon,kappa,log10_abs_kappa_minus_1`.
void write_kappa_csv(std::ostream& out, const KappaReport& report);

}  // namespace eitbin
