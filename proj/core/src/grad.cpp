#include "eitbin/grad.hpp"

#include "eitbin/errors.hpp"
#include "eitbin/log.hpp"

#include <cmath>
#include <iomanip>
#include <ostream>

namespace eitbin {

SpatialGradient spatial_gradient(const Mesh& mesh, const ConductivityField& sigma,
                                 std::span<const PotentialField> forward, std::span<const PotentialField> adjoint) {
    if (forward.size() != adjoint.size() || forward.empty()) {
        throw DomainError("spatial_gradient: need one adjoint per forward solution");
    }
    if (sigma.size() != mesh.num_elements()) throw DomainError("spatial_gradient: sigma length mismatch");
    const auto grads = basis_gradients(mesh);
    SpatialGradient g{std::vector<double>(mesh.num_elements(), 0.0)};
    for (std::size_t k = 0; k < forward.size(); ++k) {
        const auto& u = forward[k].values;
        const auto& psi = adjoint[k].values;
        if (u.size() != mesh.num_vertices() || psi.size() != mesh.num_vertices()) {
            throw DomainError("spatial_gradient: potential length mismatch");
        }
        for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
            const auto& t = mesh.triangles[e];
            double ux = 0.0, uy = 0.0, px = 0.0, py = 0.0;
            for (int i = 0; i < 3; ++i) {
                ux += u[t[i]] * grads[e][i].x;
                uy += u[t[i]] * grads[e][i].y;
                px += psi[t[i]] * grads[e][i].x;
                py += psi[t[i]] * grads[e][i].y;
            }
            g.values[e] -= mesh.element_areas[e] * (px * ux + py * uy);
        }
    }
    return g;
}

std::vector<double> grad_alpha(std::span<const ConductivityField> sample_fields, const SpatialGradient& g) {
    std::vector<double> out;
    out.reserve(sample_fields.size());
    for (const auto& f : sample_fields) {
        if (f.size() != g.values.size()) throw DomainError("grad_alpha: field length mismatch");
        double sum = 0.0;
        for (std::size_t e = 0; e < f.size(); ++e) sum += f[e] * g.values[e];
        out.push_back(sum);
    }
    return out;
}

std::size_t geometry_parameter_count(const BlendControl& control) {
    std::size_t n = 0;
    for (const auto& s : control.basis) n += 3 * s.circles.size();
    return n;
}

std::vector<double> grad_P(const Mesh& mesh, const BlendControl& control, ConductivityPair levels,
                           const SpatialGradient& g, double delta_p) {
    if (!(delta_p > 0.0)) throw DomainError("grad_P: perturbation must be positive");
    if (control.basis.size() != control.weights.size()) throw DomainError("grad_P: basis/weights mismatch");
    if (g.values.size() != mesh.num_elements()) throw DomainError("grad_P: gradient length mismatch");
    std::vector<double> out;
    out.reserve(geometry_parameter_count(control));
    for (std::size_t i = 0; i < control.basis.size(); ++i) {
        const auto& sample = control.basis[i];
        const double alpha = control.weights[i];
        if (alpha == 0.0) {
            out.insert(out.end(), 3 * sample.circles.size(), 0.0);
            continue;
        }
        const auto base = rasterize_values(mesh, sample, levels.high, levels.low);
        SampleParam perturbed = sample;
        for (std::size_t j = 0; j < sample.circles.size(); ++j) {
            for (int p = 0; p < 3; ++p) {
                Circle& c = perturbed.circles[j];
                double& param = (p == 0) ? c.x : (p == 1) ? c.y : c.r;
                const double saved = param;
                param += delta_p;
                const auto shifted = rasterize_values(mesh, perturbed, levels.high, levels.low);
                param = saved;
                double sum = 0.0;
                for (std::size_t e = 0; e < base.size(); ++e) {
                    if (shifted[e] != base[e]) sum += (shifted[e] - base[e]) * g.values[e];
                }
                out.push_back(alpha * sum / delta_p);
            }
        }
    }
    return out;
}

std::vector<double> grad_zeta(const PartitionMap& partition, const SpatialGradient& g, const CoarseControl& zeta,
                              const CoarseBounds& bounds, double current_cost, const CoarseCostFn& cost_at,
                              const ZetaGradientOptions& options) {
    const int n_max = zeta.n_max();
    if (partition.n_max != n_max) throw DomainError("grad_zeta: partition/control n_max mismatch");
    if (partition.region_of_element.size() != g.values.size()) throw DomainError("grad_zeta: length mismatch");
    double delta = options.delta_zeta;
    if (delta == 0.0) delta = 1e-3 * (bounds.fine_max - bounds.fine_min);
    if (!(delta > 0.0)) throw DomainError("grad_zeta: threshold step must be positive");

    std::vector<double> out(zeta.size(), 0.0);
    std::vector<bool> empty(n_max + 1, true);
    for (std::size_t e = 0; e < g.values.size(); ++e) {
        out[partition.region_of_element[e]] += g.values[e];
        empty[partition.region_of_element[e]] = false;
    }

    const double upper = bounds.fine_max - bounds.margin;
    const double lower = bounds.fine_min + bounds.margin;
    for (int n = 1; n <= n_max; ++n) {
        CoarseControl trial = zeta;
        const double t = zeta.threshold(n);
        // An empty region can only appear by lowering its threshold.
        double step = empty[n] ? -delta : delta;
        if (t + step > upper || t + step < lower) {
            if (t - step >= lower && t - step <= upper) {
                step = -step;
            } else {
                step = std::max(upper - t, t - lower) * ((upper - t >= t - lower) ? 1.0 : -1.0);
            }
            log::warn("grad_zeta: threshold step clipped to stay admissible");
        }
        if (step == 0.0) continue;
        // Fine fields built from binary samples take few distinct values, so a
        // short step often moves no element across the threshold.
        for (int k = 0;; ++k) {
            trial.threshold(n) = t + step;
            const double c = cost_at(trial);
            if (c != current_cost || k >= options.max_growth) {
                out[n_max + n] = (c - current_cost) / step;
                break;
            }
            const double longer = 2.0 * step;
            if (t + longer > upper || t + longer < lower) {
                out[n_max + n] = 0.0;
                break;
            }
            step = longer;
        }
    }
    return out;
}

KappaReport kappa_test(const std::function<double(double)>& cost_along, std::span<const double> gradient,
                       std::span<const double> direction, std::span<const double> epsilons) {
    if (gradient.size() != direction.size()) throw DomainError("kappa_test: gradient/direction length mismatch");
    double directional = 0.0;
    bool nonzero = false;
    for (std::size_t i = 0; i < gradient.size(); ++i) {
        directional += gradient[i] * direction[i];
        nonzero = nonzero || direction[i] != 0.0;
    }
    if (!nonzero) throw DegenerateDirectionError("kappa_test: perturbation direction is zero");
    if (directional == 0.0) {
        throw DegenerateDirectionError("kappa_test: direction is orthogonal to the gradient (<grad, d> = 0)");
    }
    const double base = cost_along(0.0);
    KappaReport report;
    for (double eps : epsilons) {
        const double k = (cost_along(eps) - base) / (eps * directional);
        report.epsilons.push_back(eps);
        report.kappa.push_back(k);
        report.digits.push_back(std::log10(std::abs(k - 1.0)));
    }
    return report;
}

std::vector<double> default_kappa_epsilons() {
    std::vector<double> eps;
    for (int p = 0; p >= -12; --p) eps.push_back(std::pow(10.0, p));
    return eps;
}

std::pair<int, int> kappa_plateau(const KappaReport& report, double tol) {
    std::pair<int, int> best{-1, -1};
    int start = -1;
    for (int i = 0; i <= static_cast<int>(report.kappa.size()); ++i) {
        const bool ok = i < static_cast<int>(report.kappa.size()) && std::abs(report.kappa[i] - 1.0) < tol;
        if (ok && start < 0) start = i;
        if (!ok && start >= 0) {
            if (best.first < 0 || i - 1 - start > best.second - best.first) best = {start, i - 1};
            start = -1;
        }
    }
    return best;
}

void write_kappa_csv(std::ostream& out, const KappaReport& report) {
    out << "epsilon,kappa,log10_abs_kappa_minus_1\n" << std::setprecision(17);
    for (std::size_t i = 0; i < report.epsilons.size(); ++i) {
        out << report.epsilons[i] << ',' << report.kappa[i] << ',' << report.digits[i] << '\n';
    }
}

}  // namespace eitbin
