#include "eitbin/fem.hpp"

#include "eitbin/errors.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace eitbin {

std::vector<double> rotate_pattern(std::span<const double> pattern, int shift) {
    const int m = static_cast<int>(pattern.size());
    std::vector<double> out(m);
    if (m == 0) return out;
    const int s = ((shift % m) + m) % m;
    for (int l = 0; l < m; ++l) out[l] = pattern[(l + s) % m];
    return out;
}

ExcitationScheme::ExcitationScheme(std::vector<double> base_pattern) : base_(std::move(base_pattern)) {
    if (base_.size() < 2) throw DomainError("excitation pattern needs at least two electrodes");
    double sum = 0.0, scale = 0.0;
    for (double v : base_) {
        sum += v;
        scale = std::max(scale, std::abs(v));
    }
    if (std::abs(sum) > 1e-12 * std::max(scale, 1.0)) {
        throw DomainError("excitation pattern violates the ground condition (sum != 0)");
    }
}

std::vector<double> default_voltage_pattern() {
    return {-3, +1, +2, -5, +4, -1, -3, +2, +4, +3, -3, +3, +2, -4, +1, -3};
}

std::vector<std::array<Point, 3>> basis_gradients(const Mesh& mesh) {
    std::vector<std::array<Point, 3>> grads(mesh.num_elements());
    for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
        const auto& t = mesh.triangles[e];
        const Point p0 = mesh.vertices[t[0]], p1 = mesh.vertices[t[1]], p2 = mesh.vertices[t[2]];
        const double twice_area = 2.0 * mesh.element_areas[e];
        // grad(phi_i) = perp(opposite edge) / (2 * area)
        grads[e][0] = {(p1.y - p2.y) / twice_area, (p2.x - p1.x) / twice_area};
        grads[e][1] = {(p2.y - p0.y) / twice_area, (p0.x - p2.x) / twice_area};
        grads[e][2] = {(p0.y - p1.y) / twice_area, (p1.x - p0.x) / twice_area};
    }
    return grads;
}

ForwardSolver::ForwardSolver(const Mesh& mesh, const ElectrodeLayout& layout)
    : mesh_(&mesh), layout_(&layout), grads_(basis_gradients(mesh)) {
    const int n = static_cast<int>(mesh.num_vertices());
    std::vector<Eigen::Triplet<double>> pattern;
    pattern.reserve(mesh.num_elements() * 9 + mesh.boundary_edges.size() * 4);
    for (const auto& t : mesh.triangles) {
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) pattern.emplace_back(t[i], t[j], 1.0);
    }
    for (const auto& edges : layout.electrode_edges) {
        for (int e : edges) {
            const auto& be = mesh.boundary_edges[e];
            for (int a : {be.a, be.b})
                for (int b : {be.a, be.b}) pattern.emplace_back(a, b, 1.0);
        }
    }
    matrix_.resize(n, n);
    matrix_.setFromTriplets(pattern.begin(), pattern.end());
    matrix_.makeCompressed();

    auto slot = [&](int row, int col) {
        const int* inner = matrix_.innerIndexPtr();
        const int begin = matrix_.outerIndexPtr()[col];
        const int end = matrix_.outerIndexPtr()[col + 1];
        const int* it = std::lower_bound(inner + begin, inner + end, row);
        return static_cast<int>(it - inner);
    };

    element_slots_.resize(mesh.num_elements());
    unit_stiffness_.resize(mesh.num_elements());
    for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
        const auto& t = mesh.triangles[e];
        for (int i = 0; i < 3; ++i) {
            for (int j = 0; j < 3; ++j) {
                element_slots_[e][3 * i + j] = slot(t[i], t[j]);
                const Point gi = grads_[e][i], gj = grads_[e][j];
                unit_stiffness_[e][3 * i + j] = mesh.element_areas[e] * (gi.x * gj.x + gi.y * gj.y);
            }
        }
    }

    boundary_values_.assign(matrix_.nonZeros(), 0.0);
    electrode_length_.assign(layout.m, 0.0);
    for (int l = 0; l < layout.m; ++l) {
        const double z = layout.contact_impedance[l];
        for (int e : layout.electrode_edges[l]) {
            const auto& be = mesh.boundary_edges[e];
            const double c = be.length / (6.0 * z);
            boundary_values_[slot(be.a, be.a)] += 2.0 * c;
            boundary_values_[slot(be.b, be.b)] += 2.0 * c;
            boundary_values_[slot(be.a, be.b)] += c;
            boundary_values_[slot(be.b, be.a)] += c;
            electrode_length_[l] += be.length;
        }
    }
}

void ForwardSolver::set_conductivity(const ConductivityField& sigma) {
    if (sigma.size() != mesh_->num_elements()) throw DomainError("conductivity length does not match the mesh");
    double* values = matrix_.valuePtr();
    std::copy(boundary_values_.begin(), boundary_values_.end(), values);
    for (std::size_t e = 0; e < sigma.size(); ++e) {
        const double s = sigma[e];
        if (!(s > 0.0) || !std::isfinite(s)) throw DomainError("conductivity must be positive");
        const auto& slots = element_slots_[e];
        const auto& k = unit_stiffness_[e];
        for (int q = 0; q < 9; ++q) values[slots[q]] += s * k[q];
    }
    if (!analyzed_) {
        factor_.analyzePattern(matrix_);
        analyzed_ = true;
    }
    factor_.factorize(matrix_);
    factorized_ = false;
    if (factor_.info() != Eigen::Success) throw SolverError("LDL^T factorization failed");
    const Eigen::VectorXd d = factor_.vectorD();
    const double dmin = d.minCoeff();
    const double dmax = d.maxCoeff();
    if (!(dmin > 0.0) || dmax / dmin > 1e14) {
        std::ostringstream msg;
        msg << "system matrix is singular or ill-conditioned (pivot ratio " << dmax / dmin << ")";
        throw SolverError(msg.str());
    }
    factorized_ = true;
}

PotentialField ForwardSolver::solve_rhs(const Eigen::VectorXd& rhs) const {
    if (!factorized_) throw SolverError("solve requested before set_conductivity");
    const double bnorm = rhs.norm();
    PotentialField out;
    if (bnorm == 0.0) {
        out.values.assign(rhs.size(), 0.0);
        return out;
    }
    Eigen::VectorXd x = factor_.solve(rhs);
    Eigen::VectorXd r = rhs - matrix_ * x;
    double rel = r.norm() / bnorm;
    if (!(rel <= kResidualTolerance)) {
        x += factor_.solve(r);  // one step of iterative refinement
        r = rhs - matrix_ * x;
        rel = r.norm() / bnorm;
    }
    if (!(rel <= kResidualTolerance)) {
        std::ostringstream msg;
        msg << "linear solve residual " << rel << " exceeds " << kResidualTolerance;
        throw SolverError(msg.str());
    }
    out.values.assign(x.data(), x.data() + x.size());
    return out;
}

PotentialField ForwardSolver::solve_electrode_rhs(std::span<const double> weights) const {
    if (static_cast<int>(weights.size()) != layout_->m) throw DomainError("electrode weight count mismatch");
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(mesh_->num_vertices()));
    for (int l = 0; l < layout_->m; ++l) {
        const double g = weights[l] / layout_->contact_impedance[l];
        if (g == 0.0) continue;
        for (int e : layout_->electrode_edges[l]) {
            const auto& be = mesh_->boundary_edges[e];
            rhs[be.a] += 0.5 * be.length * g;
            rhs[be.b] += 0.5 * be.length * g;
        }
    }
    return solve_rhs(rhs);
}

PotentialField ForwardSolver::solve_forward(std::span<const double> voltages) const {
    return solve_electrode_rhs(voltages);
}

double ForwardSolver::electrode_integral(int l, const std::vector<double>& u) const {
    return electrode_boundary_integral(*mesh_, *layout_, l, u);
}

std::vector<double> ForwardSolver::electrode_currents(const PotentialField& u, std::span<const double> voltages) const {
    if (static_cast<int>(voltages.size()) != layout_->m) throw DomainError("voltage count mismatch");
    std::vector<double> currents(layout_->m);
    for (int l = 0; l < layout_->m; ++l) {
        currents[l] = (voltages[l] * electrode_length_[l] - electrode_integral(l, u.values)) /
                      layout_->contact_impedance[l];
    }
    return currents;
}

PotentialField ForwardSolver::solve_adjoint(const PotentialField& u, std::span<const double> voltages,
                                            std::span<const double> target_currents) const {
    if (static_cast<int>(target_currents.size()) != layout_->m) throw DomainError("target current count mismatch");
    const auto currents = electrode_currents(u, voltages);
    std::vector<double> g(layout_->m);
    for (int l = 0; l < layout_->m; ++l) g[l] = -2.0 * (currents[l] - target_currents[l]);
    return solve_electrode_rhs(g);
}

PotentialField assemble_and_solve_forward(const Mesh& mesh, const ElectrodeLayout& layout,
                                          const ConductivityField& sigma, std::span<const double> voltages) {
    ForwardSolver solver(mesh, layout);
    solver.set_conductivity(sigma);
    return solver.solve_forward(voltages);
}

std::vector<double> electrode_currents(const Mesh& mesh, const ElectrodeLayout& layout, const PotentialField& u,
                                       std::span<const double> voltages) {
    if (static_cast<int>(voltages.size()) != layout.m) throw DomainError("voltage count mismatch");
    std::vector<double> currents(layout.m);
    for (int l = 0; l < layout.m; ++l) {
        const double length = layout.electrode_length(mesh, l);
        currents[l] =
            (voltages[l] * length - electrode_boundary_integral(mesh, layout, l, u.values)) / layout.contact_impedance[l];
    }
    return currents;
}

ForwardResult simulate(const ForwardSolver& solver, const ExcitationScheme& scheme) {
    const int m = scheme.size();
    if (m != solver.layout().m) throw DomainError("excitation size does not match electrode count");
    ForwardResult result{MeasurementSet(m), {}};
    result.potentials.reserve(m);
    for (int k = 0; k < m; ++k) {
        const auto pattern = scheme.pattern(k);
        auto u = solver.solve_forward(pattern);
        const auto currents = solver.electrode_currents(u, pattern);
        for (int l = 0; l < m; ++l) result.currents(k, l) = currents[l];
        result.potentials.push_back(std::move(u));
    }
    return result;
}

MeasurementSet simulate_measurements(const Mesh& mesh, const ElectrodeLayout& layout, const ConductivityField& sigma,
                                     const ExcitationScheme& scheme) {
    ForwardSolver solver(mesh, layout);
    solver.set_conductivity(sigma);
    return simulate(solver, scheme).currents;
}

double cost(const MeasurementSet& simulated, const MeasurementSet& target) {
    if (simulated.size() != target.size()) throw DomainError("cost: measurement shapes differ");
    const auto& a = simulated.values();
    const auto& b = target.values();
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        sum += d * d;
    }
    return sum;
}

std::vector<PotentialField> solve_adjoints(const ForwardSolver& solver, const ExcitationScheme& scheme,
                                           const ForwardResult& forward, const MeasurementSet& target) {
    const int m = scheme.size();
    if (target.size() != m) throw DomainError("target measurement shape mismatch");
    std::vector<PotentialField> adjoints;
    adjoints.reserve(m);
    std::vector<double> g(m);
    for (int k = 0; k < m; ++k) {
        for (int l = 0; l < m; ++l) g[l] = -2.0 * (forward.currents(k, l) - target(k, l));
        adjoints.push_back(solver.solve_electrode_rhs(g));
    }
    return adjoints;
}

MeasurementSet add_noise(const MeasurementSet& data, double level, Rng& rng) {
    if (!(level >= 0.0)) throw DomainError("noise level must be non-negative");
    MeasurementSet out = data;
    if (level == 0.0) return out;
    std::normal_distribution<double> normal(0.0, 1.0);
    for (double& v : out.values()) v *= 1.0 + level * normal(rng);
    return out;
}

}  // namespace eitbin
