#pragma once

#include "eitbin/field.hpp"
#include "eitbin/geometry.hpp"
#include "eitbin/measurement.hpp"
#include "eitbin/rng.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <array>
#include <memory>
#include <span>
#include <vector>

namespace eitbin {

/// Nodal values of a P1 potential (forward u or adjoint psi).
struct PotentialField {
    std::vector<double> values;
};

/// Cyclic shift: result[l] = U[(l + shift) mod m]. shift = 0 is the identity.
std::vector<double> rotate_pattern(std::span<const double> pattern, int shift);

/// Base voltage pattern plus its m cyclic rotations.
class ExcitationScheme {
public:
    ExcitationScheme() = default;
    /// Throws DomainError unless the pattern sums to zero (to 1e-12 relative).
    explicit ExcitationScheme(std::vector<double> base_pattern);

    int size() const { return static_cast<int>(base_.size()); }
    const std::vector<double>& base_pattern() const { return base_; }
    /// Pattern k (0-based), i.e. the base shifted by k.
    std::vector<double> pattern(int k) const { return rotate_pattern(base_, k); }

private:
    std::vector<double> base_;
};

/// The 16-electrode voltage pattern used throughout the reference experiments.
std::vector<double> default_voltage_pattern();

/// Gradients of the three P1 basis functions on every triangle.
std::vector<std::array<Point, 3>> basis_gradients(const Mesh& mesh);

/// Complete-electrode-model operator for one mesh and electrode layout.
///
/// The weak form is
///   int sigma grad(u).grad(v) + sum_l (1/Z_l) int_{E_l} u v ds = sum_l (U_l/Z_l) int_{E_l} v ds,
/// with P1 potentials and P0 conductivity. The sparsity pattern and ordering
/// are computed once; `set_conductivity` refactorizes for a new sigma and the
/// factorization is then shared by every right-hand side (forward and adjoint).
class ForwardSolver {
public:
    ForwardSolver(const Mesh& mesh, const ElectrodeLayout& layout);

    ForwardSolver(const ForwardSolver&) = delete;
    ForwardSolver& operator=(const ForwardSolver&) = delete;

    /// Assembles and factorizes. Throws DomainError for non-positive sigma and
    /// SolverError when the factorization fails.
    void set_conductivity(const ConductivityField& sigma);

    PotentialField solve_forward(std::span<const double> voltages) const;

    /// Currents I_l = int_{E_l} (U_l - u) / Z_l ds.
    std::vector<double> electrode_currents(const PotentialField& u, std::span<const double> voltages) const;

    /// Discrete adjoint with residual weights g_l = -2 (I_l(u) - I*_l), solved
    /// with the same (symmetric) operator as the forward problem.
    PotentialField solve_adjoint(const PotentialField& u, std::span<const double> voltages,
                                 std::span<const double> target_currents) const;

    /// Solves with an electrode-distributed right-hand side
    /// rhs_v = sum_l (g_l / Z_l) int_{E_l} v ds.
    PotentialField solve_electrode_rhs(std::span<const double> weights) const;

    const Eigen::SparseMatrix<double>& matrix() const { return matrix_; }
    const Mesh& mesh() const { return *mesh_; }
    const ElectrodeLayout& layout() const { return *layout_; }
    const std::vector<std::array<Point, 3>>& gradients() const { return grads_; }

    /// Relative residual threshold accepted from the factorized solve.
    static constexpr double kResidualTolerance = 1e-10;

private:
    PotentialField solve_rhs(const Eigen::VectorXd& rhs) const;
    double electrode_integral(int l, const std::vector<double>& u) const;

    const Mesh* mesh_;
    const ElectrodeLayout* layout_;
    std::vector<std::array<Point, 3>> grads_;
    Eigen::SparseMatrix<double> matrix_;
    std::vector<double> boundary_values_;                   // electrode terms, in matrix value order
    std::vector<std::array<int, 9>> element_slots_;         // element-local (i,j) -> value index
    std::vector<std::array<double, 9>> unit_stiffness_;     // area * grad(phi_i).grad(phi_j)
    std::vector<double> electrode_length_;
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> factor_;
    bool analyzed_ = false;
    bool factorized_ = false;
};

/// One-shot helper: assemble, factorize and solve a single pattern.
PotentialField assemble_and_solve_forward(const Mesh& mesh, const ElectrodeLayout& layout,
                                          const ConductivityField& sigma, std::span<const double> voltages);

std::vector<double> electrode_currents(const Mesh& mesh, const ElectrodeLayout& layout, const PotentialField& u,
                                       std::span<const double> voltages);

struct ForwardResult {
    MeasurementSet currents;
    std::vector<PotentialField> potentials;  // one per rotated pattern
};

/// m forward solves on an already-factorized solver; row k holds currents
/// under pattern k.
ForwardResult simulate(const ForwardSolver& solver, const ExcitationScheme& scheme);

MeasurementSet simulate_measurements(const Mesh& mesh, const ElectrodeLayout& layout, const ConductivityField& sigma,
                                     const ExcitationScheme& scheme);

/// Sum of squared differences over all m*m entries.
double cost(const MeasurementSet& simulated, const MeasurementSet& target);

/// Adjoint solves for every pattern given the forward potentials.
std::vector<PotentialField> solve_adjoints(const ForwardSolver& solver, const ExcitationScheme& scheme,
                                           const ForwardResult& forward, const MeasurementSet& target);

/// entry *= 1 + level * xi, xi standard normal, independent per entry.
MeasurementSet add_noise(const MeasurementSet& data, double level, Rng& rng);

}  // namespace eitbin
