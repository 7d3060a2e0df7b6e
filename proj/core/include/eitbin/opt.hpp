#pragma once

#include "eitbin/coarse.hpp"
#include "eitbin/fem.hpp"
#include "eitbin/field.hpp"
#include "eitbin/grad.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace eitbin {

/// Everything needed to score a conductivity against target data.
struct EitProblem {
    const Mesh* mesh = nullptr;
    const ElectrodeLayout* layout = nullptr;
    const ExcitationScheme* scheme = nullptr;
    const MeasurementSet* target = nullptr;
    /// Known ground truth, used only for error reporting.
    const ConductivityField* truth = nullptr;
};

class RunTrace {
public:
    struct Row {
        int iter = 0;
        std::string phase;
        std::optional<double> cost;
        long cost_evals = 0;
        std::optional<double> l2_error;
    };

    void add(Row row) { rows_.push_back(std::move(row)); }
    const std::vector<Row>& rows() const { return rows_; }

    /// Best cost seen after every single evaluation (index = evaluation - 1).
    std::vector<double>& best_history() { return best_history_; }
    const std::vector<double>& best_history() const { return best_history_; }

    /// Number of evaluations after which the best cost first drops to `level`
    /// or below; nullopt if never.
    std::optional<long> evaluations_to_reach(double level) const;

    /// CSV `iter,phase,cost,cost_evals,l2_error`; unknown values are left empty.
    void write_csv(std::ostream& out) const;

private:
    std::vector<Row> rows_;
    std::vector<double> best_history_;
};

/// Counts every (simulate + cost) pair and keeps the forward state of the
/// latest evaluation so its gradient can be formed without re-solving.
class CostEvaluator {
public:
    CostEvaluator(const EitProblem& problem, RunTrace* trace = nullptr);

    double evaluate(const ConductivityField& sigma);
    /// Adjoint-based spatial gradient at the most recently evaluated sigma.
    SpatialGradient gradient_at_last() const;

    long evaluations() const { return evaluations_; }
    long simulations() const { return simulations_; }
    std::optional<double> l2_error(const ConductivityField& sigma) const;
    /// sum of squared target entries; scales absolute cost floors.
    double target_energy() const { return target_energy_; }
    const EitProblem& problem() const { return problem_; }

private:
    EitProblem problem_;
    RunTrace* trace_;
    ForwardSolver solver_;
    ForwardResult last_forward_;
    ConductivityField last_sigma_;
    long evaluations_ = 0;
    long simulations_ = 0;
    double best_ = 0.0;
    double target_energy_ = 0.0;
};

/// |J_k - J_{k-1}| / J_k < tol, and true for J_k == 0.
bool relative_decrease_converged(double previous, double current, double tol);

/// Euclidean projection onto {w : w_i >= 0, sum w_i = 1}.
std::vector<double> project_simplex(std::span<const double> v);

struct FineBounds {
    double domain_radius = 0.1;
    double r_min = 1e-4;
    double r_max = 0.1;
    /// Box for centre coordinates, |x|, |y| <= center_limit.
    double center_limit = 0.2;
};

FineBounds default_fine_bounds(double domain_radius);

/// Step-2 control: geometry of the basis samples plus their blend weights.
struct FineControl {
    std::vector<SampleParam> basis;
    std::vector<double> alpha;
    FineBounds bounds;

    BlendControl blend_control() const { return {basis, alpha}; }
    std::size_t geometry_size() const;
    /// Flattened geometry, sample by sample, circle by circle, (x, y, r).
    std::vector<double> geometry() const;
    void set_geometry(std::span<const double> params);
    /// Clips radii and centres to the bounds and enforces |centre| < R + r.
    void project_geometry();
};

/// Writes basis triplets and weights: `alpha N_c x1 y1 r1 ...` per line.
void write_basis(std::ostream& out, const FineControl& control);

struct CollectionParams {
    int nc_max = 8;
    double r_max_fraction = 0.3;
    ConductivityPair levels;
    std::uint64_t seed = 1;
    int threads = 1;
};

/// Step 0: N random samples and their simulated measurement sets. Sample i is
/// drawn from its own named substream, so results do not depend on `threads`.
SampleCollection precompute_collection(const Mesh& mesh, const ElectrodeLayout& layout,
                                       const ExcitationScheme& scheme, int count, const CollectionParams& params);

struct Ranking {
    FineControl control;
    std::vector<std::size_t> order;  ///< sample indices of the basis, best first
    std::vector<double> costs;       ///< cost of each basis sample against the target
};

/// Step 1: the n_s samples with the smallest cost, ties by index; equal weights.
Ranking rank_and_select(const SampleCollection& collection, const MeasurementSet& target, int n_s,
                        double domain_radius);

enum class FineMethod { projected_gradient, coordinate_descent };

struct FineSettings {
    FineMethod method = FineMethod::projected_gradient;
    double tolerance = 1e-9;
    long max_cost_evals = 50000;
    double delta_p = 1e-3;
    /// Largest geometry move of the first trial step, as a fraction of R.
    double geometry_step = 0.05;
    /// Largest weight move of the first trial step.
    double weight_step = 0.5;
    int max_backtracks = 12;
    double armijo = 1e-4;
    /// Projected-gradient trial points are compared with the largest of the
    /// last this-many accepted costs; 1 makes the search monotone.
    int nonmonotone_window = 10;
    /// Stop once J <= cost_floor * sum(target^2) (round-off level).
    double cost_floor = 1e-20;
    /// Half-width of each coordinate-descent line search, as a fraction of R.
    double cd_geometry_window = 0.1;
    double cd_weight_tolerance = 1e-3;
    double cd_geometry_tolerance = 1e-3;  ///< fraction of R
};

struct StepOutcome {
    int iterations = 0;
    bool stalled = false;
    std::string stop_reason;
    double initial_cost = 0.0;
    double final_cost = 0.0;
};

struct FineResult {
    FineControl control;
    ConductivityField sigma;
    StepOutcome outcome;
};

/// Step 2 on an existing evaluator (its counter and trace keep accumulating).
FineResult optimize_fine(CostEvaluator& evaluator, ConductivityPair levels, const FineControl& initial,
                         const FineSettings& settings, RunTrace& trace);

struct CoarseSettings {
    double tolerance = 1e-9;
    long max_cost_evals = 50000;
    double delta_zeta = 0.0;  ///< 0: 1e-3 * (fine max - fine min)
    /// Largest move of the first trial step, as a fraction of the fine range.
    double step = 0.25;
    int max_backtracks = 12;
    double armijo = 1e-4;
    int nonmonotone_window = 10;
    double cost_floor = 1e-20;
};

struct CoarseResult {
    ConductivityField sigma;
    CoarseControl zeta;
    PartitionMap partition;
    StepOutcome outcome;
};

/// Initial coarse state for a fine field: thresholds at the mid value,
/// partition by the global rule, values by region means.
std::pair<CoarseControl, PartitionMap> initial_coarse_state(const Mesh& mesh, const ConductivityField& fine,
                                                           int n_max);

/// Step 3 on an existing evaluator.
CoarseResult optimize_coarse(CostEvaluator& evaluator, const ConductivityField& fine, int n_max,
                             const CoarseSettings& settings, RunTrace& trace);

}  // namespace eitbin
