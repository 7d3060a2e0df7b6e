#pragma once

#include "eitbin/config.hpp"
#include "eitbin/opt.hpp"

#include <memory>
#include <optional>
#include <string>

namespace eitbin {

/// Mesh, electrodes, excitation, target data and (when known) the truth for
/// one configuration. Heap-held so pointers inside EitProblem stay valid.
struct ProblemSetup {
    Mesh mesh;
    ElectrodeLayout layout;
    ExcitationScheme scheme;
    MeasurementSet target;
    std::optional<ConductivityField> truth;

    EitProblem problem() const;
};

/// Builds the problem. Synthetic targets get multiplicative noise from the
/// "noise" substream of `config.seed`; measurement files are used as given.
std::unique_ptr<ProblemSetup> build_problem(const RunConfig& config);

/// Step 0: loads the configured collection, or generates it.
SampleCollection obtain_collection(const RunConfig& config, const ProblemSetup& setup, int threads,
                                   bool* generated = nullptr);

FineSettings fine_settings(const RunConfig& config);
CoarseSettings coarse_settings(const RunConfig& config);

struct PipelineResult {
    std::unique_ptr<ProblemSetup> setup;
    bool collection_generated = false;
    Ranking ranking;
    ConductivityField step1;
    double step1_cost = 0.0;
    FineResult fine;
    CoarseResult coarse;
    RunTrace trace;
    long cost_evals = 0;
};

struct PipelineOptions {
    int threads = 1;
    bool write_artifacts = true;
};

/// Steps 0-3. Solver failures are re-thrown as SolverError prefixed with the
/// step name. Artifacts go to `config.output_dir`:
/// mesh.txt, measurements.csv, sigma_true.txt (when known), sigma_step1.txt,
/// sigma_fine.txt, sigma_binary.txt, partition.txt, trace.csv, zeta.txt,
/// basis.txt, config.txt, summary.txt and, when generated, the collection.
PipelineResult run_pipeline(const RunConfig& config, const PipelineOptions& options = {});

}  // namespace eitbin
