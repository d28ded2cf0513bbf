#pragma once

#include "gsm/loss.hpp"
#include "gsm/model_selection.hpp"
#include "gsm/sampling.hpp"
#include "gsm/solver.hpp"

#include <functional>
#include <optional>

namespace gsm {

struct RocPoint {
    double fpr;
    double tpr;
};

struct RocCurve {
    std::vector<RocPoint> points;  // fpr nondecreasing, (0,0) first and (1,1) last
};

struct Confusion {
    double tpr;
    double fpr;
};

/// FPR = |S_hat \ S0| / (m(m-1) - |S0|), TPR = |S_hat & S0| / |S0| over
/// ordered off-diagonal pairs. Inputs may hold ordered or unordered pairs.
Confusion confusion(const EdgeSet& est, const EdgeSet& truth, Index m);

/// Accepts any pair encoding and returns unordered off-diagonal pairs.
EdgeSet normalize_pairs(const std::vector<std::pair<Index, Index>>& pairs);

/// Adds the endpoints, sorts by fpr and makes tpr nondecreasing.
RocCurve make_roc(std::vector<RocPoint> pts);

RocCurve roc_from_path(const EstimatePath& path, const EdgeSet& truth, Index m);

double auc(const RocCurve& curve);

/// Vertical averaging: mean interpolated tpr on a uniform fpr grid.
RocCurve vertical_average(const std::vector<RocCurve>& curves, int grid_size = 1001);

struct DiagnosticsReport {
    double alpha = 0.0;     // 1 - ||G_{S^c S} G_{SS}^-1||_inf
    double c_gamma0 = 0.0;  // ||G_{SS}^-1||_inf
    double c_psi0 = 0.0;    // max absolute row sum of Psi0
    Index d_psi0 = 0;       // max nonzeros per column of Psi0
    Index mc_samples = 0;
};

/// Irrepresentability constants from a block loss taken as Gamma0 and the
/// true parameter Psi0 (side x m; row m holds eta in the non-centered layout).
DiagnosticsReport diagnostics_from_gamma(const QuadraticLoss& gamma0, const MatrixXd& psi0);

/// Gamma0 estimated by assembling the loss on an mc_n-row Gibbs sample.
DiagnosticsReport population_diagnostics(const ModelSpec& spec, const InteractionParams& params0, const HSpec& h,
                                         Index mc_n, const GibbsConfig& cfg, Rng& rng);

// ---------------------------------------------------------------------------
// Graph-recovery experiment.

struct ExperimentSpec {
    ModelSpec model{1.0, 1.0, true};
    GraphSpec graph;
    Index m = 100;
    Index n = 1000;
    std::vector<HSpec> hs{TruncPower{1.0, 3.0}};   // every h is fitted on the same datasets
    double multiplier = 0.0;                        // <= 0: C(n, m)
    int num_k0 = 5;
    int trials_per_k0 = 10;
    int nlambda = 50;
    double lambda_min_ratio = 0.01;
    bool profile_eta = false;
    bool scale = true;
    std::optional<double> eta0;                     // constant eta0 for non-centered runs
    double mu0_sd = 0.5;                            // otherwise a=b=1 draws mu0 ~ N(0, sd^2), eta0 = K0 mu0
    GibbsConfig gibbs;
    SolverConfig solver;
    std::uint64_t seed = 1;
    int threads = 1;                                // replicates run concurrently; results are schedule-independent
};

struct TrialResult {
    int k0_index = 0;
    int trial = 0;
    std::vector<double> aucs;          // one per h
    std::vector<RocCurve> curves;      // one per h
    bool all_converged = true;
    std::string error;
};

struct HSummary {
    std::string h;
    double mean_auc = 0.0;
    double sd_auc = 0.0;
    RocCurve averaged;
    int trials = 0;
    int unconverged_fits = 0;
};

struct ExperimentResult {
    std::vector<TrialResult> trials;
    std::vector<HSummary> summaries;
    int failures = 0;
};

/// Seeds: K0 number k uses derive_seed(seed, k); its trial t samples with
/// derive_seed(derive_seed(seed, k), t + 1). on_trial may be called out of
/// order when threads > 1; the returned trials are always in (k, t) order.
ExperimentResult run_experiment(const ExperimentSpec& spec,
                                const std::function<void(const TrialResult&)>& on_trial = {});

/// Estimation pipeline of one trial on an already scaled dataset: assemble,
/// amplify, optionally profile eta, and solve the path.
struct FitOutput {
    QuadraticLoss loss;       // amplified loss the path was solved on
    EstimatePath path;        // on the standardized scale
    std::optional<ProfiledLoss> profiled;
};

FitOutput fit_path(const ModelSpec& model, const HSpec& h, const Dataset& data, double multiplier,
                   int nlambda, double lambda_min_ratio, bool profile_eta, const SolverConfig& cfg);

} // namespace gsm
