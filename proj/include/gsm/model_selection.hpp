#pragma once

#include "gsm/loss.hpp"
#include "gsm/solver.hpp"

#include <set>

namespace gsm {

using EdgeSet = std::set<std::pair<Index, Index>>;  // unordered pairs stored as (i < j)

struct EbicScore {
    double lambda = 0.0;
    double score = 0.0;
    Index support_size = 0;
    bool refitted = false;
};

/// log C(N, k) via log-gamma.
double log_binomial(double N, double k);

/// Extended BIC on the un-amplified quadratic:
///   n th'G th - 2n g'th + |S| log n + 2 log C(m(m-1)/2, |S|),
/// lower is better; |S| counts upper-triangle off-diagonal edges.
EbicScore ebic(const QuadraticLoss& raw_loss, const Estimate& est, double n, bool refitted = false);

/// Unpenalized minimization over support edges, the diagonal and eta, with
/// every other K entry pinned at zero.
Estimate refit(const QuadraticLoss& loss, const EdgeSet& support, const SolverConfig& cfg,
               const Estimate* warm = nullptr);

struct Selection {
    std::size_t best_index = 0;
    std::vector<EbicScore> scores;
    std::vector<Estimate> refits;   // filled when refitting
};

/// Scores every path entry and returns the argmin; ties go to the larger
/// lambda, converged entries win over unconverged ones. Refits use the raw
/// loss and fall back to `fit_loss` (the amplified one) when a raw restricted
/// system is singular.
Selection select(const EstimatePath& path, const QuadraticLoss& raw_loss, double n, bool do_refit,
                 const QuadraticLoss* fit_loss = nullptr, const SolverConfig& cfg = {});

EdgeSet edge_set(const MatrixXd& K);

} // namespace gsm
