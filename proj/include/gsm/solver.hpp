#pragma once

#include "gsm/estimate.hpp"
#include "gsm/loss.hpp"

#include <limits>
#include <optional>

namespace gsm {

struct SolverConfig {
    double tol = 1e-8;           // max absolute coordinate change per sweep
    int max_iter = 10000;        // sweep cap
    bool symmetric = true;
    // lambda_eta = lambda_ratio * lambda_K. Infinity pins eta at zero,
    // zero leaves eta unpenalized.
    double lambda_ratio = 1.0;
    bool penalize_diagonal = true;

    void validate() const;
};

/// Coordinates that may move: side x m, row l of column j is coordinate l of
/// block j (row m is eta_j in the non-centered layout). Others stay at zero.
using FreeMask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

inline constexpr double kFixedAtZero = std::numeric_limits<double>::infinity();

double soft_threshold(double z, double lam);

/// Penalized objective sum_j 1/2 th_j' G_j th_j - g_j' th_j + penalties, with
/// off-diagonal K entries charged lambda_K each, the diagonal per config, and
/// eta charged lambda_eta.
double penalized_objective(const QuadraticLoss& loss, const MatrixXd& K, const VectorXd* eta,
                           double lambda_K, double lambda_eta, const SolverConfig& cfg);

/// Cyclic coordinate descent. lambda_eta == kFixedAtZero pins eta at 0.
Estimate coordinate_descent(const QuadraticLoss& loss, double lambda_K, double lambda_eta,
                            const Estimate* init, const SolverConfig& cfg,
                            const FreeMask* free = nullptr);

/// Smallest lambda at which every penalized coordinate is zero, given the
/// config (eta and an unpenalized diagonal are solved for exactly first).
double lambda_max(const QuadraticLoss& loss, const SolverConfig& cfg);

/// nlambda log-spaced values from lmax down to min_ratio * lmax.
std::vector<double> lambda_grid(double lmax, int nlambda = 50, double min_ratio = 0.01);

EstimatePath solve_path(const QuadraticLoss& loss, const std::vector<double>& lambdas,
                        const SolverConfig& cfg);

/// theta_j = Gamma_j^-1 g_j per block. Symmetric mode averages K with K' and
/// records the asymmetry removed.
Estimate closed_form(const QuadraticLoss& loss, bool symmetric = true);

struct UnboundedDirection {
    Index block = 0;
    MatrixXd direction;     // side x m, nonzero only in column `block`
    double certificate = 0; // -g'nu + lambda ||nu||_1, negative
};

/// A kernel direction of some block along which the penalized objective is
/// linear and decreasing, or nothing when every block is bounded below.
std::optional<UnboundedDirection> kernel_unbounded_direction(const QuadraticLoss& loss, double lambda);

} // namespace gsm
