#pragma once

#include <Eigen/Dense>

#include <optional>
#include <utility>
#include <vector>

namespace gsm {

using Eigen::Index;

/// A fitted (K, eta) at one penalty level.
struct Estimate {
    Eigen::MatrixXd K;
    std::optional<Eigen::VectorXd> eta;
    double lambda = 0.0;
    std::vector<std::pair<Index, Index>> support;  // every (i, j) with K(i, j) != 0
    int iterations = 0;
    bool converged = true;
    double loss_value = 0.0;
    double asymmetry = 0.0;           // max |K - K'| before symmetrization (closed form only)
    double max_objective_increase = 0.0;  // largest single-update increase seen by the solver
};

/// All (i, j) with K(i, j) exactly nonzero, row-major order.
std::vector<std::pair<Index, Index>> support_of(const Eigen::MatrixXd& K);

/// Upper-triangle off-diagonal edges (i < j) with K(i, j) or K(j, i) nonzero.
std::vector<std::pair<Index, Index>> edges_of(const Eigen::MatrixXd& K);

struct EstimatePath {
    std::vector<Estimate> entries;  // lambdas strictly decreasing

    std::size_t size() const { return entries.size(); }
};

} // namespace gsm
