#include "gsm/solver.hpp"

#include "gsm/errors.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace gsm {

void SolverConfig::validate() const {
    if (!(tol > 0.0)) throw DomainError("solver tol must be positive");
    if (max_iter < 1) throw DomainError("solver max_iter must be >= 1");
    if (!(lambda_ratio >= 0.0)) throw DomainError("lambda_ratio must be in [0, inf]");
}

double soft_threshold(double z, double lam) {
    if (z > lam) return z - lam;
    if (z < -lam) return z + lam;
    return 0.0;
}

std::vector<std::pair<Index, Index>> support_of(const MatrixXd& K) {
    std::vector<std::pair<Index, Index>> out;
    for (Index i = 0; i < K.rows(); ++i)
        for (Index j = 0; j < K.cols(); ++j)
            if (K(i, j) != 0.0) out.emplace_back(i, j);
    return out;
}

std::vector<std::pair<Index, Index>> edges_of(const MatrixXd& K) {
    std::vector<std::pair<Index, Index>> out;
    for (Index i = 0; i < K.rows(); ++i)
        for (Index j = i + 1; j < K.cols(); ++j)
            if (K(i, j) != 0.0 || K(j, i) != 0.0) out.emplace_back(i, j);
    return out;
}

namespace {

double eta_lambda(const SolverConfig& cfg, double lambda) {
    if (std::isinf(cfg.lambda_ratio)) return kFixedAtZero;
    return cfg.lambda_ratio * lambda;
}

double penalty_of(Index l, Index j, Index m, double lamK, double lamE, const SolverConfig& cfg) {
    if (l == m) return lamE;
    if (l == j) return cfg.penalize_diagonal ? lamK : 0.0;
    return lamK;
}

} // namespace

double penalized_objective(const QuadraticLoss& loss, const MatrixXd& K, const VectorXd* eta,
                           double lambda_K, double lambda_eta, const SolverConfig& cfg) {
    double total = quadratic_value(loss, K, eta);
    const Index m = loss.m;
    for (Index j = 0; j < m; ++j)
        for (Index i = 0; i < m; ++i) {
            const double pen = penalty_of(i, j, m, lambda_K, lambda_eta, cfg);
            if (K(i, j) != 0.0) total += pen * std::abs(K(i, j));
        }
    if (loss.has_eta() && eta)
        for (Index j = 0; j < m; ++j)
            if ((*eta)(j) != 0.0) total += lambda_eta * std::abs((*eta)(j));
    return total;
}

Estimate coordinate_descent(const QuadraticLoss& loss, double lambda_K, double lambda_eta,
                            const Estimate* init, const SolverConfig& cfg, const FreeMask* free) {
    cfg.validate();
    if (!(lambda_K >= 0.0) || !(lambda_eta >= 0.0)) throw DomainError("penalties must be >= 0");
    const Index m = loss.m;
    const Index side = loss.side();
    const bool has_eta = loss.has_eta();
    if (free && (free->rows() != side || free->cols() != m)) throw DomainError("free mask has the wrong shape");

    auto pen = [&](Index l, Index j) { return penalty_of(l, j, m, lambda_K, lambda_eta, cfg); };
    auto movable = [&](Index l, Index j) {
        if (!std::isfinite(pen(l, j))) return false;
        if (!free) return true;
        if (cfg.symmetric && l < m && l != j) return (*free)(l, j) && (*free)(j, l);
        return (*free)(l, j);
    };

    MatrixXd th = MatrixXd::Zero(side, m);
    if (init) {
        if (init->K.rows() != m || init->K.cols() != m) throw DomainError("warm start has the wrong shape");
        th.topRows(m) = init->K;
        if (cfg.symmetric) th.topRows(m) = 0.5 * (init->K + init->K.transpose());
        if (has_eta && init->eta) th.row(m) = init->eta->transpose();
    }
    for (Index j = 0; j < m; ++j)
        for (Index l = 0; l < side; ++l) {
            if (!movable(l, j)) {
                th(l, j) = 0.0;
                continue;
            }
            const double d = loss.blocks[static_cast<std::size_t>(j)].gamma(l, l);
            if (!(d > 0.0)) {
                std::ostringstream os;
                os << "diagonal entry " << l << " of block " << j
                   << " is zero; the data column carries no information (amplification cannot help)";
                throw NumericError(os.str());
            }
        }

    MatrixXd R(side, m);
    for (Index j = 0; j < m; ++j) {
        const auto& blk = loss.blocks[static_cast<std::size_t>(j)];
        R.col(j) = blk.gamma * th.col(j) - blk.g;
    }

    double max_increase = 0.0;
    double max_change = 0.0;

    auto single = [&](Index l, Index j) {
        const auto& G = loss.blocks[static_cast<std::size_t>(j)].gamma;
        const double A = G(l, l);
        const double old = th(l, j);
        const double grad = R(l, j);
        const double p = pen(l, j);
        const double nv = soft_threshold(A * old - grad, p) / A;
        const double d = nv - old;
        if (d == 0.0) return;
        R.col(j).noalias() += d * G.col(l);
        th(l, j) = nv;
        const double change = 0.5 * A * d * d + grad * d + p * (std::abs(nv) - std::abs(old));
        max_increase = std::max(max_increase, change);
        max_change = std::max(max_change, std::abs(d));
    };
    auto pair = [&](Index i, Index j) {
        const auto& Gj = loss.blocks[static_cast<std::size_t>(j)].gamma;
        const auto& Gi = loss.blocks[static_cast<std::size_t>(i)].gamma;
        const double A = Gj(i, i) + Gi(j, j);
        const double old = th(i, j);
        const double grad = R(i, j) + R(j, i);
        const double p = 2.0 * lambda_K;
        const double nv = soft_threshold(A * old - grad, p) / A;
        const double d = nv - old;
        if (d == 0.0) return;
        R.col(j).noalias() += d * Gj.col(i);
        R.col(i).noalias() += d * Gi.col(j);
        th(i, j) = nv;
        th(j, i) = nv;
        const double change = 0.5 * A * d * d + grad * d + p * (std::abs(nv) - std::abs(old));
        max_increase = std::max(max_increase, change);
        max_change = std::max(max_change, std::abs(d));
    };

    // Full sweeps alternate with sweeps restricted to the current nonzeros;
    // convergence is only declared after a full sweep moves nothing beyond tol.
    auto sweep = [&](bool active_only) {
        max_change = 0.0;
        auto skip = [&](Index l, Index j) { return !movable(l, j) || (active_only && th(l, j) == 0.0); };
        if (cfg.symmetric) {
            for (Index i = 0; i < m; ++i)
                for (Index j = i; j < m; ++j) {
                    if (skip(i, j)) continue;
                    if (i == j)
                        single(i, i);
                    else
                        pair(i, j);
                }
            if (has_eta)
                for (Index j = 0; j < m; ++j)
                    if (!skip(m, j)) single(m, j);
        } else {
            for (Index j = 0; j < m; ++j)
                for (Index l = 0; l < side; ++l)
                    if (!skip(l, j)) single(l, j);
        }
        return max_change;
    };

    Estimate est;
    est.converged = false;
    int sweeps = 0;
    while (sweeps < cfg.max_iter) {
        ++sweeps;
        if (sweep(false) < cfg.tol) {
            est.converged = true;
            break;
        }
        while (sweeps < cfg.max_iter) {
            ++sweeps;
            if (sweep(true) < cfg.tol) break;
        }
    }

    est.K = th.topRows(m);
    if (has_eta) est.eta = VectorXd(th.row(m).transpose());
    est.lambda = lambda_K;
    est.support = support_of(est.K);
    est.iterations = sweeps;
    est.loss_value = quadratic_value(loss, est.K, has_eta ? &*est.eta : nullptr);
    est.max_objective_increase = max_increase;
    return est;
}

double lambda_max(const QuadraticLoss& loss, const SolverConfig& cfg) {
    const Index m = loss.m;
    const double lamE = eta_lambda(cfg, 1.0);
    const bool eta_free = loss.has_eta() && lamE == 0.0;
    const double inf = std::numeric_limits<double>::infinity();

    MatrixXd K = MatrixXd::Zero(m, m);
    std::optional<VectorXd> eta;
    if (loss.has_eta()) eta = VectorXd::Zero(m);
    if (eta_free || !cfg.penalize_diagonal) {
        const auto base = coordinate_descent(loss, inf, eta_free ? 0.0 : kFixedAtZero, nullptr, cfg);
        K = base.K;
        eta = base.eta;
    }

    double lmax = 0.0;
    const Index side = loss.side();
    MatrixXd R(side, m);
    for (Index j = 0; j < m; ++j) {
        const auto& blk = loss.blocks[static_cast<std::size_t>(j)];
        VectorXd th(side);
        th.head(m) = K.col(j);
        if (loss.has_eta()) th(m) = (*eta)(j);
        R.col(j) = blk.gamma * th - blk.g;
    }
    for (Index j = 0; j < m; ++j) {
        for (Index i = 0; i < m; ++i) {
            if (i == j) {
                if (cfg.penalize_diagonal) lmax = std::max(lmax, std::abs(R(j, j)));
            } else if (cfg.symmetric) {
                lmax = std::max(lmax, 0.5 * std::abs(R(i, j) + R(j, i)));
            } else {
                lmax = std::max(lmax, std::abs(R(i, j)));
            }
        }
        if (loss.has_eta() && std::isfinite(lamE) && lamE > 0.0)
            lmax = std::max(lmax, std::abs(R(m, j)) / lamE);
    }
    return lmax;
}

std::vector<double> lambda_grid(double lmax, int nlambda, double min_ratio) {
    if (!(lmax > 0.0)) throw DomainError("lambda_max must be positive");
    if (nlambda < 1) throw DomainError("nlambda must be >= 1");
    if (!(min_ratio > 0.0 && min_ratio < 1.0)) throw DomainError("lambda min ratio must be in (0, 1)");
    std::vector<double> out(static_cast<std::size_t>(nlambda));
    for (int k = 0; k < nlambda; ++k)
        out[static_cast<std::size_t>(k)] =
            nlambda == 1 ? lmax : lmax * std::pow(min_ratio, static_cast<double>(k) / (nlambda - 1));
    return out;
}

EstimatePath solve_path(const QuadraticLoss& loss, const std::vector<double>& lambdas, const SolverConfig& cfg) {
    if (lambdas.empty()) throw DomainError("lambda grid is empty");
    for (std::size_t k = 0; k < lambdas.size(); ++k) {
        if (!(lambdas[k] >= 0.0)) throw DomainError("lambdas must be >= 0");
        if (k > 0 && !(lambdas[k] < lambdas[k - 1])) throw DomainError("lambda grid must be strictly decreasing");
    }
    EstimatePath path;
    path.entries.reserve(lambdas.size());
    for (std::size_t k = 0; k < lambdas.size(); ++k) {
        const Estimate* warm = k == 0 ? nullptr : &path.entries.back();
        path.entries.push_back(coordinate_descent(loss, lambdas[k], eta_lambda(cfg, lambdas[k]), warm, cfg));
    }
    return path;
}

Estimate closed_form(const QuadraticLoss& loss, bool symmetric) {
    const Index m = loss.m;
    const Index side = loss.side();
    MatrixXd th(side, m);
    for (Index j = 0; j < m; ++j) {
        const auto& blk = loss.blocks[static_cast<std::size_t>(j)];
        Eigen::SelfAdjointEigenSolver<MatrixXd> es(blk.gamma, Eigen::EigenvaluesOnly);
        const double top = es.eigenvalues().cwiseAbs().maxCoeff();
        const double low = es.eigenvalues().minCoeff();
        if (!(low > 1e-10 * top) || !(top > 0.0)) {
            std::ostringstream os;
            os << "block " << j << " is singular (smallest eigenvalue " << low
               << "); the unregularized loss is unbounded, amplify it";
            throw NumericError(os.str());
        }
        th.col(j) = blk.gamma.llt().solve(blk.g);
    }
    Estimate est;
    est.K = th.topRows(m);
    est.asymmetry = (est.K - est.K.transpose()).cwiseAbs().maxCoeff();
    if (symmetric) est.K = (0.5 * (est.K + est.K.transpose())).eval();
    if (loss.has_eta()) est.eta = VectorXd(th.row(m).transpose());
    est.lambda = 0.0;
    est.support = support_of(est.K);
    est.loss_value = quadratic_value(loss, est.K, est.eta ? &*est.eta : nullptr);
    return est;
}

std::optional<UnboundedDirection> kernel_unbounded_direction(const QuadraticLoss& loss, double lambda) {
    if (!(lambda >= 0.0)) throw DomainError("lambda must be >= 0");
    const Index m = loss.m;
    const Index side = loss.side();
    std::optional<UnboundedDirection> best;
    for (Index j = 0; j < m; ++j) {
        const auto& blk = loss.blocks[static_cast<std::size_t>(j)];
        Eigen::SelfAdjointEigenSolver<MatrixXd> es(blk.gamma);
        const auto& ev = es.eigenvalues();
        const double tol = 1e-10 * std::max(ev.cwiseAbs().maxCoeff(), 1e-300);
        std::vector<Index> kern;
        for (Index k = 0; k < side; ++k)
            if (std::abs(ev(k)) <= tol) kern.push_back(k);
        if (kern.empty()) continue;

        std::vector<VectorXd> cands;
        VectorXd proj = VectorXd::Zero(side);
        for (Index k : kern) {
            const VectorXd u = es.eigenvectors().col(k);
            cands.push_back(u);
            proj += u * u.dot(blk.g);
        }
        cands.push_back(proj);
        for (VectorXd nu : cands) {
            const double l1 = nu.lpNorm<1>();
            if (!(l1 > 0.0)) continue;
            nu /= l1;
            double gv = blk.g.dot(nu);
            if (gv < 0.0) {
                nu = -nu;
                gv = -gv;
            }
            const double cert = -gv + lambda;
            if (cert < 0.0 && (!best || cert < best->certificate)) {
                UnboundedDirection d;
                d.block = j;
                d.direction = MatrixXd::Zero(side, m);
                d.direction.col(j) = nu;
                d.certificate = cert;
                best = std::move(d);
            }
        }
    }
    return best;
}

} // namespace gsm
