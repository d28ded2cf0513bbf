#include "gsm/model_selection.hpp"

#include "gsm/errors.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <sstream>

namespace gsm {

EdgeSet edge_set(const MatrixXd& K) {
    const auto e = edges_of(K);
    return EdgeSet(e.begin(), e.end());
}

double log_binomial(double N, double k) {
    if (k < 0 || k > N) throw DomainError("binomial coefficient out of range");
    return std::lgamma(N + 1.0) - std::lgamma(k + 1.0) - std::lgamma(N - k + 1.0);
}

EbicScore ebic(const QuadraticLoss& raw_loss, const Estimate& est, double n, bool refitted) {
    const Index m = raw_loss.m;
    if (est.K.rows() != m || est.K.cols() != m) throw DomainError("estimate does not match the loss");
    if (!(n >= 1.0)) throw DomainError("n must be >= 1");
    const VectorXd* eta = raw_loss.has_eta() && est.eta ? &*est.eta : nullptr;
    // 2 n (1/2 th'G th - g'th) is the displayed quadratic part.
    const double quad = 2.0 * n * quadratic_value(raw_loss, est.K, eta, /*use_raw=*/true);
    const auto s = static_cast<Index>(edges_of(est.K).size());
    const double pairs = 0.5 * static_cast<double>(m) * static_cast<double>(m - 1);
    EbicScore out;
    out.lambda = est.lambda;
    out.support_size = s;
    out.refitted = refitted;
    out.score = quad + static_cast<double>(s) * std::log(n) + 2.0 * log_binomial(pairs, static_cast<double>(s));
    return out;
}

Estimate refit(const QuadraticLoss& loss, const EdgeSet& support, const SolverConfig& cfg, const Estimate* warm) {
    const Index m = loss.m;
    const Index side = loss.side();
    FreeMask free = FreeMask::Constant(side, m, false);
    for (Index j = 0; j < m; ++j) free(j, j) = true;
    if (loss.has_eta()) free.row(m).setConstant(true);
    for (const auto& [i, j] : support) {
        if (i == j || i < 0 || j < 0 || i >= m || j >= m) throw DomainError("support must hold off-diagonal pairs");
        free(i, j) = true;
        free(j, i) = true;
    }
    for (Index j = 0; j < m; ++j) {
        std::vector<Index> idx;
        for (Index l = 0; l < side; ++l)
            if (free(l, j)) idx.push_back(l);
        const auto& G = loss.blocks[static_cast<std::size_t>(j)].gamma;
        MatrixXd sub(static_cast<Index>(idx.size()), static_cast<Index>(idx.size()));
        for (std::size_t r = 0; r < idx.size(); ++r)
            for (std::size_t c = 0; c < idx.size(); ++c) sub(r, c) = G(idx[r], idx[c]);
        Eigen::SelfAdjointEigenSolver<MatrixXd> es(sub, Eigen::EigenvaluesOnly);
        const double top = es.eigenvalues().cwiseAbs().maxCoeff();
        if (!(es.eigenvalues().minCoeff() > 1e-10 * top)) {
            std::ostringstream os;
            os << "restricted system of block " << j << " is singular; refit on an amplified loss";
            throw NumericError(os.str());
        }
    }
    SolverConfig c = cfg;
    c.lambda_ratio = 0.0;
    Estimate out = coordinate_descent(loss, 0.0, 0.0, warm, c, &free);
    if (warm) out.lambda = warm->lambda;
    return out;
}

Selection select(const EstimatePath& path, const QuadraticLoss& raw_loss, double n, bool do_refit,
                 const QuadraticLoss* fit_loss, const SolverConfig& cfg) {
    if (path.entries.empty()) throw DomainError("path is empty");
    Selection sel;
    bool have_converged = false;
    for (const auto& e : path.entries) have_converged = have_converged || e.converged;

    std::size_t best = path.entries.size();
    for (std::size_t k = 0; k < path.entries.size(); ++k) {
        const Estimate& e = path.entries[k];
        EbicScore sc;
        bool ok = e.converged || !have_converged;
        if (do_refit) {
            // Debias on the raw loss; the amplified one is only a fallback
            // for supports whose raw restricted system is singular.
            Estimate r;
            try {
                r = refit(raw_loss, edge_set(e.K), cfg, &e);
            } catch (const NumericError&) {
                if (!fit_loss) throw;
                r = refit(*fit_loss, edge_set(e.K), cfg, &e);
            }
            sc = ebic(raw_loss, r, n, true);
            ok = ok && (r.converged || !have_converged);
            sel.refits.push_back(std::move(r));
        } else {
            sc = ebic(raw_loss, e, n, false);
        }
        sc.lambda = e.lambda;
        sel.scores.push_back(sc);
        if (ok && (best == path.entries.size() || sc.score < sel.scores[best].score)) best = k;
    }
    sel.best_index = best == path.entries.size() ? 0 : best;
    return sel;
}

} // namespace gsm
