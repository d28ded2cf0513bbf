#include "gsm/evaluation.hpp"

#include "gsm/errors.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <sstream>
#include <thread>

namespace gsm {

EdgeSet normalize_pairs(const std::vector<std::pair<Index, Index>>& pairs) {
    EdgeSet out;
    for (const auto& [i, j] : pairs)
        if (i != j) out.emplace(std::min(i, j), std::max(i, j));
    return out;
}

Confusion confusion(const EdgeSet& est, const EdgeSet& truth, Index m) {
    const EdgeSet e = normalize_pairs({est.begin(), est.end()});
    const EdgeSet t = normalize_pairs({truth.begin(), truth.end()});
    if (t.empty()) throw DomainError("true support has no off-diagonal pairs; TPR is undefined");
    Index hit = 0;
    for (const auto& p : e)
        if (t.count(p)) ++hit;
    const double ordered_true = 2.0 * static_cast<double>(t.size());
    const double negatives = static_cast<double>(m) * static_cast<double>(m - 1) - ordered_true;
    const double false_pos = 2.0 * static_cast<double>(e.size() - static_cast<std::size_t>(hit));
    Confusion c;
    c.tpr = 2.0 * static_cast<double>(hit) / ordered_true;
    c.fpr = negatives > 0.0 ? false_pos / negatives : 0.0;
    return c;
}

RocCurve make_roc(std::vector<RocPoint> pts) {
    pts.push_back({0.0, 0.0});
    pts.push_back({1.0, 1.0});
    std::sort(pts.begin(), pts.end(), [](const RocPoint& x, const RocPoint& y) {
        return x.fpr < y.fpr || (x.fpr == y.fpr && x.tpr < y.tpr);
    });
    double run = 0.0;
    for (auto& p : pts) {
        run = std::max(run, p.tpr);
        p.tpr = run;
    }
    return RocCurve{std::move(pts)};
}

RocCurve roc_from_path(const EstimatePath& path, const EdgeSet& truth, Index m) {
    if (path.entries.empty()) throw DomainError("path is empty");
    std::vector<RocPoint> pts;
    for (const auto& e : path.entries) {
        const auto c = confusion(edge_set(e.K), truth, m);
        pts.push_back({c.fpr, c.tpr});
    }
    return make_roc(std::move(pts));
}

double auc(const RocCurve& curve) {
    double area = 0.0;
    for (std::size_t k = 1; k < curve.points.size(); ++k) {
        const auto& p = curve.points[k - 1];
        const auto& q = curve.points[k];
        area += (q.fpr - p.fpr) * 0.5 * (p.tpr + q.tpr);
    }
    return area;
}

namespace {

double tpr_at(const RocCurve& c, double f) {
    const auto& pts = c.points;
    const auto it = std::upper_bound(pts.begin(), pts.end(), f,
                                     [](double v, const RocPoint& p) { return v < p.fpr; });
    if (it == pts.begin()) return pts.front().tpr;
    const auto lo = it - 1;
    if (it == pts.end() || lo->fpr == f) return lo->tpr;
    const double w = (f - lo->fpr) / (it->fpr - lo->fpr);
    return lo->tpr + w * (it->tpr - lo->tpr);
}

} // namespace

RocCurve vertical_average(const std::vector<RocCurve>& curves, int grid_size) {
    if (curves.empty()) throw DomainError("nothing to average");
    if (grid_size < 2) throw DomainError("grid_size must be >= 2");
    std::vector<RocPoint> pts;
    pts.reserve(static_cast<std::size_t>(grid_size) + 1);
    pts.push_back({0.0, 0.0});
    for (int k = 0; k < grid_size; ++k) {
        const double f = static_cast<double>(k) / (grid_size - 1);
        double sum = 0.0;
        for (const auto& c : curves) sum += tpr_at(c, f);
        pts.push_back({f, sum / static_cast<double>(curves.size())});
    }
    return RocCurve{std::move(pts)};
}

DiagnosticsReport diagnostics_from_gamma(const QuadraticLoss& gamma0, const MatrixXd& psi0) {
    const Index m = gamma0.m;
    const Index side = gamma0.side();
    if (psi0.rows() != side || psi0.cols() != m) throw DomainError("Psi0 must be side x m");
    DiagnosticsReport rep;
    double irr = 0.0;
    for (Index j = 0; j < m; ++j) {
        std::vector<Index> S, Sc;
        for (Index l = 0; l < side; ++l) (psi0(l, j) != 0.0 ? S : Sc).push_back(l);
        rep.d_psi0 = std::max<Index>(rep.d_psi0, static_cast<Index>(S.size()));
        if (S.empty()) continue;
        const MatrixXd& G = gamma0.blocks[static_cast<std::size_t>(j)].gamma;
        const auto s = static_cast<Index>(S.size());
        MatrixXd Gss(s, s), Gcs(static_cast<Index>(Sc.size()), s);
        for (Index r = 0; r < s; ++r)
            for (Index c = 0; c < s; ++c) Gss(r, c) = G(S[r], S[c]);
        for (std::size_t r = 0; r < Sc.size(); ++r)
            for (Index c = 0; c < s; ++c) Gcs(static_cast<Index>(r), c) = G(Sc[r], S[c]);
        Eigen::SelfAdjointEigenSolver<MatrixXd> es(Gss);
        const double top = es.eigenvalues().cwiseAbs().maxCoeff();
        if (!(es.eigenvalues().minCoeff() > 1e-12 * top))
            throw NumericError("Gamma0 restricted to the support of column " + std::to_string(j) + " is singular");
        const MatrixXd inv = es.eigenvectors() * es.eigenvalues().cwiseInverse().asDiagonal() *
                             es.eigenvectors().transpose();
        rep.c_gamma0 = std::max(rep.c_gamma0, inv.cwiseAbs().rowwise().sum().maxCoeff());
        if (!Sc.empty()) irr = std::max(irr, (Gcs * inv).cwiseAbs().rowwise().sum().maxCoeff());
    }
    rep.alpha = 1.0 - irr;
    rep.c_psi0 = psi0.cwiseAbs().rowwise().sum().maxCoeff();
    return rep;
}

namespace {

Dataset draw(const ModelSpec& spec, const InteractionParams& params, Index n, const GibbsConfig& cfg, Rng& rng) {
    if (spec.a == 1.0 && spec.b == 1.0) {
        InteractionParams p = params;
        if (spec.centered || p.eta.size() != p.dim()) p.eta = VectorXd::Zero(p.dim());
        return sample_tn_gibbs(p, n, cfg, rng);
    }
    return sample_pairwise_gibbs(spec, params, n, cfg, rng);
}

MatrixXd psi_of(const ModelSpec& spec, const InteractionParams& p) {
    const Index m = p.dim();
    if (spec.centered) return p.K;
    MatrixXd psi(m + 1, m);
    psi.topRows(m) = p.K;
    if (p.eta.size() == m)
        psi.row(m) = p.eta.transpose();
    else
        psi.row(m).setZero();
    return psi;
}

} // namespace

DiagnosticsReport population_diagnostics(const ModelSpec& spec, const InteractionParams& params0, const HSpec& h,
                                         Index mc_n, const GibbsConfig& cfg, Rng& rng) {
    if (mc_n < 2) throw DomainError("mc_n must be >= 2");
    const Dataset data = draw(spec, params0, mc_n, cfg, rng);
    const QuadraticLoss g0 = assemble_pairwise(spec, {h}, data);
    DiagnosticsReport rep = diagnostics_from_gamma(g0, psi_of(spec, params0));
    rep.mc_samples = mc_n;
    return rep;
}

FitOutput fit_path(const ModelSpec& model, const HSpec& h, const Dataset& data, double multiplier,
                   int nlambda, double lambda_min_ratio, bool profile_eta, const SolverConfig& cfg) {
    FitOutput out;
    const QuadraticLoss raw = assemble_pairwise(model, {h}, data);
    out.loss = amplify(raw, multiplier > 1.0 ? AmplifierSpec::multiplier(multiplier) : AmplifierSpec::none());
    if (profile_eta && out.loss.has_eta()) {
        out.profiled = profile_out_eta(out.loss);
        const auto& k = out.profiled->k_loss;
        out.path = solve_path(k, lambda_grid(lambda_max(k, cfg), nlambda, lambda_min_ratio), cfg);
        for (auto& e : out.path.entries) e.eta = out.profiled->recover_eta(e.K);
    } else {
        out.path = solve_path(out.loss, lambda_grid(lambda_max(out.loss, cfg), nlambda, lambda_min_ratio), cfg);
    }
    return out;
}

ExperimentResult run_experiment(const ExperimentSpec& spec, const std::function<void(const TrialResult&)>& on_trial) {
    spec.model.validate();
    spec.graph.validate(spec.m);
    if (spec.hs.empty()) throw DomainError("experiment needs at least one h");
    if (spec.num_k0 < 1 || spec.trials_per_k0 < 1) throw DomainError("need at least one K0 and one trial");
    const double mult = spec.multiplier > 0.0
                            ? spec.multiplier
                            : multiplier_upper_bound(static_cast<double>(spec.n), static_cast<double>(spec.m));

    struct Truth {
        std::uint64_t seed;
        InteractionParams p0;
        EdgeSet edges;
    };
    std::vector<Truth> truths;
    for (int k = 0; k < spec.num_k0; ++k) {
        const std::uint64_t k_seed = derive_seed(spec.seed, static_cast<std::uint64_t>(k));
        Rng krng(k_seed);
        InteractionParams p0 = generate_k0(spec.m, spec.graph, krng);
        if (!spec.model.centered) {
            if (spec.eta0) {
                p0.eta = VectorXd::Constant(spec.m, *spec.eta0);
            } else if (spec.model.a == 1.0 && spec.model.b == 1.0) {
                VectorXd mu0(spec.m);
                for (Index j = 0; j < spec.m; ++j) mu0(j) = spec.mu0_sd * krng.normal();
                p0.eta = p0.K * mu0;
            } else {
                p0.eta = VectorXd::Zero(spec.m);
            }
        }
        EdgeSet edges = edge_set(p0.K);
        truths.push_back({k_seed, std::move(p0), std::move(edges)});
    }

    // Each replicate owns its RNG stream, so results do not depend on the schedule.
    const int total = spec.num_k0 * spec.trials_per_k0;
    std::vector<TrialResult> slots(static_cast<std::size_t>(total));
    std::atomic<int> next{0};
    std::mutex report;
    auto worker = [&] {
        for (int job = next++; job < total; job = next++) {
            const int k = job / spec.trials_per_k0;
            const int t = job % spec.trials_per_k0;
            const Truth& tr0 = truths[static_cast<std::size_t>(k)];
            TrialResult tr;
            tr.k0_index = k;
            tr.trial = t;
            try {
                Rng rng(derive_seed(tr0.seed, static_cast<std::uint64_t>(t) + 1));
                Dataset data = draw(spec.model, tr0.p0, spec.n, spec.gibbs, rng);
                if (spec.scale) data = standardize(data);
                for (const auto& h : spec.hs) {
                    const FitOutput fit = fit_path(spec.model, h, data, mult, spec.nlambda, spec.lambda_min_ratio,
                                                   spec.profile_eta, spec.solver);
                    for (const auto& e : fit.path.entries) tr.all_converged = tr.all_converged && e.converged;
                    tr.curves.push_back(roc_from_path(fit.path, tr0.edges, spec.m));
                    tr.aucs.push_back(auc(tr.curves.back()));
                }
            } catch (const std::exception& e) {
                tr.error = e.what();
                tr.aucs.clear();
                tr.curves.clear();
            }
            if (on_trial) {
                std::lock_guard lock(report);
                on_trial(tr);
            }
            slots[static_cast<std::size_t>(job)] = std::move(tr);
        }
    };
    const int nthreads = std::max(1, std::min(spec.threads, total));
    if (nthreads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < nthreads; ++w) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    ExperimentResult res;
    res.trials = std::move(slots);
    for (const auto& tr : res.trials)
        if (!tr.error.empty()) ++res.failures;

    for (std::size_t hi = 0; hi < spec.hs.size(); ++hi) {
        HSummary s;
        s.h = format_hspec(spec.hs[hi]);
        std::vector<RocCurve> curves;
        std::vector<double> aucs;
        for (const auto& tr : res.trials) {
            if (!tr.error.empty()) continue;
            curves.push_back(tr.curves[hi]);
            aucs.push_back(tr.aucs[hi]);
            if (!tr.all_converged) ++s.unconverged_fits;
        }
        s.trials = static_cast<int>(aucs.size());
        if (!aucs.empty()) {
            double mean = 0.0;
            for (double a : aucs) mean += a;
            mean /= static_cast<double>(aucs.size());
            double var = 0.0;
            for (double a : aucs) var += (a - mean) * (a - mean);
            s.mean_auc = mean;
            s.sd_auc = aucs.size() > 1 ? std::sqrt(var / static_cast<double>(aucs.size() - 1)) : 0.0;
            s.averaged = vertical_average(curves);
        }
        res.summaries.push_back(std::move(s));
    }
    return res;
}

} // namespace gsm
