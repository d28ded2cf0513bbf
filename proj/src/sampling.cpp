#include "gsm/sampling.hpp"

#include "gsm/errors.hpp"

#include <Eigen/Eigenvalues>
#include <boost/math/special_functions/erf.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>

namespace gsm {

namespace {

double parse_num(std::string_view s, const std::string& what) {
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw DomainError("bad number '" + std::string(s) + "' in " + what);
    return v;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(sep, start);
        out.push_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

} // namespace

void GraphSpec::validate(Index m) const {
    if (m < 2) throw DomainError("graph needs m >= 2");
    if (!(pi > 0.0 && pi <= 1.0)) throw DomainError("edge probability must be in (0, 1]");
    if (!(weight_lo <= weight_hi)) throw DomainError("weight range is empty");
    if (!(min_eigenvalue > 0.0)) throw DomainError("min_eigenvalue must be positive");
    if (scheme == Scheme::block && (num_blocks < 1 || m % num_blocks != 0))
        throw DomainError("number of blocks " + std::to_string(num_blocks) + " does not divide m = " +
                          std::to_string(m));
}

GraphSpec parse_graph_spec(const std::string& text) {
    const auto parts = split(text, ':');
    GraphSpec gs;
    if (parts[0] == "block" && parts.size() == 3) {
        gs.scheme = GraphSpec::Scheme::block;
        gs.pi = parse_num(parts[1], "graph spec");
        const double nb = parse_num(parts[2], "graph spec");
        if (nb != std::floor(nb) || nb < 1) throw DomainError("block count must be a positive integer");
        gs.num_blocks = static_cast<int>(nb);
    } else if (parts[0] == "er" && parts.size() == 2) {
        gs.scheme = GraphSpec::Scheme::erdos_renyi;
        gs.pi = parse_num(parts[1], "graph spec");
    } else {
        throw DomainError("graph spec must be block:<pi>:<blocks> or er:<pi>, got '" + text + "'");
    }
    return gs;
}

std::string format_graph_spec(const GraphSpec& gs) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, gs.pi);
    const std::string pi(buf, res.ptr);
    if (gs.scheme == GraphSpec::Scheme::block) return "block:" + pi + ":" + std::to_string(gs.num_blocks);
    return "er:" + pi;
}

InteractionParams generate_k0(Index m, const GraphSpec& gs, Rng& rng) {
    gs.validate(m);
    const Index width = gs.scheme == GraphSpec::Scheme::block ? m / gs.num_blocks : m;
    MatrixXd K = MatrixXd::Zero(m, m);
    for (Index i = 1; i < m; ++i)
        for (Index j = 0; j < i; ++j) {
            if (i / width != j / width) continue;
            if (rng.bernoulli(gs.pi)) {
                const double w = rng.uniform(gs.weight_lo, gs.weight_hi);
                K(i, j) = w;
                K(j, i) = w;
            }
        }
    // lambda_min(A + dI) = lambda_min(A) + d, so the common diagonal is exact.
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(K, Eigen::EigenvaluesOnly);
    const double d = gs.min_eigenvalue - es.eigenvalues().minCoeff();
    K.diagonal().setConstant(d);
    return InteractionParams{K, VectorXd::Zero(m)};
}

double sample_truncated_normal_uni(double mu, double sigma, Rng& rng) {
    if (!(sigma > 0.0)) throw DomainError("truncated normal needs sigma > 0");
    const double alpha = -mu / sigma;
    double z;
    if (alpha < 25.0) {
        // Upper-tail inversion: z = Q^-1(U Q(alpha)) with Q(z) = erfc(z / sqrt 2) / 2.
        const double tail = std::erfc(alpha / std::numbers::sqrt2);
        z = std::numbers::sqrt2 * boost::math::erfc_inv(rng.uniform() * tail);
        z = std::max(z, alpha);
    } else {
        // Far tail: exponential proposal rejection, exact and free of underflow.
        const double lam = 0.5 * (alpha + std::sqrt(alpha * alpha + 4.0));
        while (true) {
            z = alpha - std::log(rng.uniform()) / lam;
            const double r = z - lam;
            if (rng.uniform() <= std::exp(-0.5 * r * r)) break;
        }
    }
    return std::max(0.0, mu + sigma * z);
}

void GibbsConfig::validate() const {
    if (burn_in < 0) throw DomainError("burn_in must be >= 0");
    if (thin < 1) throw DomainError("thin must be >= 1");
    if (grid_points < 64) throw DomainError("grid_points must be >= 64");
    if (domain_cap < 0.0) throw DomainError("domain_cap must be >= 0");
}

namespace {

VectorXd initial_state(const GibbsConfig& cfg, Index m) {
    if (!cfg.init) return VectorXd::Ones(m);
    if (cfg.init->size() != m) throw DomainError("initial Gibbs state has the wrong length");
    if (!(cfg.init->array() > 0.0).all()) throw DomainError("initial Gibbs state must be positive");
    return *cfg.init;
}

} // namespace

Dataset sample_tn_gibbs(const InteractionParams& params, Index n, const GibbsConfig& cfg, Rng& rng) {
    cfg.validate();
    const Index m = params.dim();
    if (params.K.cols() != m) throw DomainError("K must be square");
    if (n < 1) throw DomainError("sample size must be >= 1");
    for (Index j = 0; j < m; ++j)
        if (!(params.K(j, j) > 0.0))
            throw DomainError("K(" + std::to_string(j) + ", " + std::to_string(j) + ") must be positive");
    const VectorXd eta = params.eta.size() == m ? params.eta : VectorXd::Zero(m);
    const MatrixXd& K = params.K;

    VectorXd x = initial_state(cfg, m);
    VectorXd s = K * x;  // s_j = sum_k K(j, k) x_k, kept current
    MatrixXd out(n, m);
    const long total = static_cast<long>(cfg.burn_in) + static_cast<long>(n) * cfg.thin;
    Index row = 0;
    for (long sweep = 1; sweep <= total; ++sweep) {
        for (Index j = 0; j < m; ++j) {
            const double kjj = K(j, j);
            const double rest = s(j) - kjj * x(j);
            const double nx = sample_truncated_normal_uni((eta(j) - rest) / kjj, 1.0 / std::sqrt(kjj), rng);
            const double d = nx - x(j);
            if (d != 0.0) {
                s.noalias() += d * K.col(j);
                x(j) = nx;
            }
        }
        if (sweep > cfg.burn_in && (sweep - cfg.burn_in) % cfg.thin == 0) out.row(row++) = x.transpose();
    }
    return Dataset{std::move(out), VectorXd::Ones(m)};
}

namespace {

// Log-density of log X_j given the rest, as a function of t = log x
// (includes the Jacobian e^t).
struct Conditional {
    double a, b, kjj, s, eta;
    bool centered;

    double operator()(double t) const {
        const double xa = std::exp(a * t);
        double v = -kjj * xa * xa / (2.0 * a) - s * xa / a + t;
        if (!centered && eta != 0.0) v += b == 0.0 ? eta * t : eta * std::expm1(b * t) / b;
        return std::isnan(v) ? -std::numeric_limits<double>::infinity() : v;
    }
};

class GridInverter {
public:
    explicit GridInverter(int points) : t_(points), cdf_(points) {}

    double draw(const Conditional& f, Index coord, double cap, Rng& rng) {
        // Mode: coarse scan then golden-section refinement.
        double best_t = 0.0;
        double best = -std::numeric_limits<double>::infinity();
        const double hi_scan = cap > 0.0 ? std::log(cap) : 40.0;
        for (double t = -40.0; t <= hi_scan; t += 0.25) {
            const double v = f(t);
            if (v > best) {
                best = v;
                best_t = t;
            }
        }
        if (!std::isfinite(best)) {
            throw NumericError("conditional density of coordinate " + std::to_string(coord) +
                               " underflows everywhere");
        }
        double lo = best_t - 0.25, hi = std::min(best_t + 0.25, hi_scan);
        constexpr double gr = 0.6180339887498949;
        for (int it = 0; it < 60; ++it) {
            const double c = hi - gr * (hi - lo);
            const double d = lo + gr * (hi - lo);
            if (f(c) >= f(d)) hi = d; else lo = c;
        }
        const double mode_t = 0.5 * (lo + hi);
        const double fmax = std::max(best, f(mode_t));
        const double floor = fmax - 40.0;

        auto cutoff = [&](double dir, double limit) {
            double step = 1.0;
            double inside = mode_t;
            double t = mode_t + dir * step;
            while (f(t) > floor) {
                if (dir > 0 && t >= limit) return limit;
                inside = t;
                step *= 2.0;
                t = mode_t + dir * step;
                if (step > 1e4) return t;
            }
            if (dir > 0 && t > limit) t = limit;
            for (int it = 0; it < 40; ++it) {
                const double mid = 0.5 * (inside + t);
                if (f(mid) > floor) inside = mid; else t = mid;
            }
            return t;
        };
        const double t_hi = cutoff(1.0, cap > 0.0 ? std::log(cap) : std::numeric_limits<double>::infinity());
        const double t_lo = cutoff(-1.0, 0.0);

        const int G = static_cast<int>(t_.size());
        const double h = (t_hi - t_lo) / (G - 1);
        double prev_w = 0.0;
        for (int k = 0; k < G; ++k) {
            t_[k] = t_lo + h * k;
            const double w = std::exp(f(t_[k]) - fmax);
            cdf_[k] = k == 0 ? 0.0 : cdf_[k - 1] + 0.5 * h * (w + prev_w);
            prev_w = w;
        }
        const double mass = cdf_[G - 1];
        if (!(mass > 0.0) || !std::isfinite(mass))
            throw NumericError("conditional mass of coordinate " + std::to_string(coord) + " underflows");
        const double u = rng.uniform() * mass;
        const auto it = std::lower_bound(cdf_.begin(), cdf_.end(), u);
        const auto k = std::clamp<std::ptrdiff_t>(it - cdf_.begin(), 1, G - 1);
        const double c0 = cdf_[k - 1], c1 = cdf_[k];
        const double frac = c1 > c0 ? (u - c0) / (c1 - c0) : 0.5;
        return std::exp(t_[k - 1] + frac * h);
    }

private:
    std::vector<double> t_;
    std::vector<double> cdf_;
};

} // namespace

Dataset sample_pairwise_gibbs(const ModelSpec& spec, const InteractionParams& params, Index n,
                              const GibbsConfig& cfg, Rng& rng) {
    spec.validate();
    cfg.validate();
    const Index m = params.dim();
    if (params.K.cols() != m) throw DomainError("K must be square");
    if (n < 1) throw DomainError("sample size must be >= 1");
    if (!spec.centered && params.eta.size() != m) throw DomainError("non-centered model needs eta");
    for (Index j = 0; j < m; ++j)
        if (!(params.K(j, j) > 0.0))
            throw DomainError("K(" + std::to_string(j) + ", " + std::to_string(j) + ") must be positive");
    const MatrixXd& K = params.K;

    VectorXd x = initial_state(cfg, m);
    VectorXd xa = x.array().pow(spec.a).matrix();
    VectorXd s = K * xa;
    GridInverter inv(cfg.grid_points);
    MatrixXd out(n, m);
    const long total = static_cast<long>(cfg.burn_in) + static_cast<long>(n) * cfg.thin;
    Index row = 0;
    for (long sweep = 1; sweep <= total; ++sweep) {
        for (Index j = 0; j < m; ++j) {
            const double kjj = K(j, j);
            Conditional f{spec.a, spec.b, kjj, s(j) - kjj * xa(j), spec.centered ? 0.0 : params.eta(j),
                          spec.centered};
            const double nx = inv.draw(f, j, cfg.domain_cap, rng);
            const double nxa = std::pow(nx, spec.a);
            const double d = nxa - xa(j);
            if (d != 0.0) s.noalias() += d * K.col(j);
            x(j) = nx;
            xa(j) = nxa;
        }
        if (sweep > cfg.burn_in && (sweep - cfg.burn_in) % cfg.thin == 0) out.row(row++) = x.transpose();
    }
    return Dataset{std::move(out), VectorXd::Ones(m)};
}

} // namespace gsm
