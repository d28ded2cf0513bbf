#include "gsm/model.hpp"

#include "gsm/errors.hpp"
#include "gsm/rng.hpp"

#include <algorithm>
#include <charconv>
#include <functional>
#include <cmath>
#include <limits>
#include <sstream>

namespace gsm {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

template <class... Ts>
struct Overloaded : Ts... { using Ts::operator()...; };
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

double parse_number(std::string_view s, std::string_view whole) {
    if (s == "inf" || s == "Inf" || s == "+inf") return kInf;
    double v = 0.0;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc{} || ptr != last)
        throw DomainError("cannot parse number '" + std::string(s) + "' in h spec '" + std::string(whole) + "'");
    return v;
}

std::string format_number(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(sep, start);
        if (pos == std::string_view::npos) {
            out.push_back(s.substr(start));
            break;
        }
        out.push_back(s.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

// Exponent r and coefficient C > 0 with h(x) ~ C x^r as x -> 0+.
double origin_power(const HSpec& h) {
    return std::visit(Overloaded{
                          [](const TruncPower& t) { return t.p; },
                          [](const Log1pTrunc&) { return 1.0; },
                          [](const Mcp&) { return 1.0; },
                          [](const Scad&) { return 1.0; },
                          [](const Constant&) { return 0.0; },
                      },
                      h);
}

double quad_form(const MatrixXd& S, const VectorXd& v) { return v.dot(S * v); }

} // namespace

void ModelSpec::validate() const {
    if (!(a > 0.0) || !std::isfinite(a)) throw DomainError("model exponent a must be positive");
    if (!(b >= 0.0) || !std::isfinite(b)) throw DomainError("model exponent b must be non-negative");
}

void InteractionParams::validate() const {
    if (K.rows() != K.cols()) throw DomainError("interaction matrix K must be square");
    if (eta.size() != 0 && eta.size() != K.rows())
        throw DomainError("eta length must equal the dimension of K");
}

// ---------------------------------------------------------------------------

void validate_hspec(const HSpec& h) {
    std::visit(Overloaded{
                   [](const TruncPower& t) {
                       if (!(t.p >= 0.0) || !std::isfinite(t.p)) throw DomainError("pow: power must be finite and >= 0");
                       if (!(t.c > 0.0)) throw DomainError("pow: truncation constant must be positive");
                   },
                   [](const Log1pTrunc& t) {
                       if (!(t.c > 0.0)) throw DomainError("log1p: truncation constant must be positive");
                   },
                   [](const Mcp& t) {
                       if (!(t.lam > 0.0) || !(t.gam > 0.0) || !std::isfinite(t.lam) || !std::isfinite(t.gam))
                           throw DomainError("mcp: lam and gam must be positive and finite");
                   },
                   [](const Scad& t) {
                       if (!(t.lam > 0.0) || !std::isfinite(t.lam) || !(t.gam > 2.0) || !std::isfinite(t.gam))
                           throw DomainError("scad: lam must be positive and gam > 2");
                   },
                   [](const Constant& t) {
                       if (!(t.v > 0.0) || !std::isfinite(t.v)) throw DomainError("const: value must be positive");
                   },
               },
               h);
}

HSpec parse_hspec(std::string_view text) {
    const auto parts = split(text, ':');
    const auto& kind = parts.front();
    auto expect = [&](std::size_t count) {
        if (parts.size() != count)
            throw DomainError("h spec '" + std::string(text) + "' has the wrong number of fields");
    };
    HSpec h;
    if (kind == "pow") {
        expect(3);
        h = TruncPower{parse_number(parts[1], text), parse_number(parts[2], text)};
    } else if (kind == "log1p") {
        expect(2);
        h = Log1pTrunc{parse_number(parts[1], text)};
    } else if (kind == "mcp") {
        expect(3);
        h = Mcp{parse_number(parts[1], text), parse_number(parts[2], text)};
    } else if (kind == "scad") {
        expect(3);
        h = Scad{parse_number(parts[1], text), parse_number(parts[2], text)};
    } else if (kind == "const") {
        expect(2);
        h = Constant{parse_number(parts[1], text)};
    } else {
        throw DomainError("unknown h kind '" + std::string(kind) + "'");
    }
    validate_hspec(h);
    return h;
}

std::vector<HSpec> parse_hspec_list(std::string_view text) {
    std::vector<HSpec> out;
    for (auto part : split(text, ',')) {
        if (!part.empty()) out.push_back(parse_hspec(part));
    }
    if (out.empty()) throw DomainError("empty h spec list");
    return out;
}

std::string format_hspec(const HSpec& h) {
    return std::visit(Overloaded{
                          [](const TruncPower& t) { return "pow:" + format_number(t.p) + ":" + format_number(t.c); },
                          [](const Log1pTrunc& t) { return "log1p:" + format_number(t.c); },
                          [](const Mcp& t) { return "mcp:" + format_number(t.lam) + ":" + format_number(t.gam); },
                          [](const Scad& t) { return "scad:" + format_number(t.lam) + ":" + format_number(t.gam); },
                          [](const Constant& t) { return "const:" + format_number(t.v); },
                      },
                      h);
}

HValue h_eval_closed(const HSpec& h, double x) {
    if (!(x >= 0.0)) throw DomainError("h is defined on [0, inf) only");
    return std::visit(
        Overloaded{
            [x](const TruncPower& t) -> HValue {
                if (t.p == 0.0) return {std::min(1.0, t.c), 0.0};
                const double xp = std::pow(x, t.p);
                if (xp <= t.c) {
                    double d;
                    if (x == 0.0)
                        d = t.p > 1.0 ? 0.0 : (t.p == 1.0 ? 1.0 : kInf);
                    else
                        d = t.p * xp / x;
                    return {xp, d};
                }
                return {t.c, 0.0};
            },
            [x](const Log1pTrunc& t) -> HValue {
                const double v = std::log1p(x);
                if (v <= t.c) return {v, 1.0 / (1.0 + x)};
                return {t.c, 0.0};
            },
            [x](const Mcp& t) -> HValue {
                if (x <= t.gam * t.lam) return {t.lam * x - x * x / (2.0 * t.gam), t.lam - x / t.gam};
                return {0.5 * t.gam * t.lam * t.lam, 0.0};
            },
            [x](const Scad& t) -> HValue {
                if (x <= t.lam) return {t.lam * x, t.lam};
                if (x <= t.gam * t.lam)
                    return {(2.0 * t.gam * t.lam * x - x * x - t.lam * t.lam) / (2.0 * (t.gam - 1.0)),
                            (t.gam * t.lam - x) / (t.gam - 1.0)};
                return {t.lam * t.lam * (t.gam + 1.0) / 2.0, 0.0};
            },
            [](const Constant& t) -> HValue { return {t.v, 0.0}; },
        },
        h);
}

HValue h_eval(const HSpec& h, double x) {
    if (!(x > 0.0)) throw DomainError("h_eval requires x > 0");
    return h_eval_closed(h, x);
}

std::vector<double> h_knots(const HSpec& h) {
    return std::visit(Overloaded{
                          [](const TruncPower& t) -> std::vector<double> {
                              if (t.p == 0.0 || std::isinf(t.c)) return {};
                              return {std::pow(t.c, 1.0 / t.p)};
                          },
                          [](const Log1pTrunc& t) -> std::vector<double> {
                              if (std::isinf(t.c)) return {};
                              return {std::expm1(t.c)};
                          },
                          [](const Mcp& t) -> std::vector<double> { return {t.gam * t.lam}; },
                          [](const Scad& t) -> std::vector<double> { return {t.lam, t.gam * t.lam}; },
                          [](const Constant&) -> std::vector<double> { return {}; },
                      },
                      h);
}

Admissibility h_admissible(const HSpec& h, const ModelSpec& spec, std::optional<double> eta_min) {
    Admissibility out;
    try {
        validate_hspec(h);
    } catch (const DomainError& e) {
        out.admissible = false;
        out.failed = AdmissibilityClause::positivity;
        out.reason = e.what();
        return out;
    }
    // Every menu entry is absolutely continuous, positive on (0, inf) and
    // bounded by piecewise powers once its parameters are valid.
    double q;
    if (spec.centered)
        q = 1.0 - spec.a;
    else if (spec.b > 0.0)
        q = std::max(1.0 - spec.a, 1.0 - spec.b);
    else
        q = eta_min ? 1.0 - *eta_min : 2.0;

    // h(x) ~ C x^r near 0 with C > 0, so h(x)/x^q -> 0 iff r > q.
    const double r = origin_power(h);
    if (!(r > q)) {
        out.admissible = false;
        out.failed = AdmissibilityClause::origin;
        std::ostringstream os;
        os << "h(x) behaves like x^" << r << " at the origin but must be o(x^" << q << ")";
        out.reason = os.str();
    }
    return out;
}

// ---------------------------------------------------------------------------

Dataset make_dataset(MatrixXd x, bool strictly_positive) {
    for (Index j = 0; j < x.cols(); ++j) {
        for (Index i = 0; i < x.rows(); ++i) {
            const double v = x(i, j);
            if (!std::isfinite(v) || v < 0.0 || (strictly_positive && v == 0.0)) {
                std::ostringstream os;
                os << "data entry (" << i << ", " << j << ") = " << v << " is outside the model domain";
                throw DomainError(os.str());
            }
        }
    }
    Dataset d;
    d.scale = VectorXd::Ones(x.cols());
    d.x = std::move(x);
    return d;
}

Dataset standardize(const Dataset& data) {
    Dataset out = data;
    const double n = static_cast<double>(data.n());
    for (Index j = 0; j < data.m(); ++j) {
        const double s = data.x.col(j).norm() / std::sqrt(n);
        if (!(s > 0.0)) throw DomainError("column " + std::to_string(j) + " is identically zero");
        out.x.col(j) /= s;
        out.scale(j) = data.scale(j) * s;
    }
    return out;
}

double log_density_unnorm(const ModelSpec& spec, const InteractionParams& params,
                          const Eigen::Ref<const VectorXd>& x) {
    spec.validate();
    params.validate();
    const Index m = params.dim();
    if (x.size() != m) throw DomainError("point dimension does not match K");
    for (Index j = 0; j < m; ++j) {
        if (!(x(j) >= 0.0)) throw DomainError("log density evaluated outside the orthant");
        if (!spec.centered && spec.b == 0.0 && x(j) == 0.0)
            throw DomainError("coordinate " + std::to_string(j) + " is zero but b = 0 requires x > 0");
    }
    const VectorXd xa = x.array().pow(spec.a).matrix();
    double value = -xa.dot(params.K * xa) / (2.0 * spec.a);
    if (!spec.centered && params.eta.size() == m) {
        for (Index j = 0; j < m; ++j) {
            const double lx = std::log(x(j));
            const double t = spec.b == 0.0 ? lx : (x(j) == 0.0 ? -1.0 / spec.b : std::expm1(spec.b * lx) / spec.b);
            value += params.eta(j) * t;
        }
    }
    return value;
}

// ---------------------------------------------------------------------------

namespace {

// Minimizes v'Sv over the unit simplex from `v` by projected gradient steps
// restricted to the support-preserving exchange of mass between the best
// and worst coordinates (a Frank-Wolfe / pairwise step).
void refine_on_simplex(const MatrixXd& S, VectorXd& v, int iters) {
    const Index m = v.size();
    for (int it = 0; it < iters; ++it) {
        const VectorXd grad = 2.0 * S * v;
        Index lo = 0, hi = -1;
        grad.minCoeff(&lo);
        double worst = -std::numeric_limits<double>::infinity();
        for (Index k = 0; k < m; ++k) {
            if (v(k) > 0.0 && grad(k) > worst) {
                worst = grad(k);
                hi = k;
            }
        }
        if (hi < 0 || hi == lo || worst - grad(lo) <= 1e-15) break;
        // Move mass t from hi to lo; q(t) = q0 + t*(grad_lo - grad_hi) + t^2 * curv.
        const double slope = grad(lo) - grad(hi);
        const double curv = S(lo, lo) + S(hi, hi) - 2.0 * S(lo, hi);
        double t = v(hi);
        if (curv > 0.0) t = std::min(t, -slope / (2.0 * curv));
        if (t <= 0.0) break;
        v(lo) += t;
        v(hi) -= t;
        if (v(hi) < 1e-300) v(hi) = 0.0;
    }
}

bool enumerate_simplex(Index m, int res, long cap, const std::function<void(const VectorXd&)>& visit) {
    // Number of grid points is C(res + m - 1, m - 1).
    double count = 1.0;
    for (Index k = 1; k < m; ++k) {
        count *= static_cast<double>(res + k) / static_cast<double>(k);
        if (count > static_cast<double>(cap)) return false;
    }
    std::vector<int> parts(static_cast<std::size_t>(m), 0);
    VectorXd v(m);
    std::function<void(Index, int)> rec = [&](Index k, int left) {
        if (k == m - 1) {
            parts[static_cast<std::size_t>(k)] = left;
            for (Index i = 0; i < m; ++i) v(i) = static_cast<double>(parts[static_cast<std::size_t>(i)]) / res;
            visit(v);
            return;
        }
        for (int c = 0; c <= left; ++c) {
            parts[static_cast<std::size_t>(k)] = c;
            rec(k + 1, left - c);
        }
    };
    rec(0, res);
    return true;
}

} // namespace

CopositivityResult is_strictly_copositive(const MatrixXd& K, const CopositivityConfig& cfg) {
    if (K.rows() != K.cols()) throw DomainError("co-positivity test needs a square matrix");
    const Index m = K.rows();
    CopositivityResult out;
    if (m == 0) {
        out.status = CopositivityStatus::proven_yes;
        return out;
    }
    const MatrixXd S = 0.5 * (K + K.transpose());

    if ((S.array() >= 0.0).all() && (S.diagonal().array() > 0.0).all()) {
        out.status = CopositivityStatus::proven_yes;
        return out;
    }
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(S, Eigen::EigenvaluesOnly);
    if (eig.eigenvalues()(0) > cfg.pd_tol) {
        out.status = CopositivityStatus::proven_yes;
        return out;
    }

    VectorXd best = VectorXd::Zero(m);
    double best_val = std::numeric_limits<double>::infinity();
    auto consider = [&](const VectorXd& v) {
        const double q = quad_form(S, v);
        if (q < best_val) {
            best_val = q;
            best = v;
        }
    };

    // Vertices and exact minimization along every edge of the simplex.
    for (Index i = 0; i < m; ++i) {
        VectorXd v = VectorXd::Zero(m);
        v(i) = 1.0;
        consider(v);
        for (Index j = i + 1; j < m; ++j) {
            // v = t e_i + (1 - t) e_j
            const double curv = S(i, i) + S(j, j) - 2.0 * S(i, j);
            const double lin = 2.0 * (S(i, j) - S(j, j));
            if (curv > 0.0) {
                const double t = std::clamp(-lin / (2.0 * curv), 0.0, 1.0);
                VectorXd w = VectorXd::Zero(m);
                w(i) = t;
                w(j) = 1.0 - t;
                consider(w);
            }
        }
    }

    const bool gridded = enumerate_simplex(m, cfg.grid_points, cfg.max_grid_evals, consider);
    if (!gridded) {
        Rng rng(cfg.seed);
        VectorXd v(m);
        for (long s = 0; s < cfg.max_grid_evals / std::max<Index>(m, 1); ++s) {
            for (Index i = 0; i < m; ++i) v(i) = -std::log(rng.uniform());
            v /= v.sum();
            consider(v);
        }
    }

    refine_on_simplex(S, best, cfg.refine_iters);
    best /= best.sum();
    const double val = quad_form(K, best);
    if (val <= 0.0) {
        out.status = CopositivityStatus::proven_no;
        out.witness = best;
        out.witness_value = val;
        return out;
    }
    out.status = CopositivityStatus::unknown;
    return out;
}

NormalizabilityVerdict check_normalizable(const ModelSpec& spec, const InteractionParams& params,
                                          const CopositivityConfig& cfg) {
    spec.validate();
    params.validate();
    NormalizabilityVerdict v;
    const auto cc1 = is_strictly_copositive(params.K, cfg);
    if (cc1.status == CopositivityStatus::proven_no) {
        v.status = NormalizabilityStatus::violated;
        v.condition = "CC1";
        return v;
    }
    if (!spec.centered) {
        if (spec.b > 0.0) {
            if (!(2.0 * spec.a > spec.b)) {
                v.status = NormalizabilityStatus::violated;
                v.condition = "CC2";
                return v;
            }
        } else {
            if (params.eta.size() != params.dim())
                throw DomainError("non-centered model needs eta of length m");
            if (!(params.eta.array() > -1.0).all()) {
                v.status = NormalizabilityStatus::violated;
                v.condition = "CC3";
                return v;
            }
        }
    }
    if (cc1.status == CopositivityStatus::unknown) {
        v.status = NormalizabilityStatus::unknown;
        v.condition = "CC1";
        return v;
    }
    v.status = NormalizabilityStatus::ok;
    return v;
}

} // namespace gsm
