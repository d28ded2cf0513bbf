#include "gsm/univariate.hpp"

#include "gsm/errors.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/erf.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numbers>
#include <sstream>

namespace gsm {

std::string to_string(UniTarget t) { return t == UniTarget::mu ? "mu" : "sigma2"; }

UniTarget uni_target_from_string(const std::string& s) {
    if (s == "mu") return UniTarget::mu;
    if (s == "sigma2") return UniTarget::sigma2;
    throw DomainError("target must be mu or sigma2, got '" + s + "'");
}

namespace {

void check_sample(const VectorXd& data) {
    if (data.size() == 0) throw DomainError("sample is empty");
    for (Index i = 0; i < data.size(); ++i)
        if (!(data(i) > 0.0))
            throw DomainError("sample entry " + std::to_string(i) + " must be positive");
}

} // namespace

double estimate_mu(const VectorXd& data, double sigma2, const HSpec& h) {
    check_sample(data);
    if (!(sigma2 > 0.0)) throw DomainError("sigma2 must be positive");
    double num = 0.0, den = 0.0;
    for (Index i = 0; i < data.size(); ++i) {
        const auto v = h_eval(h, data(i));
        num += v.value * data(i) - sigma2 * v.deriv;
        den += v.value;
    }
    if (den == 0.0) throw NumericError("sum of h over the sample is zero");
    return num / den;
}

double estimate_sigma2(const VectorXd& data, double mu, const HSpec& h) {
    check_sample(data);
    double num = 0.0, den = 0.0;
    for (Index i = 0; i < data.size(); ++i) {
        const auto v = h_eval(h, data(i));
        const double r = data(i) - mu;
        num += v.value * r * r;
        den += v.value + v.deriv * r;
    }
    if (den == 0.0) throw NumericError("denominator of the sigma2 estimator is zero");
    return num / den;
}

double tn_expectation(const std::function<double(double)>& f, double mu, double sigma,
                      const std::vector<double>& breaks, const QuadratureConfig& quad) {
    if (!(sigma > 0.0)) throw DomainError("sigma must be positive");
    using std::numbers::sqrt2;
    const double tail = std::erfc(-mu / (sigma * sqrt2));  // 2 P(N(mu, sigma^2) >= 0)
    if (!(tail > 0.0)) throw NumericError("truncated normal mass underflows (mu / sigma too negative)");
    const double log_norm = std::log(0.5 * tail) + std::log(sigma * std::sqrt(2.0 * std::numbers::pi));
    const double upper = mu + sigma * sqrt2 * boost::math::erfc_inv(quad.tail_mass * tail);

    std::vector<double> edges{0.0, upper};
    auto add = [&](double e) {
        if (e > 0.0 && e < upper) edges.push_back(e);
    };
    for (double b : breaks) add(b);
    add(mu);
    for (double s : {1e-3, 1e-2, 1e-1, 1.0}) add(s * sigma);
    if (mu < 0.0)
        for (double s : {0.1, 1.0, 10.0}) add(s * sigma * sigma / -mu);
    std::sort(edges.begin(), edges.end());
    // merge near-duplicates; a sliver panel defeats the error estimate
    edges.erase(std::unique(edges.begin(), edges.end(),
                            [](double a, double b) { return b - a <= 1e-9 * std::max(1.0, std::abs(b)); }),
                edges.end());
    edges.back() = upper;

    auto integrand = [&](double x) {
        const double z = (x - mu) / sigma;
        const double w = std::exp(-0.5 * z * z - log_norm);
        return w == 0.0 ? 0.0 : f(x) * w;
    };
    double total = 0.0;
    for (std::size_t k = 0; k + 1 < edges.size(); ++k) {
        double err = 0.0, l1 = 0.0;
        const double v = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
            integrand, edges[k], edges[k + 1], quad.max_depth, quad.rel_tol, &err, &l1);
        if (!std::isfinite(v) || !std::isfinite(err) || err > 1e-4 * std::max(l1, 1e-300) + 1e-300) {
            std::ostringstream os;
            os << "quadrature failed on [" << edges[k] << ", " << edges[k + 1]
               << "]; the expectation may diverge";
            throw NumericError(os.str());
        }
        total += v;
    }
    if (!std::isfinite(total) || std::abs(total) > 1e300) throw NumericError("expectation diverges");
    return total;
}

double asymptotic_variance(UniTarget target, double param0, double known, const HSpec& h,
                           const QuadratureConfig& quad) {
    validate_hspec(h);
    const auto knots = h_knots(h);
    auto hv = [&](double x) { return h_eval_closed(h, x); };
    if (target == UniTarget::mu) {
        const double mu0 = param0, s2 = known;
        if (!(s2 > 0.0)) throw DomainError("known variance must be positive");
        const double sigma = std::sqrt(s2);
        const double num = tn_expectation([&](double x) {
            const auto v = hv(x);
            return s2 * v.value * v.value + s2 * s2 * v.deriv * v.deriv;
        }, mu0, sigma, knots, quad);
        const double eh = tn_expectation([&](double x) { return hv(x).value; }, mu0, sigma, knots, quad);
        if (!(eh > 0.0)) throw NumericError("E[h(X)] is zero");
        return num / (eh * eh);
    }
    const double s2 = param0, mu = known;
    if (!(s2 > 0.0)) throw DomainError("sigma0^2 must be positive");
    const double sigma = std::sqrt(s2);
    const double e1 = tn_expectation([&](double x) {
        const auto v = hv(x);
        const double r = x - mu;
        return v.value * v.value * r * r;
    }, mu, sigma, knots, quad);
    const double e2 = tn_expectation([&](double x) {
        const auto v = hv(x);
        const double r = x - mu;
        return v.deriv * v.deriv * r * r;
    }, mu, sigma, knots, quad);
    const double den = tn_expectation([&](double x) {
        const double r = x - mu;
        return hv(x).value * r * r;
    }, mu, sigma, knots, quad);
    if (!(den > 0.0)) throw NumericError("E[h(X)(X - mu)^2] is zero");
    return (2.0 * s2 * s2 * s2 * e1 + s2 * s2 * s2 * s2 * e2) / (den * den);
}

double cramer_rao(UniTarget target, double param0, double known, const QuadratureConfig& quad) {
    if (target == UniTarget::mu) {
        const double mu0 = param0, s2 = known;
        if (!(s2 > 0.0)) throw DomainError("known variance must be positive");
        const double sigma = std::sqrt(s2);
        // Two passes so the variance does not suffer from cancellation.
        const double mean = tn_expectation([](double x) { return x; }, mu0, sigma, {}, quad);
        const double var = tn_expectation([&](double x) { return (x - mean) * (x - mean); }, mu0, sigma, {}, quad);
        return s2 * s2 / var;
    }
    const double s2 = param0, mu = known;
    if (!(s2 > 0.0)) throw DomainError("sigma0^2 must be positive");
    const double sigma = std::sqrt(s2);
    const double m2 = tn_expectation([&](double x) { return (x - mu) * (x - mu); }, mu, sigma, {}, quad);
    const double var = tn_expectation([&](double x) {
        const double q = (x - mu) * (x - mu) - m2;
        return q * q;
    }, mu, sigma, {}, quad);
    return 4.0 * s2 * s2 * s2 * s2 / var;
}

void UnivariateStudy::validate() const {
    if (grid.empty()) throw DomainError("study grid is empty");
    if (hspecs.empty()) throw DomainError("study needs at least one h");
    if (target == UniTarget::mu && !(known_value > 0.0)) throw DomainError("known variance must be positive");
    for (const auto& h : hspecs) validate_hspec(h);
}

std::vector<double> parse_grid(const std::string& text) {
    std::vector<double> parts;
    std::size_t start = 0;
    while (true) {
        const auto pos = text.find(':', start);
        const std::string piece = text.substr(start, pos == std::string::npos ? std::string::npos : pos - start);
        double v = 0.0;
        const auto res = std::from_chars(piece.data(), piece.data() + piece.size(), v);
        if (res.ec != std::errc() || res.ptr != piece.data() + piece.size())
            throw DomainError("bad grid '" + text + "', expected start:stop:step");
        parts.push_back(v);
        if (pos == std::string::npos) break;
        start = pos + 1;
    }
    if (parts.size() != 3) throw DomainError("bad grid '" + text + "', expected start:stop:step");
    const double a = parts[0], b = parts[1], step = parts[2];
    if (!(step > 0.0) || !(b >= a)) throw DomainError("grid needs step > 0 and stop >= start");
    const auto count = static_cast<long>(std::floor((b - a) / step + 1e-9)) + 1;
    std::vector<double> out;
    for (long k = 0; k < count; ++k) out.push_back(a + step * static_cast<double>(k));
    return out;
}

std::vector<UnivariateRow> run_univariate_study(const UnivariateStudy& study, const QuadratureConfig& quad) {
    study.validate();
    std::vector<UnivariateRow> rows;
    for (const auto& h : study.hspecs) {
        for (double p : study.grid) {
            UnivariateRow row{study.target, p, format_hspec(h), std::nan(""), std::nan(""), std::nan(""), {}};
            try {
                row.asy_var = asymptotic_variance(study.target, p, study.known_value, h, quad);
                row.cr_bound = cramer_rao(study.target, p, study.known_value, quad);
                row.efficiency = row.cr_bound / row.asy_var;
            } catch (const std::exception& e) {
                row.error = e.what();
            }
            rows.push_back(std::move(row));
        }
    }
    return rows;
}

} // namespace gsm
