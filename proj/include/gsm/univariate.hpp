#pragma once

#include "gsm/model.hpp"

#include <functional>
#include <string>
#include <vector>

namespace gsm {

// Univariate truncated normal N(mu, sigma^2) restricted to [0, inf).

enum class UniTarget { mu, sigma2 };

std::string to_string(UniTarget t);
UniTarget uni_target_from_string(const std::string& s);

struct QuadratureConfig {
    double rel_tol = 1e-8;
    double tail_mass = 1e-12;  // relative mass left beyond the upper limit
    unsigned max_depth = 20;
};

/// mu_hat = sum(h(X) X - sigma2 h'(X)) / sum h(X).
double estimate_mu(const VectorXd& data, double sigma2, const HSpec& h);

/// sigma2_hat = sum h(X)(X - mu)^2 / sum [h(X) + h'(X)(X - mu)].
double estimate_sigma2(const VectorXd& data, double mu, const HSpec& h);

/// E[f(X)] for X ~ truncated N(mu, sigma^2) by adaptive Gauss-Kronrod
/// quadrature; `breaks` are extra panel edges (kinks of f).
double tn_expectation(const std::function<double(double)>& f, double mu, double sigma,
                      const std::vector<double>& breaks, const QuadratureConfig& quad = {});

/// Asymptotic variance of sqrt(n)(estimate - truth).
///   target mu:     param0 = mu0,      known = sigma^2
///   target sigma2: param0 = sigma0^2, known = mu
double asymptotic_variance(UniTarget target, double param0, double known, const HSpec& h,
                           const QuadratureConfig& quad = {});

double cramer_rao(UniTarget target, double param0, double known, const QuadratureConfig& quad = {});

struct UnivariateRow {
    UniTarget target;
    double param0;
    std::string h_spec;
    double asy_var;
    double cr_bound;
    double efficiency;   // cr_bound / asy_var
    std::string error;   // empty when the row succeeded
};

struct UnivariateStudy {
    UniTarget target = UniTarget::mu;
    double known_value = 1.0;
    std::vector<double> grid;
    std::vector<HSpec> hspecs;

    void validate() const;
};

/// start:stop:step, inclusive of stop up to rounding.
std::vector<double> parse_grid(const std::string& text);

std::vector<UnivariateRow> run_univariate_study(const UnivariateStudy& study, const QuadratureConfig& quad = {});

} // namespace gsm
