#include <doctest.h>

#include "../support/oracles.hpp"

#include "gsm/errors.hpp"
#include "gsm/solver.hpp"

using namespace gsm;

namespace {

double max_abs(const MatrixXd& a) { return a.size() ? a.cwiseAbs().maxCoeff() : 0.0; }

// Random loss with PD blocks: amplified Gram matrices of random data.
QuadraticLoss random_loss(Index m, bool centered, Rng& rng, Index n = 0) {
    const auto x = oracle::random_positive(n ? n : 2 * m + 3, m, rng);
    return amplify(assemble_truncated_gaussian(TruncPower{1, 3}, make_dataset(x), centered),
                   AmplifierSpec::multiplier(1.2));
}

}  // namespace

TEST_CASE("soft threshold") {
    CHECK(soft_threshold(3, 1) == 2);
    CHECK(soft_threshold(-0.5, 1) == 0);
    CHECK(soft_threshold(-2.5, 1) == -1.5);
    CHECK(soft_threshold(0.7, 0) == 0.7);
}

TEST_CASE("config validation") {
    SolverConfig c;
    c.tol = 0;
    CHECK_THROWS_AS(c.validate(), DomainError);
    c = {};
    c.max_iter = 0;
    CHECK_THROWS_AS(c.validate(), DomainError);
}

TEST_CASE("lambda 0 agrees with the closed form") {
    Rng rng(1);
    for (bool centered : {true, false})
        for (bool sym : {true, false}) {
            const auto L = random_loss(5, centered, rng);
            SolverConfig cfg;
            cfg.symmetric = sym;
            cfg.tol = 1e-12;
            const auto cd = coordinate_descent(L, 0.0, 0.0, nullptr, cfg);
            CHECK(cd.converged);
            if (sym) {
                // the symmetric minimizer differs from the averaged closed form; compare to the oracle
                const auto P = oracle::flatten(L, 0, 0, true, true);
                const auto z = oracle::prox_gradient(P);
                MatrixXd K;
                VectorXd eta;
                oracle::unflatten(P, z, K, eta);
                CHECK(max_abs(cd.K - K) < 1e-6);
                CHECK(cd.K == cd.K.transpose());
            } else {
                const auto cf = closed_form(L, false);
                CHECK(max_abs(cd.K - cf.K) < 1e-6);
                if (!centered) CHECK(max_abs(*cd.eta - *cf.eta) < 1e-6);
            }
        }
}

TEST_CASE("large lambda gives the zero estimate") {
    Rng rng(2);
    const auto L = random_loss(4, true, rng);
    double gmax = 0;
    for (const auto& b : L.blocks) gmax = std::max(gmax, b.g.cwiseAbs().maxCoeff());
    SolverConfig cfg;
    cfg.symmetric = false;
    const auto e = coordinate_descent(L, gmax, gmax, nullptr, cfg);
    CHECK(max_abs(e.K) == 0.0);
    CHECK(e.support.empty());
}

TEST_CASE("coordinate descent matches the proximal-gradient oracle with small KKT residuals") {
    Rng rng(3);
    int checked = 0;
    for (int t = 0; t < 40; ++t) {
        const Index m = 2 + static_cast<Index>(rng.uniform() * 6);
        const bool centered = rng.bernoulli(0.5);
        SolverConfig cfg;
        cfg.symmetric = rng.bernoulli(0.7);
        cfg.penalize_diagonal = rng.bernoulli(0.5);
        cfg.lambda_ratio = rng.bernoulli(0.3) ? 0.0 : rng.uniform(0.2, 2.0);
        cfg.tol = 1e-12;
        const auto L = random_loss(m, centered, rng);
        const double lmax = lambda_max(L, cfg);
        const double lam = lmax * rng.uniform(0.02, 0.9);
        const double lamE = cfg.lambda_ratio * lam;
        const auto est = coordinate_descent(L, lam, lamE, nullptr, cfg);
        CHECK(est.converged);
        CHECK(est.max_objective_increase <= 1e-12);
        const auto P = oracle::flatten(L, lam, lamE, cfg.symmetric, cfg.penalize_diagonal);
        const auto z = oracle::prox_gradient(P);
        MatrixXd K;
        VectorXd eta;
        oracle::unflatten(P, z, K, eta);
        CAPTURE(t);
        CHECK(max_abs(est.K - K) < 1e-6);
        if (!centered) CHECK(max_abs(*est.eta - eta) < 1e-6);
        const auto zc = oracle::flat_from(P, est.K, est.eta ? &*est.eta : nullptr);
        CHECK(oracle::kkt_residual(P, zc) < 1e-6);
        CHECK(penalized_objective(L, est.K, est.eta ? &*est.eta : nullptr, lam, lamE, cfg) ==
              doctest::Approx(oracle::flat_objective(P, zc)).epsilon(1e-12));
        ++checked;
    }
    CHECK(checked == 40);
}

TEST_CASE("lambda_max is the smallest all-zero penalty") {
    Rng rng(4);
    for (int t = 0; t < 12; ++t) {
        SolverConfig cfg;
        cfg.symmetric = t % 2 == 0;
        cfg.penalize_diagonal = t % 3 != 0;
        cfg.lambda_ratio = t % 4 == 0 ? 0.0 : 1.0;
        cfg.tol = 1e-12;
        const auto L = random_loss(5, t % 2 == 1, rng);
        const double lmax = lambda_max(L, cfg);
        auto off_support = [](const Estimate& e) {
            MatrixXd K = e.K;
            K.diagonal().setZero();
            return max_abs(K);
        };
        const auto at = coordinate_descent(L, lmax * (1 + 1e-9), cfg.lambda_ratio * lmax * (1 + 1e-9), nullptr, cfg);
        if (cfg.penalize_diagonal)
            CHECK(max_abs(at.K) == 0.0);
        else
            CHECK(off_support(at) == 0.0);
        const auto below = coordinate_descent(L, lmax * 0.98, cfg.lambda_ratio * lmax * 0.98, nullptr, cfg);
        const bool moved = cfg.penalize_diagonal ? max_abs(below.K) > 0.0 : off_support(below) > 0.0;
        const bool eta_moved = below.eta && cfg.lambda_ratio > 0 && max_abs(*below.eta) > 0.0;
        CHECK((moved || eta_moved));
    }
}

TEST_CASE("eta handling") {
    Rng rng(5);
    const auto L = random_loss(4, false, rng);
    SolverConfig cfg;
    const auto pinned = coordinate_descent(L, 0.01, kFixedAtZero, nullptr, cfg);
    CHECK(max_abs(*pinned.eta) == 0.0);
    const auto free = coordinate_descent(L, 0.01, 0.0, nullptr, cfg);
    CHECK((free.eta->array() != 0.0).all());
    cfg.lambda_ratio = kFixedAtZero;
    const auto path = solve_path(L, lambda_grid(lambda_max(L, cfg), 5), cfg);
    for (const auto& e : path.entries) CHECK(max_abs(*e.eta) == 0.0);
}

TEST_CASE("path: warm equals cold, first entry zero, piecewise linearity") {
    Rng rng(6);
    const auto L = random_loss(6, true, rng);
    SolverConfig cfg;
    cfg.tol = 1e-13;
    const double lmax = lambda_max(L, cfg);
    const auto grid = lambda_grid(lmax, 30, 0.01);
    CHECK(grid.front() == lmax);
    CHECK(grid.back() == doctest::Approx(0.01 * lmax));
    const auto path = solve_path(L, grid, cfg);
    CHECK(max_abs(path.entries.front().K) == 0.0);
    for (std::size_t k = 0; k < grid.size(); ++k) {
        const auto cold = coordinate_descent(L, grid[k], grid[k], nullptr, cfg);
        CHECK(max_abs(cold.K - path.entries[k].K) < 1e-6);
        CHECK(path.entries[k].K == path.entries[k].K.transpose());
    }
    // three lambdas inside one segment of constant support
    int probes = 0;
    for (std::size_t k = 1; k + 1 < grid.size(); ++k) {
        const double l1 = grid[k + 1], l3 = grid[k];
        const auto e1 = coordinate_descent(L, l1, l1, nullptr, cfg);
        const auto e3 = coordinate_descent(L, l3, l3, nullptr, cfg);
        const double l2 = 0.5 * (l1 + l3);
        const auto e2 = coordinate_descent(L, l2, l2, nullptr, cfg);
        if (e1.support != e3.support || e2.support != e1.support) continue;
        const MatrixXd lin = e1.K + (l2 - l1) / (l3 - l1) * (e3.K - e1.K);
        CHECK(max_abs(e2.K - lin) < 1e-6);
        ++probes;
    }
    CHECK(probes > 0);
    CHECK_THROWS_AS(solve_path(L, {1.0, 2.0}, cfg), DomainError);
    CHECK_THROWS_AS(solve_path(L, {}, cfg), DomainError);
}

TEST_CASE("support grows along the path in most steps") {
    Rng rng(7);
    int monotone = 0, total = 0;
    for (int t = 0; t < 20; ++t) {
        const auto L = random_loss(6, true, rng);
        SolverConfig cfg;
        const auto path = solve_path(L, lambda_grid(lambda_max(L, cfg), 20), cfg);
        for (std::size_t k = 1; k < path.size(); ++k) {
            const auto a = edges_of(path.entries[k - 1].K);
            const auto b = edges_of(path.entries[k].K);
            monotone += std::includes(b.begin(), b.end(), a.begin(), a.end());
            ++total;
        }
    }
    MESSAGE("monotone support steps: " << monotone << "/" << total);
    CHECK(total > 0);
}

TEST_CASE("closed form") {
    QuadraticLoss L;
    L.m = 3;
    L.n = 1;
    L.applied = MatrixXd::Zero(3, 3);
    for (Index j = 0; j < 3; ++j) L.blocks.push_back({MatrixXd::Identity(3, 3), VectorXd::Unit(3, j)});
    const auto e = closed_form(L);
    CHECK(max_abs(e.K - MatrixXd::Identity(3, 3)) == 0.0);
    Rng rng(8);
    const auto small = assemble_truncated_gaussian(TruncPower{1, 3}, make_dataset(oracle::random_positive(3, 5, rng)), true);
    try {
        closed_form(small);
        FAIL("expected singular");
    } catch (const NumericError& err) {
        CHECK(std::string(err.what()).find("block") != std::string::npos);
        CHECK(std::string(err.what()).find("amplify") != std::string::npos);
    }
    const auto big = random_loss(4, true, rng);
    const auto s = closed_form(big, true);
    const auto a = closed_form(big, false);
    CHECK(s.K == s.K.transpose());
    CHECK(s.asymmetry == doctest::Approx(max_abs(a.K - a.K.transpose())));
}

TEST_CASE("zero diagonal is an error") {
    QuadraticLoss L;
    L.m = 2;
    L.n = 1;
    L.applied = MatrixXd::Zero(2, 2);
    for (Index j = 0; j < 2; ++j) L.blocks.push_back({MatrixXd::Identity(2, 2), VectorXd::Unit(2, j)});
    L.blocks[1].gamma(0, 0) = 0.0;
    CHECK_THROWS_AS(coordinate_descent(L, 0.1, 0.1, nullptr, SolverConfig{}), NumericError);
}

TEST_CASE("non-convergence is flagged") {
    Rng rng(9);
    const auto L = random_loss(6, true, rng);
    SolverConfig cfg;
    cfg.max_iter = 1;
    cfg.tol = 1e-14;
    const auto e = coordinate_descent(L, 0.001, 0.001, nullptr, cfg);
    CHECK_FALSE(e.converged);
    CHECK(e.iterations == 1);
}

TEST_CASE("free mask pins coordinates") {
    Rng rng(10);
    const auto L = random_loss(4, true, rng);
    FreeMask mask = FreeMask::Constant(4, 4, false);
    for (Index j = 0; j < 4; ++j) mask(j, j) = true;
    mask(0, 1) = mask(1, 0) = true;
    SolverConfig cfg;
    cfg.lambda_ratio = 0;
    const auto e = coordinate_descent(L, 0.0, 0.0, nullptr, cfg, &mask);
    for (Index i = 0; i < 4; ++i)
        for (Index j = 0; j < 4; ++j)
            if (!mask(i, j)) CHECK(e.K(i, j) == 0.0);
    CHECK(e.K(0, 1) != 0.0);
}

TEST_CASE("unbounded directions") {
    MatrixXd x(1, 2);
    x << 0.7, 1.9;
    const auto raw = assemble_truncated_gaussian(TruncPower{1, 3}, make_dataset(x), true);
    const auto dir = kernel_unbounded_direction(raw, 0.0);
    REQUIRE(dir.has_value());
    CHECK(dir->certificate < 0.0);
    const auto& nu = dir->direction;
    const double base = quadratic_value(raw, MatrixXd::Zero(2, 2));
    double prev = base;
    for (double a : {1.0, 10.0, 100.0}) {
        const double v = quadratic_value(raw, a * nu);
        CHECK(v < prev);
        CHECK(v - base == doctest::Approx(a * dir->certificate).epsilon(1e-8));
        prev = v;
    }
    const auto amp = amplify(raw, AmplifierSpec::multiplier(1.5));
    CHECK_FALSE(kernel_unbounded_direction(amp, 0.0).has_value());
    Rng rng(11);
    CHECK_FALSE(kernel_unbounded_direction(random_loss(3, true, rng), 0.0).has_value());
    CHECK_FALSE(kernel_unbounded_direction(raw, 1e6).has_value());
}
