#include <doctest.h>

#include "../support/oracles.hpp"

#include "gsm/errors.hpp"
#include "gsm/loss.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>

using namespace gsm;

namespace {

double max_abs(const MatrixXd& a) { return a.size() ? a.cwiseAbs().maxCoeff() : 0.0; }

std::vector<HSpec> hs() {
    return {TruncPower{1, 3}, TruncPower{2, INFINITY}, Log1pTrunc{1}, Mcp{1, 3}, Scad{0.5, 3}, TruncPower{1.5, 2}};
}

}  // namespace

TEST_CASE("truncated GGM block at n=1, m=2") {
    MatrixXd x(1, 2);
    x << 1, 1;
    const auto d = make_dataset(x);
    MatrixXd G(3, 3);
    G << 1, 1, -1, 1, 1, -1, -1, -1, 1;
    VectorXd g(3);
    g << 2, 1, -1;
    for (const auto& L : {assemble_pairwise(ModelSpec{1, 1, false}, {TruncPower{1, 3}}, d),
                          assemble_truncated_gaussian(TruncPower{1, 3}, d, false)}) {
        CHECK(L.layout == Layout::noncentered);
        CHECK(max_abs(L.blocks[0].gamma - G) < 1e-15);
        CHECK(max_abs(L.blocks[0].g - g) < 1e-15);
    }
}

TEST_CASE("pairwise(1,1) equals the truncated-GGM display for every h") {
    Rng rng(1);
    const auto x = oracle::random_positive(40, 5, rng);
    const auto d = make_dataset(x);
    for (const auto& h : hs())
        for (bool centered : {true, false}) {
            const auto A = assemble_pairwise(ModelSpec{1, 1, centered}, {h}, d);
            const auto B = assemble_truncated_gaussian(h, d, centered);
            for (Index j = 0; j < 5; ++j) {
                CHECK(max_abs(A.blocks[j].gamma - B.blocks[j].gamma) < 1e-12);
                CHECK(max_abs(A.blocks[j].g - B.blocks[j].g) < 1e-12);
            }
        }
}

TEST_CASE("factorized assembly equals the entrywise sums") {
    Rng rng(2);
    const auto x = oracle::random_positive(30, 4, rng);
    const auto d = make_dataset(x, true);
    for (auto [a, b] : std::vector<std::pair<double, double>>{{1, 1}, {0.5, 0.5}, {0.5, 0}, {1.5, 0.5}, {2, 1}})
        for (bool centered : {true, false}) {
            const ModelSpec spec{a, b, centered};
            const HSpec h = TruncPower{2.5, 3};
            const auto L = assemble_pairwise(spec, {h}, d);
            const auto E = oracle::entrywise_blocks(spec, h, x);
            for (Index j = 0; j < 4; ++j) {
                const double scale = 1.0 + max_abs(E[j].gamma);
                CHECK(max_abs(L.blocks[j].gamma - E[j].gamma) < 1e-12 * scale);
                CHECK(max_abs(L.blocks[j].g - E[j].g) < 1e-12 * (1.0 + max_abs(E[j].g)));
            }
        }
}

TEST_CASE("exponential and gamma models match their closed forms") {
    Rng rng(3);
    const auto x = oracle::random_positive(25, 4, rng);
    const auto d = make_dataset(x, true);
    for (const auto& h : hs()) {
        const auto E = assemble_pairwise(ModelSpec{0.5, 0.5, false}, {h}, d);
        const auto Eo = oracle::exponential_family_blocks(h, x, false);
        const auto G = assemble_pairwise(ModelSpec{0.5, 0, false}, {h}, d);
        const auto Go = oracle::exponential_family_blocks(h, x, true);
        for (Index j = 0; j < 4; ++j) {
            CHECK(max_abs(E.blocks[j].gamma - Eo[j].gamma) < 1e-12);
            CHECK(max_abs(E.blocks[j].g - Eo[j].g) < 1e-12);
            CHECK(max_abs(G.blocks[j].gamma - Go[j].gamma) < 1e-12);
            CHECK(max_abs(G.blocks[j].g - Go[j].g) < 1e-12);
            // the gamma model shares Gamma11 and g1 with the exponential model
            CHECK(max_abs(E.blocks[j].gamma.topLeftCorner(4, 4) - G.blocks[j].gamma.topLeftCorner(4, 4)) < 1e-14);
            CHECK(max_abs(E.blocks[j].g.head(4) - G.blocks[j].g.head(4)) < 1e-14);
        }
    }
}

TEST_CASE("per-coordinate h lists") {
    Rng rng(4);
    const auto x = oracle::random_positive(20, 3, rng);
    const auto d = make_dataset(x);
    const std::vector<HSpec> list{TruncPower{1, 3}, Log1pTrunc{2}, Scad{0.5, 3}};
    const auto L = assemble_pairwise(ModelSpec{1, 1, true}, list, d);
    for (Index j = 0; j < 3; ++j) {
        const auto single = assemble_pairwise(ModelSpec{1, 1, true}, {list[j]}, d);
        CHECK(max_abs(L.blocks[j].gamma - single.blocks[j].gamma) == 0.0);
    }
    CHECK_THROWS_AS(assemble_pairwise(ModelSpec{1, 1, true}, {list[0], list[1]}, d), DomainError);
}

TEST_CASE("blocks are symmetric PSD") {
    Rng rng(5);
    for (int t = 0; t < 20; ++t) {
        const auto x = oracle::random_positive(5 + t, 6, rng);
        const auto L = assemble_pairwise(ModelSpec{0.5, 0.5, false}, {TruncPower{1, 2}}, make_dataset(x));
        for (const auto& b : L.blocks) {
            CHECK(max_abs(b.gamma - b.gamma.transpose()) == 0.0);
            Eigen::SelfAdjointEigenSolver<MatrixXd> es(b.gamma, Eigen::EigenvaluesOnly);
            CHECK(es.eigenvalues().minCoeff() >= -1e-10);
        }
    }
}

TEST_CASE("zero data entries") {
    MatrixXd x(3, 2);
    x << 1, 2, 0, 1, 3, 1;
    const auto d = make_dataset(x);
    const auto L = assemble_truncated_gaussian(TruncPower{1, 3}, d, false);
    for (const auto& b : L.blocks) {
        CHECK(b.gamma.allFinite());
        CHECK(b.g.allFinite());
    }
    try {
        assemble_pairwise(ModelSpec{0.5, 0, false}, {TruncPower{3, 3}}, d);
        FAIL("expected a domain error");
    } catch (const DomainError& e) {
        CHECK(std::string(e.what()).find("(1, 0)") != std::string::npos);
    }
    // h'(0) unbounded
    CHECK_THROWS_AS(assemble_pairwise(ModelSpec{1, 1, true}, {TruncPower{0.5, 3}}, d), DomainError);
}

TEST_CASE("Gaussian full-support loss") {
    MatrixXd x(2, 2);
    x << 1, 0, 0, 1;
    const auto L = assemble_gaussian_full_support(x);
    for (Index j = 0; j < 2; ++j) {
        CHECK(max_abs(L.blocks[j].gamma - 0.5 * MatrixXd::Identity(2, 2)) < 1e-15);
        CHECK(L.blocks[j].g == VectorXd::Unit(2, j));
    }
    Rng rng(6);
    MatrixXd y(50, 4);
    for (Index i = 0; i < 50; ++i)
        for (Index j = 0; j < 4; ++j) y(i, j) = rng.normal();
    const auto est = closed_form(assemble_gaussian_full_support(y));
    const MatrixXd S = y.transpose() * y / 50.0;
    CHECK(max_abs(est.K - S.inverse()) < 1e-10);
    CHECK_THROWS_AS(closed_form(assemble_gaussian_full_support(y.topRows(3))), NumericError);
}

TEST_CASE("amplify") {
    Rng rng(7);
    const auto d = make_dataset(oracle::random_positive(10, 3, rng));
    const auto L = assemble_pairwise(ModelSpec{1, 1, false}, {TruncPower{1, 3}}, d);
    const auto same = amplify(L, AmplifierSpec::multiplier(1.0));
    for (Index j = 0; j < 3; ++j) CHECK(max_abs(same.blocks[j].gamma - L.blocks[j].gamma) == 0.0);

    const auto A = amplify(L, AmplifierSpec::multiplier(1.7));
    for (Index j = 0; j < 3; ++j) {
        const auto& G0 = L.blocks[j].gamma;
        const auto& G1 = A.blocks[j].gamma;
        for (Index k = 0; k < 3; ++k) CHECK(G1(k, k) == doctest::Approx(1.7 * G0(k, k)).epsilon(1e-14));
        CHECK(G1(3, 3) == G0(3, 3));
        CHECK(max_abs(G1.col(3) - G0.col(3)) == 0.0);
        MatrixXd off0 = G0, off1 = G1;
        off0.diagonal().setZero();
        off1.diagonal().setZero();
        CHECK(max_abs(off0 - off1) == 0.0);
        CHECK(max_abs(A.raw_gamma(j) - G0) < 1e-14);
    }
    CHECK(A.amplified());
    CHECK_FALSE(L.amplified());
    CHECK_THROWS_AS(amplify(L, AmplifierSpec::multiplier(1.5, AmplifierSpec::Scope::all_diagonal)), DomainError);
    CHECK_THROWS_AS(amplify(L, AmplifierSpec::multiplier(0.5)), DomainError);

    // centered block diag(1,1), off-diagonal 1, delta = 2
    QuadraticLoss toy;
    toy.m = 2;
    toy.n = 1;
    toy.applied = MatrixXd::Zero(2, 2);
    toy.blocks.resize(2);
    for (auto& b : toy.blocks) {
        b.gamma = MatrixXd::Ones(2, 2);
        b.g = VectorXd::Zero(2);
    }
    const auto T = amplify(toy, AmplifierSpec::multiplier(2.0));
    MatrixXd want(2, 2);
    want << 2, 1, 1, 2;
    CHECK(max_abs(T.blocks[0].gamma - want) == 0.0);

    AmplifierSpec ex;
    ex.mode = AmplifierSpec::Mode::explicit_gamma;
    ex.scope = AmplifierSpec::Scope::all_diagonal;
    ex.gamma = VectorXd::Constant(2, 0.25);
    const auto X = amplify(toy, ex);
    CHECK(X.blocks[1].gamma(1, 1) == 1.25);
    CHECK(X.applied(0, 1) == 0.25);
    ex.gamma = VectorXd::Constant(3, 0.25);
    CHECK_THROWS_AS(amplify(toy, ex), DomainError);
}

TEST_CASE("amplified blocks are positive definite even when n < m") {
    Rng rng(8);
    const auto d = make_dataset(oracle::random_positive(3, 8, rng));
    for (bool centered : {true, false}) {
        const auto L = amplify(assemble_truncated_gaussian(TruncPower{1, 3}, d, centered), AmplifierSpec::multiplier(1.3));
        for (const auto& b : L.blocks) {
            Eigen::SelfAdjointEigenSolver<MatrixXd> es(b.gamma, Eigen::EigenvaluesOnly);
            CHECK(es.eigenvalues().minCoeff() > 0.0);
        }
    }
}

TEST_CASE("multiplier upper bound") {
    CHECK(std::abs(multiplier_upper_bound(80, 100) - 1.8647) < 5e-5);
    CHECK(std::abs(multiplier_upper_bound(1000, 100) - 1.6438) < 5e-5);
    CHECK(multiplier_upper_bound(1e30, 100) == doctest::Approx(1.0).epsilon(1e-9));
    const double r = std::sqrt(std::log(100.0) / 500.0);
    CHECK(multiplier_upper_bound(500, 100, MultiplierFamily::gaussian_full) == doctest::Approx(2 - 1 / (1 + 80 * r)));
    CHECK_THROWS_AS(multiplier_upper_bound(10, 1), DomainError);
}

TEST_CASE("profiling eta") {
    QuadraticLoss L;
    L.layout = Layout::noncentered;
    L.m = 2;
    L.n = 1;
    L.spec = ModelSpec{1, 1, false};
    L.applied = MatrixXd::Zero(3, 2);
    L.blocks.resize(2);
    MatrixXd G(3, 3);
    G << 2, 0, -1, 0, 2, -1, -1, -1, 1;
    VectorXd g(3);
    g << 1, 1, -1;
    for (auto& b : L.blocks) b = {G, g};
    const auto P = profile_out_eta(L);
    MatrixXd S(2, 2);
    S << 1, -1, -1, 1;
    CHECK(max_abs(P.k_loss.blocks[0].gamma - S) < 1e-15);
    CHECK(max_abs(P.k_loss.blocks[0].g) < 1e-15);

    // Gamma12 = 0: the centered restriction
    MatrixXd G0 = G;
    G0.col(2).head(2).setZero();
    G0.row(2).head(2).setZero();
    for (auto& b : L.blocks) b = {G0, g};
    const auto P0 = profile_out_eta(L);
    CHECK(max_abs(P0.k_loss.blocks[1].gamma - G0.topLeftCorner(2, 2)) == 0.0);
    CHECK(max_abs(P0.k_loss.blocks[1].g - g.head(2)) == 0.0);

    // profiled solve + recovery equals the joint solve (asymmetric)
    Rng rng(9);
    const auto d = make_dataset(oracle::random_positive(60, 4, rng));
    const auto full = assemble_truncated_gaussian(TruncPower{1, 3}, d, false);
    const auto joint = closed_form(full, false);
    const auto prof = profile_out_eta(full);
    const auto kest = closed_form(prof.k_loss, false);
    CHECK(max_abs(kest.K - joint.K) < 1e-9);
    CHECK(max_abs(prof.recover_eta(kest.K) - *joint.eta) < 1e-9);

    L.blocks[1].gamma(2, 2) = 0.0;
    try {
        profile_out_eta(L);
        FAIL("expected failure");
    } catch (const NumericError& e) {
        CHECK(std::string(e.what()).find("block 1") != std::string::npos);
    }
    CHECK_THROWS_AS(profile_out_eta(prof.k_loss), DomainError);
}

TEST_CASE("direct sample loss") {
    MatrixXd x(1, 1);
    x << 2;
    const auto d = make_dataset(x);
    for (double k : {0.0, 0.5, 1.0, 2.0}) {
        InteractionParams p{MatrixXd::Constant(1, 1, k), VectorXd()};
        CHECK(direct_sample_loss(ModelSpec{1, 1, true}, {TruncPower{1, INFINITY}}, d, p) ==
              doctest::Approx(4 * k * k - 4 * k));
    }
    Rng rng(10);
    const auto y = make_dataset(oracle::random_positive(10, 3, rng));
    InteractionParams z{MatrixXd::Zero(3, 3), VectorXd()};
    CHECK(direct_sample_loss(ModelSpec{1, 1, true}, {TruncPower{1, 3}}, y, z) == 0.0);
}

TEST_CASE("loss-difference identity with asymmetric K") {
    Rng rng(11);
    const auto d = make_dataset(oracle::random_positive(15, 3, rng), true);
    for (auto [a, b] : std::vector<std::pair<double, double>>{{1, 1}, {0.5, 0.5}, {0.5, 0}, {1.5, 0.5}}) {
        const ModelSpec spec{a, b, false};
        const std::vector<HSpec> h{TruncPower{2.5, 2}};
        const auto L = assemble_pairwise(spec, h, d);
        for (int t = 0; t < 20; ++t) {
            InteractionParams p1{MatrixXd::Random(3, 3), VectorXd::Random(3)};
            InteractionParams p2{MatrixXd::Random(3, 3), VectorXd::Random(3)};
            const double lhs = direct_sample_loss(spec, h, d, p1) - direct_sample_loss(spec, h, d, p2);
            const double rhs = quadratic_value(L, p1.K, &p1.eta) - quadratic_value(L, p2.K, &p2.eta);
            CHECK(std::abs(lhs - rhs) <= 1e-8 * std::max(1.0, std::abs(lhs)));
        }
    }
}

TEST_CASE("back transform") {
    Estimate e;
    e.K = MatrixXd::Ones(2, 2);
    e.K(0, 1) = e.K(1, 0) = -0.5;
    e.eta = VectorXd::Constant(2, 3.0);
    const auto id = back_transform_estimate(e, VectorXd::Ones(2), ModelSpec{1, 1, false});
    CHECK(id.K == e.K);
    VectorXd s(2);
    s << 2, 1;
    const auto t = back_transform_estimate(e, s, ModelSpec{1, 1, false});
    CHECK(t.K(0, 0) == 0.25);
    CHECK(t.K(0, 1) == -0.25);
    CHECK((*t.eta)(0) == 1.5);
    const auto g = back_transform_estimate(e, s, ModelSpec{0.5, 0, false});
    CHECK((*g.eta)(0) == 3.0);
    CHECK(g.K(0, 0) == doctest::Approx(0.5));
    CHECK(((t.K.array() > 0) == (e.K.array() > 0)).all());
}

TEST_CASE("loss snapshot round trip") {
    Rng rng(12);
    const auto d = make_dataset(oracle::random_positive(10, 3, rng));
    const auto L = amplify(assemble_pairwise(ModelSpec{1, 1, false}, {TruncPower{1, 3}}, d), AmplifierSpec::multiplier(1.4));
    const auto path = (std::filesystem::temp_directory_path() / "gsm_snapshot_test.bin").string();
    write_loss_snapshot(path, L);
    const auto R = read_loss_snapshot(path);
    CHECK(R.layout == L.layout);
    CHECK(R.m == 3);
    CHECK(R.n == 10);
    CHECK(format_hspec(R.h[0]) == "pow:1:3");
    for (Index j = 0; j < 3; ++j) {
        CHECK(max_abs(R.blocks[j].gamma - L.blocks[j].gamma) == 0.0);
        CHECK(max_abs(R.blocks[j].g - L.blocks[j].g) == 0.0);
        CHECK(max_abs(R.raw_gamma(j) - L.raw_gamma(j)) == 0.0);
    }
    std::remove(path.c_str());
    CHECK_THROWS_AS(read_loss_snapshot(path), DomainError);
}

TEST_CASE("assembly cost grows no faster than n m^3") {
    Rng rng(13);
    std::vector<double> secs;
    for (Index m : {20, 40, 80}) {
        const auto d = make_dataset(oracle::random_positive(400, m, rng));
        double best = 1e9;
        for (int r = 0; r < 3; ++r) {
            const auto t0 = std::chrono::steady_clock::now();
            const auto L = assemble_pairwise(ModelSpec{1, 1, false}, {TruncPower{1, 3}}, d);
            best = std::min(best, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
            CHECK(L.blocks.size() == static_cast<std::size_t>(m));
        }
        secs.push_back(best);
    }
    // doubling m may cost at most 8x, with slack for timer noise
    CHECK(secs[2] / std::max(secs[1], 1e-6) < 16.0);
    CHECK(secs[1] / std::max(secs[0], 1e-6) < 16.0);
}
