#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "gsm/errors.hpp"
#include "gsm/evaluation.hpp"
#include "gsm/model_selection.hpp"
#include "gsm/sampling.hpp"
#include "gsm/univariate.hpp"

namespace py = pybind11;
using namespace gsm;

namespace {

py::list edge_list(const MatrixXd& K) {
    py::list out;
    for (const auto& [i, j] : edges_of(K)) out.append(py::make_tuple(i, j));
    return out;
}

py::dict estimate(const MatrixXd& x, double a, double b, bool centered, const std::string& h_text,
                  std::optional<double> multiplier, int nlambda, double lambda_min_ratio, bool ebic, bool refit,
                  bool penalize_diagonal, bool scale) {
    const ModelSpec spec{a, b, centered};
    spec.validate();
    const HSpec h = parse_hspec(h_text);
    if (refit && !ebic) throw DomainError("refit needs ebic");
    Dataset data = make_dataset(x, b == 0.0);
    if (scale) data = standardize(data);
    const double n = static_cast<double>(data.n());
    const double mult = multiplier ? *multiplier : multiplier_upper_bound(n, static_cast<double>(data.m()));
    SolverConfig cfg;
    cfg.penalize_diagonal = penalize_diagonal;

    FitOutput fit;
    {
        py::gil_scoped_release nogil;
        fit = fit_path(spec, h, data, mult, nlambda, lambda_min_ratio, false, cfg);
    }
    std::size_t chosen = fit.path.size() - 1;
    std::optional<Estimate> refitted;
    std::vector<double> scores;
    if (ebic) {
        const Selection sel = select(fit.path, fit.loss.raw(), n, refit, &fit.loss, cfg);
        chosen = sel.best_index;
        for (const auto& s : sel.scores) scores.push_back(s.score);
        if (refit) refitted = sel.refits[chosen];
    }
    const Estimate& picked = refitted ? *refitted : fit.path.entries[chosen];
    const Estimate out = scale ? back_transform_estimate(picked, data.scale, spec) : picked;

    std::vector<double> lambdas;
    py::list path_K;
    for (const auto& e : fit.path.entries) {
        lambdas.push_back(e.lambda);
        path_K.append(scale ? back_transform_estimate(e, data.scale, spec).K : e.K);
    }
    py::dict d;
    d["K"] = out.K;
    d["eta"] = out.eta ? py::cast(*out.eta) : py::none();
    d["lambda"] = out.lambda;
    d["selected_index"] = chosen;
    d["refitted"] = refitted.has_value();
    d["support"] = edge_list(out.K);
    d["multiplier"] = mult;
    d["lambdas"] = lambdas;
    d["path_K"] = path_K;
    d["ebic"] = scores;
    return d;
}

py::dict simulate(Index m, Index n, const std::string& graph, double a, double b, bool centered,
                  std::optional<double> eta, std::uint64_t seed, int burn_in, int thin) {
    const ModelSpec spec{a, b, centered};
    spec.validate();
    if (centered == eta.has_value()) throw DomainError(centered ? "eta must be omitted for a centered model"
                                                                : "a non-centered model needs eta");
    Rng rng(derive_seed(seed, 0));
    InteractionParams p0 = generate_k0(m, parse_graph_spec(graph), rng);
    if (eta) p0.eta = VectorXd::Constant(m, *eta);
    const auto verdict = check_normalizable(spec, p0);
    if (verdict.status != NormalizabilityStatus::ok)
        throw DomainError("generated parameters are not normalizable (" + verdict.condition + ")");
    GibbsConfig gc;
    gc.burn_in = burn_in;
    gc.thin = thin;
    Rng srng(derive_seed(seed, 1));
    Dataset data;
    {
        py::gil_scoped_release nogil;
        data = a == 1.0 && b == 1.0 ? sample_tn_gibbs(p0, n, gc, srng) : sample_pairwise_gibbs(spec, p0, n, gc, srng);
    }
    py::dict d;
    d["x"] = data.x;
    d["K0"] = p0.K;
    d["eta0"] = p0.eta.size() ? py::cast(p0.eta) : py::none();
    d["support"] = edge_list(p0.K);
    return d;
}

UniTarget target_of(const std::string& t) { return uni_target_from_string(t); }

std::pair<std::vector<double>, std::vector<double>> roc_points(const RocCurve& c) {
    std::vector<double> f, t;
    for (const auto& p : c.points) {
        f.push_back(p.fpr);
        t.push_back(p.tpr);
    }
    return {f, t};
}

py::dict path_roc(const std::vector<MatrixXd>& path_K, const MatrixXd& K0) {
    EstimatePath path;
    for (const auto& K : path_K) {
        Estimate e;
        e.K = K;
        path.entries.push_back(e);
    }
    const auto curve = roc_from_path(path, edge_set(K0), K0.rows());
    const auto [f, t] = roc_points(curve);
    py::dict d;
    d["fpr"] = f;
    d["tpr"] = t;
    d["auc"] = auc(curve);
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, mod) {
    mod.doc() = "Generalized score matching for non-negative data";

    static py::exception<DomainError> domain_error(mod, "DomainError", PyExc_ValueError);
    static py::exception<NumericError> numeric_error(mod, "NumericError", PyExc_ArithmeticError);
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const DomainError& e) {
            domain_error(e.what());
        } catch (const NumericError& e) {
            numeric_error(e.what());
        }
    });

    mod.def("multiplier_upper_bound", [](double n, double m) { return multiplier_upper_bound(n, m); }, py::arg("n"),
            py::arg("m"));

    mod.def("estimate", &estimate, py::arg("x"), py::arg("a") = 1.0, py::arg("b") = 1.0, py::arg("centered") = false,
            py::arg("h") = "pow:1:3", py::arg("multiplier") = py::none(), py::arg("nlambda") = 50,
            py::arg("lambda_min_ratio") = 0.01, py::arg("ebic") = false, py::arg("refit") = false,
            py::arg("penalize_diagonal") = true, py::arg("scale") = true,
            "Fit the regularization path on an n x m array of non-negative data.");

    mod.def("simulate", &simulate, py::arg("m"), py::arg("n"), py::arg("graph") = "block:0.2:10",
            py::arg("a") = 1.0, py::arg("b") = 1.0, py::arg("centered") = true, py::arg("eta") = py::none(),
            py::arg("seed") = 1, py::arg("burn_in") = 1000, py::arg("thin") = 10);

    mod.def("path_roc", &path_roc, py::arg("path_K"), py::arg("K0"));

    mod.def("estimate_mu", [](const VectorXd& x, double sigma2, const std::string& h) {
        return estimate_mu(x, sigma2, parse_hspec(h));
    }, py::arg("x"), py::arg("sigma2"), py::arg("h"));
    mod.def("estimate_sigma2", [](const VectorXd& x, double mu, const std::string& h) {
        return estimate_sigma2(x, mu, parse_hspec(h));
    }, py::arg("x"), py::arg("mu"), py::arg("h"));
    mod.def("asymptotic_variance", [](const std::string& target, double param0, double known, const std::string& h) {
        return asymptotic_variance(target_of(target), param0, known, parse_hspec(h));
    }, py::arg("target"), py::arg("param0"), py::arg("known"), py::arg("h"));
    mod.def("cramer_rao", [](const std::string& target, double param0, double known) {
        return cramer_rao(target_of(target), param0, known);
    }, py::arg("target"), py::arg("param0"), py::arg("known"));
}
