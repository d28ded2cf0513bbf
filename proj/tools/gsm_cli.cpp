// gsm: estimate, simulate, roc and univariate subcommands.
// Exit codes: 0 success, 1 usage error, 2 data or domain error, 3 numeric failure.

#include "gsm/errors.hpp"
#include "gsm/evaluation.hpp"
#include "gsm/io.hpp"
#include "gsm/loss.hpp"
#include "gsm/model_selection.hpp"
#include "gsm/sampling.hpp"
#include "gsm/solver.hpp"
#include "gsm/univariate.hpp"

#include <CLI11.hpp>

#include <Eigen/Eigenvalues>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>
#include <thread>

using namespace gsm;
using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

ModelSpec parse_model(const std::string& text, bool centered) {
    const auto colon = text.find(':');
    if (colon == std::string::npos) throw DomainError("model must be <a>:<b>, got '" + text + "'");
    ModelSpec s;
    try {
        s.a = std::stod(text.substr(0, colon));
        s.b = std::stod(text.substr(colon + 1));
    } catch (const std::exception&) {
        throw DomainError("model must be <a>:<b>, got '" + text + "'");
    }
    s.centered = centered;
    s.validate();
    return s;
}

double resolve_multiplier(const std::string& text, double n, double m) {
    if (text.empty() || text == "none") return 1.0;
    if (text == "auto") return multiplier_upper_bound(n, m);
    double v = 0.0;
    try {
        v = std::stod(text);
    } catch (const std::exception&) {
        throw DomainError("--mult must be a number >= 1 or 'auto'");
    }
    if (!(v >= 1.0)) throw DomainError("--mult must be >= 1");
    return v;
}

json edges_json(const MatrixXd& K) {
    json e = json::array();
    for (const auto& [i, j] : edges_of(K)) e.push_back({i, j});
    return e;
}

void warn_admissibility(const HSpec& h, const ModelSpec& spec) {
    const auto adm = h_admissible(h, spec);
    if (!adm.admissible)
        std::cerr << "warning: h = " << format_hspec(h) << " is not admissible for this model: " << adm.reason << "\n";
}

// ---------------------------------------------------------------------------

struct EstimateArgs {
    std::string data, h = "pow:1:3", mult, out;
    double a = 1.0, b = 1.0, lambda_ratio = 1.0, lambda_min_ratio = 0.01, tol = 1e-8;
    bool centered = false, profile_eta = false, ebic = false, refit = false, no_scale = false;
    bool no_diag_penalty = false;
    int nlambda = 50, max_iter = 10000;
};

int cmd_estimate(const EstimateArgs& a, const std::vector<std::string>& argv) {
    const auto t0 = Clock::now();
    const ModelSpec spec{a.a, a.b, a.centered};
    spec.validate();
    const HSpec h = parse_hspec(a.h);
    warn_admissibility(h, spec);
    if (a.refit && !a.ebic) throw DomainError("--refit needs --ebic");

    const CsvTable table = read_csv(a.data);
    Dataset data = make_dataset(table.values, spec.b == 0.0);
    if (data.m() < 2) throw DomainError("need at least two columns");
    if (!a.no_scale) data = standardize(data);
    const double n = static_cast<double>(data.n());
    const double mult = resolve_multiplier(a.mult, n, static_cast<double>(data.m()));

    SolverConfig cfg;
    cfg.tol = a.tol;
    cfg.max_iter = a.max_iter;
    cfg.lambda_ratio = a.lambda_ratio;
    cfg.penalize_diagonal = !a.no_diag_penalty;

    const FitOutput fit = fit_path(spec, h, data, mult, a.nlambda, a.lambda_min_ratio, a.profile_eta, cfg);
    const QuadraticLoss raw = fit.loss.raw();

    std::size_t chosen = fit.path.size() - 1;
    json ebic_path = json::array();
    std::optional<Estimate> refitted;
    if (a.ebic) {
        const Selection sel = select(fit.path, raw, n, a.refit, &fit.loss, cfg);
        chosen = sel.best_index;
        for (const auto& s : sel.scores)
            ebic_path.push_back({{"lambda", s.lambda}, {"support_size", s.support_size}, {"ebic", s.score},
                                 {"refitted", s.refitted}});
        if (a.refit) refitted = sel.refits[chosen];
    }
    const Estimate& picked = refitted ? *refitted : fit.path.entries[chosen];
    Estimate out = a.no_scale ? picked : back_transform_estimate(picked, data.scale, spec);

    json path = json::array();
    for (const auto& e : fit.path.entries)
        path.push_back({{"lambda", e.lambda}, {"support_size", edges_of(e.K).size()}, {"converged", e.converged},
                        {"iterations", e.iterations}});

    json j;
    j["schema"] = kSchema;
    j["model"] = {{"a", spec.a}, {"b", spec.b}, {"centered", spec.centered}};
    j["h"] = format_hspec(h);
    j["multiplier"] = mult;
    j["scale"] = vector_to_json(data.scale);
    j["K"] = matrix_to_json(out.K);
    j["eta"] = out.eta ? vector_to_json(*out.eta) : json(nullptr);
    j["lambda"] = fit.path.entries[chosen].lambda;
    j["selected_index"] = chosen;
    j["refitted"] = refitted.has_value();
    j["converged"] = out.converged;
    j["support"] = edges_json(out.K);
    j["ebic_path"] = ebic_path;
    j["path"] = path;
    write_json(a.out, j);

    RunManifest man;
    man.command = "estimate";
    man.argv = argv;
    man.config = {{"data", a.data}, {"a", a.a}, {"b", a.b}, {"centered", a.centered}, {"h", a.h},
                  {"mult", a.mult}, {"multiplier", mult}, {"profile_eta", a.profile_eta},
                  {"lambda_ratio", a.lambda_ratio}, {"nlambda", a.nlambda},
                  {"lambda_min_ratio", a.lambda_min_ratio}, {"ebic", a.ebic}, {"refit", a.refit},
                  {"scale", !a.no_scale}, {"penalize_diagonal", cfg.penalize_diagonal}, {"tol", a.tol},
                  {"max_iter", a.max_iter}};
    man.inputs = {a.data};
    man.outputs = {a.out};
    man.wall_time_s = seconds_since(t0);
    write_json(manifest_path_for(a.out), man.to_json());
    return 0;
}

// ---------------------------------------------------------------------------

struct SimulateArgs {
    std::string model = "1:1", graph = "block:0.2:10", out;
    long m = 100, n = 1000;
    std::optional<double> mu, eta;
    std::uint64_t seed = 1;
    int burn_in = 1000, thin = 10;
    bool header = false;
};

int cmd_simulate(const SimulateArgs& a, const std::vector<std::string>& argv) {
    const auto t0 = Clock::now();
    if (a.mu && a.eta) throw DomainError("give at most one of --mu and --eta");
    const bool centered = !a.mu && !a.eta;
    const ModelSpec spec = parse_model(a.model, centered);
    if (a.mu && !(spec.a == 1.0 && spec.b == 1.0)) throw DomainError("--mu applies to the 1:1 model only");
    const GraphSpec gs = parse_graph_spec(a.graph);
    if (a.m < 2 || a.n < 1) throw DomainError("need m >= 2 and n >= 1");
    GibbsConfig gc;
    gc.burn_in = a.burn_in;
    gc.thin = a.thin;

    InteractionParams p0;
    std::uint64_t used = 0;
    int attempt = 0;
    NormalizabilityVerdict verdict;
    for (; attempt < 10; ++attempt) {
        used = derive_seed(a.seed, static_cast<std::uint64_t>(attempt));
        Rng rng(used);
        p0 = generate_k0(a.m, gs, rng);
        if (a.mu) p0.eta = p0.K * VectorXd::Constant(a.m, *a.mu);
        else if (a.eta) p0.eta = VectorXd::Constant(a.m, *a.eta);
        verdict = check_normalizable(spec, p0);
        if (verdict.status == NormalizabilityStatus::ok) break;
    }
    if (attempt == 10)
        throw DomainError("generated parameters are not normalizable (" + verdict.condition + ") after 10 seeds");

    Rng srng(derive_seed(used, 0x5a5a));
    const Dataset data = spec.a == 1.0 && spec.b == 1.0 ? sample_tn_gibbs(p0, a.n, gc, srng)
                                                         : sample_pairwise_gibbs(spec, p0, a.n, gc, srng);
    std::vector<std::string> header;
    if (a.header)
        for (long j = 0; j < a.m; ++j) header.push_back("x" + std::to_string(j + 1));
    const std::string csv = a.out + ".csv";
    const std::string truth = a.out + ".truth.json";
    write_csv(csv, data.x, header);

    Eigen::SelfAdjointEigenSolver<MatrixXd> es(p0.K, Eigen::EigenvaluesOnly);
    json t;
    t["schema"] = kSchema;
    t["model"] = {{"a", spec.a}, {"b", spec.b}, {"centered", spec.centered}};
    t["K0"] = matrix_to_json(p0.K);
    t["eta0"] = centered ? json(nullptr) : vector_to_json(p0.eta);
    if (a.mu) t["mu0"] = *a.mu;
    t["support"] = edges_json(p0.K);
    t["min_eigenvalue"] = es.eigenvalues().minCoeff();
    write_json(truth, t);

    RunManifest man;
    man.command = "simulate";
    man.argv = argv;
    man.config = {{"model", a.model}, {"graph", format_graph_spec(gs)}, {"m", a.m}, {"n", a.n},
                  {"mu", a.mu ? json(*a.mu) : json(nullptr)}, {"eta", a.eta ? json(*a.eta) : json(nullptr)},
                  {"burn_in", a.burn_in}, {"thin", a.thin}, {"header", a.header}};
    man.seeds = {{"master", a.seed}, {"k0_attempt", attempt}, {"k0_seed", used}};
    man.outputs = {csv, truth};
    man.wall_time_s = seconds_since(t0);
    write_json(a.out + ".manifest.json", man.to_json());
    return 0;
}

// ---------------------------------------------------------------------------

struct RocArgs {
    std::string model = "1:1", graph = "block:0.8:10", h = "pow:1:3", mult = "auto", out_prefix;
    long m = 100, n = 1000;
    int trials = 10, num_k0 = 5, nlambda = 100, burn_in = 1000, thin = 200, threads = 0;
    double lambda_min_ratio = 0.01, lambda_ratio = 0.0, mu_sd = 0.5;
    std::optional<double> eta;
    bool centered = false, profile_eta = false, penalize_diagonal = false;
    std::uint64_t seed = 1;
};

int cmd_roc(const RocArgs& a, const std::vector<std::string>& argv) {
    const auto t0 = Clock::now();
    ExperimentSpec s;
    s.model = parse_model(a.model, a.centered);
    s.graph = parse_graph_spec(a.graph);
    s.m = a.m;
    s.n = a.n;
    s.hs = parse_hspec_list(a.h);
    for (const auto& h : s.hs) warn_admissibility(h, s.model);
    s.multiplier = resolve_multiplier(a.mult, static_cast<double>(a.n), static_cast<double>(a.m));
    s.num_k0 = a.num_k0;
    s.trials_per_k0 = a.trials;
    s.nlambda = a.nlambda;
    s.lambda_min_ratio = a.lambda_min_ratio;
    s.profile_eta = a.profile_eta;
    s.eta0 = a.eta;
    s.mu0_sd = a.mu_sd;
    s.gibbs.burn_in = a.burn_in;
    s.gibbs.thin = a.thin;
    s.solver.lambda_ratio = a.lambda_ratio;
    s.solver.penalize_diagonal = a.penalize_diagonal;
    s.seed = a.seed;
    s.threads = a.threads > 0 ? a.threads : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));

    const ExperimentResult res = run_experiment(s, [](const TrialResult& t) {
        std::cerr << "K0 " << t.k0_index << " trial " << t.trial << ":";
        if (!t.error.empty()) std::cerr << " failed: " << t.error;
        for (double v : t.aucs) std::cerr << " " << v;
        std::cerr << "\n";
    });

    const std::string csv = a.out_prefix + ".roc.csv";
    const std::string summary = a.out_prefix + ".auc.json";
    {
        std::ofstream os(csv);
        if (!os) throw DomainError("cannot write " + csv);
        os << "h,fpr,tpr\n";
        char buf[64];
        for (const auto& hs : res.summaries)
            for (const auto& p : hs.averaged.points) {
                std::snprintf(buf, sizeof buf, "%.17g,%.17g", p.fpr, p.tpr);
                os << hs.h << "," << buf << "\n";
            }
    }
    json results = json::array();
    for (const auto& hs : res.summaries)
        results.push_back({{"h", hs.h}, {"mean", hs.mean_auc}, {"sd", hs.sd_auc}, {"trials", hs.trials},
                           {"trials_with_unconverged_fits", hs.unconverged_fits}});
    json config = {{"model", a.model}, {"centered", a.centered}, {"graph", format_graph_spec(s.graph)},
                   {"m", a.m}, {"n", a.n}, {"h", a.h}, {"mult", a.mult}, {"multiplier", s.multiplier},
                   {"trials", a.trials}, {"num_k0", a.num_k0}, {"nlambda", a.nlambda},
                   {"lambda_min_ratio", a.lambda_min_ratio}, {"profile_eta", a.profile_eta},
                   {"lambda_ratio", a.lambda_ratio}, {"eta", a.eta ? json(*a.eta) : json(nullptr)},
                   {"mu_sd", a.mu_sd}, {"burn_in", a.burn_in}, {"thin", a.thin},
                   {"penalize_diagonal", a.penalize_diagonal}, {"threads", s.threads}};
    json sj;
    sj["schema"] = kSchema;
    sj["results"] = results;
    sj["trials"] = res.trials.size();
    sj["failures"] = res.failures;
    sj["config"] = config;
    write_json(summary, sj);

    RunManifest man;
    man.command = "roc";
    man.argv = argv;
    man.config = config;
    man.seeds = {{"master", a.seed}, {"rule", "K0 k: derive_seed(master, k); trial t: derive_seed(that, t + 1)"}};
    man.outputs = {csv, summary};
    man.wall_time_s = seconds_since(t0);
    man.extra = {{"failures", res.failures}};
    write_json(a.out_prefix + ".manifest.json", man.to_json());
    return res.failures == static_cast<int>(res.trials.size()) ? 3 : 0;
}

// ---------------------------------------------------------------------------

struct UnivariateArgs {
    std::string target = "mu", grid, h, out;
    double known = 1.0;
};

int cmd_univariate(const UnivariateArgs& a, const std::vector<std::string>& argv) {
    const auto t0 = Clock::now();
    UnivariateStudy st;
    st.target = uni_target_from_string(a.target);
    st.known_value = a.known;
    st.grid = parse_grid(a.grid);
    st.hspecs = parse_hspec_list(a.h);
    const auto rows = run_univariate_study(st);

    std::ofstream os(a.out);
    if (!os) throw DomainError("cannot write " + a.out);
    os << "target,param0,h_spec,asy_var,cr_bound,efficiency,error\n";
    char buf[128];
    int ok = 0;
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g", r.param0, r.asy_var, r.cr_bound, r.efficiency);
        std::string p(buf);
        const auto c1 = p.find(',');
        std::string err = r.error;
        for (auto& ch : err)
            if (ch == ',' || ch == '\n') ch = ';';
        os << to_string(r.target) << "," << p.substr(0, c1) << "," << r.h_spec << "," << p.substr(c1 + 1) << ","
           << err << "\n";
        if (r.error.empty()) ++ok;
        else std::cerr << "warning: " << r.h_spec << " at " << r.param0 << ": " << r.error << "\n";
    }
    os.close();

    RunManifest man;
    man.command = "univariate";
    man.argv = argv;
    man.config = {{"target", a.target}, {"known", a.known}, {"grid", a.grid}, {"h", a.h}};
    man.outputs = {a.out};
    man.wall_time_s = seconds_since(t0);
    man.extra = {{"rows", rows.size()}, {"failed_rows", rows.size() - static_cast<std::size_t>(ok)}};
    write_json(manifest_path_for(a.out), man.to_json());
    return ok > 0 ? 0 : 3;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Generalized score matching on the non-negative orthant"};
    app.require_subcommand(1);
    // "-h" would collide with the weight-function option --h
    app.set_help_flag("--help", "Print this help message and exit");
    app.set_version_flag("--version", std::string(kVersion));
    const std::vector<std::string> args(argv, argv + argc);

    EstimateArgs ea;
    auto* est = app.add_subcommand("estimate", "Estimate K (and eta) from a CSV data matrix");
    est->set_help_flag("--help", "Print this help message and exit");
    est->add_option("--data", ea.data, "Input CSV (rows are observations)")->required();
    est->add_option("--a", ea.a, "Interaction exponent a > 0");
    est->add_option("--b", ea.b, "Linear-term exponent b >= 0");
    est->add_flag("--centered", ea.centered, "Fix eta = 0");
    est->add_option("--h", ea.h, "Weight function, e.g. pow:1:3");
    est->add_option("--mult", ea.mult, "Diagonal multiplier (number >= 1 or 'auto')");
    est->add_flag("--profile-eta", ea.profile_eta, "Profile eta out before solving for K");
    est->add_option("--lambda-ratio", ea.lambda_ratio, "lambda_eta / lambda_K (inf pins eta at 0)");
    est->add_option("--nlambda", ea.nlambda, "Number of lambda values");
    est->add_option("--lambda-min-ratio", ea.lambda_min_ratio, "Smallest lambda as a fraction of lambda_max");
    est->add_flag("--ebic", ea.ebic, "Select lambda by extended BIC");
    est->add_flag("--refit", ea.refit, "Refit on the selected support before scoring");
    est->add_flag("--no-scale", ea.no_scale, "Skip column standardization");
    est->add_flag("--no-diag-penalty", ea.no_diag_penalty, "Leave the diagonal of K unpenalized");
    est->add_option("--tol", ea.tol, "Coordinate descent tolerance");
    est->add_option("--max-iter", ea.max_iter, "Coordinate descent sweep cap");
    est->add_option("--out", ea.out, "Output JSON path")->required();

    SimulateArgs sa;
    auto* sim = app.add_subcommand("simulate", "Generate K0 and sample a dataset");
    sim->set_help_flag("--help", "Print this help message and exit");
    sim->add_option("--model", sa.model, "<a>:<b>");
    sim->add_option("--m", sa.m, "Dimension");
    sim->add_option("--n", sa.n, "Sample size");
    sim->add_option("--graph", sa.graph, "block:<pi>:<blocks> or er:<pi>");
    sim->add_option("--mu", sa.mu, "Constant mean parameter mu0 (1:1 model)");
    sim->add_option("--eta", sa.eta, "Constant eta0");
    sim->add_option("--seed", sa.seed, "Master seed");
    sim->add_option("--burn-in", sa.burn_in, "Gibbs burn-in sweeps");
    sim->add_option("--thin", sa.thin, "Gibbs thinning");
    sim->add_flag("--header", sa.header, "Write a header row");
    sim->add_option("--out", sa.out, "Output prefix")->required();

    RocArgs ra;
    auto* roc = app.add_subcommand("roc", "Run the graph-recovery ROC/AUC experiment");
    roc->set_help_flag("--help", "Print this help message and exit");
    roc->add_option("--model", ra.model, "<a>:<b>");
    roc->add_flag("--centered", ra.centered, "Centered model (eta = 0)");
    roc->add_option("--graph", ra.graph, "block:<pi>:<blocks> or er:<pi>");
    roc->add_option("--m", ra.m, "Dimension");
    roc->add_option("--n", ra.n, "Sample size");
    roc->add_option("--h", ra.h, "Comma-separated weight functions");
    roc->add_option("--mult", ra.mult, "Diagonal multiplier (number >= 1 or 'auto')");
    roc->add_option("--trials", ra.trials, "Trials per K0");
    roc->add_option("--num-k0", ra.num_k0, "Number of K0 draws");
    roc->add_option("--nlambda", ra.nlambda, "Number of lambda values");
    roc->add_option("--lambda-min-ratio", ra.lambda_min_ratio, "Smallest lambda as a fraction of lambda_max");
    roc->add_flag("--profile-eta", ra.profile_eta, "Profile eta out");
    roc->add_option("--lambda-ratio", ra.lambda_ratio, "lambda_eta / lambda_K");
    roc->add_option("--eta", ra.eta, "Constant eta0 for non-centered runs");
    roc->add_option("--mu-sd", ra.mu_sd, "Sd of mu0 for the non-centered 1:1 model");
    roc->add_option("--burn-in", ra.burn_in, "Gibbs burn-in sweeps");
    roc->add_option("--thin", ra.thin, "Gibbs thinning");
    roc->add_flag("--penalize-diagonal", ra.penalize_diagonal, "Penalize the diagonal of K as well");
    roc->add_option("--seed", ra.seed, "Master seed");
    roc->add_option("--threads", ra.threads, "Worker threads (0: hardware concurrency); output does not depend on it");
    roc->add_option("--out-prefix", ra.out_prefix, "Output prefix")->required();

    UnivariateArgs ua;
    auto* uni = app.add_subcommand("univariate", "Asymptotic variance and Cramer-Rao bound study");
    uni->set_help_flag("--help", "Print this help message and exit");
    uni->add_option("--target", ua.target, "mu or sigma2")->required();
    uni->add_option("--known", ua.known, "Known sigma^2 (target mu) or mu (target sigma2)")->required();
    uni->add_option("--grid", ua.grid, "start:stop:step over mu0 or sigma0^2")->required();
    uni->add_option("--h", ua.h, "Comma-separated weight functions")->required();
    uni->add_option("--out", ua.out, "Output CSV")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    try {
        if (*est) return cmd_estimate(ea, args);
        if (*sim) return cmd_simulate(sa, args);
        if (*roc) return cmd_roc(ra, args);
        if (*uni) return cmd_univariate(ua, args);
    } catch (const DomainError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return 3;
    }
    return 1;
}
