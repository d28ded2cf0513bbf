#pragma once

// Seeded small truncated-GGM instance with a strong signal, shared by the
// model-selection unit tests and the acceptance binary.

#include "gsm/evaluation.hpp"
#include "gsm/model_selection.hpp"
#include "gsm/sampling.hpp"

namespace easy {

struct Outcome {
    gsm::EdgeSet truth;
    gsm::EdgeSet selected;
    gsm::EstimatePath path;
    std::size_t best = 0;
    bool all_converged = true;
};

inline Outcome run(std::uint64_t seed, gsm::Index m = 10, gsm::Index n = 2000) {
    using namespace gsm;
    Rng rng(seed);
    GraphSpec gs;
    gs.scheme = GraphSpec::Scheme::block;
    gs.pi = 0.8;
    gs.num_blocks = 5;
    InteractionParams p0 = generate_k0(m, gs, rng);
    GibbsConfig gc;
    gc.burn_in = 500;
    gc.thin = 20;
    const Dataset data = standardize(sample_tn_gibbs(p0, n, gc, rng));
    const ModelSpec model{1.0, 1.0, true};
    SolverConfig cfg;
    cfg.penalize_diagonal = false;
    const FitOutput fit = fit_path(model, Log1pTrunc{INFINITY}, data,
                                   multiplier_upper_bound(static_cast<double>(n), static_cast<double>(m)), 50, 0.01,
                                   false, cfg);
    const Selection sel = select(fit.path, fit.loss.raw(), static_cast<double>(n), true, &fit.loss, cfg);
    Outcome out;
    out.truth = edge_set(p0.K);
    out.best = sel.best_index;
    out.selected = edge_set(sel.refits[sel.best_index].K);
    out.path = fit.path;
    for (const auto& e : fit.path.entries) out.all_converged = out.all_converged && e.converged;
    return out;
}

}  // namespace easy
