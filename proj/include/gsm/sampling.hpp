#pragma once

#include "gsm/model.hpp"
#include "gsm/rng.hpp"

#include <optional>

namespace gsm {

struct GraphSpec {
    enum class Scheme { block, erdos_renyi };
    Scheme scheme = Scheme::block;
    int num_blocks = 10;
    double pi = 0.2;
    double weight_lo = 0.5;
    double weight_hi = 1.0;
    double min_eigenvalue = 0.1;

    void validate(Index m) const;
};

/// Parses "block:<pi>:<blocks>" or "er:<pi>".
GraphSpec parse_graph_spec(const std::string& text);
std::string format_graph_spec(const GraphSpec& gs);

/// Symmetric K0: lower-triangle entries are Bernoulli(pi) x Uniform[lo, hi]
/// within blocks (or over all pairs), with a common diagonal placing the
/// smallest eigenvalue exactly at gs.min_eigenvalue.
InteractionParams generate_k0(Index m, const GraphSpec& gs, Rng& rng);

/// Exact draw from N(mu, sigma^2) restricted to [0, inf).
double sample_truncated_normal_uni(double mu, double sigma, Rng& rng);

struct GibbsConfig {
    int burn_in = 1000;
    int thin = 10;
    int grid_points = 2048;
    double domain_cap = 0.0;          // 0: per-conditional cutoff at 40 nats below the mode
    std::optional<VectorXd> init;     // starting state, default all ones

    void validate() const;
};

/// Systematic-scan Gibbs sampler for the truncated normal with density
/// proportional to exp(-x'Kx/2 + eta'x) on the orthant (eta empty means 0).
Dataset sample_tn_gibbs(const InteractionParams& params, Index n, const GibbsConfig& cfg, Rng& rng);

/// Gibbs sampler for a general (a, b) pairwise power model; each conditional
/// is inverted numerically on a grid that is uniform in log x.
Dataset sample_pairwise_gibbs(const ModelSpec& spec, const InteractionParams& params, Index n,
                              const GibbsConfig& cfg, Rng& rng);

} // namespace gsm
