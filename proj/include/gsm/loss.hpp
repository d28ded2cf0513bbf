#pragma once

#include "gsm/estimate.hpp"
#include "gsm/model.hpp"

#include <string>
#include <vector>

namespace gsm {

enum class Layout { centered, noncentered, gaussian_full };

std::string to_string(Layout layout);
Layout layout_from_string(const std::string& s);

/// One column block of the block-diagonal quadratic: parameters are column j
/// of K, followed by eta_j in the non-centered layout.
struct LossBlock {
    MatrixXd gamma;
    VectorXd g;
};

struct AmplifierSpec {
    enum class Mode { none, multiplier, explicit_gamma };
    enum class Scope { all_diagonal, k_block_only };

    Mode mode = Mode::none;
    double delta = 1.0;
    // Explicit additions to the diagonal: either one entry per block
    // coordinate (reused for every block) or side * m entries, block-major.
    VectorXd gamma;
    Scope scope = Scope::k_block_only;

    static AmplifierSpec none() { return {}; }
    static AmplifierSpec multiplier(double delta, Scope scope = Scope::k_block_only) {
        AmplifierSpec a;
        a.mode = Mode::multiplier;
        a.delta = delta;
        a.scope = scope;
        return a;
    }
    std::string describe() const;
};

/// The estimation problem after data reduction:
///   sum_j  1/2 theta_j' Gamma_j theta_j - g_j' theta_j.
/// Immutable once built; amplify() and profile_out_eta() return new objects.
struct QuadraticLoss {
    Layout layout = Layout::centered;
    Index n = 0;
    Index m = 0;
    ModelSpec spec;
    std::vector<HSpec> h;
    std::vector<LossBlock> blocks;
    MatrixXd applied;          // side x m: amount added to each block diagonal
    AmplifierSpec amplifier;

    Index side() const { return layout == Layout::noncentered ? m + 1 : m; }
    bool has_eta() const { return layout == Layout::noncentered; }
    bool amplified() const { return applied.size() > 0 && applied.cwiseAbs().maxCoeff() > 0.0; }

    /// Gamma_j without the amplifier.
    MatrixXd raw_gamma(Index j) const;

    /// The same loss with the amplifier removed.
    QuadraticLoss raw() const;
};

/// Generalized h-score matching loss of the (a, b) power model. `h` holds one
/// spec shared by all coordinates or one spec per coordinate.
QuadraticLoss assemble_pairwise(const ModelSpec& spec, const std::vector<HSpec>& h, const Dataset& data);

/// Truncated GGM (a = b = 1) loss built from its closed-form block display.
QuadraticLoss assemble_truncated_gaussian(const HSpec& h, const Dataset& data, bool centered);

/// Original score matching for a Gaussian on all of R^m: every block is x'x/n
/// and g_j = e_j. Data may take any real values.
QuadraticLoss assemble_gaussian_full_support(const MatrixXd& x);

QuadraticLoss amplify(const QuadraticLoss& loss, const AmplifierSpec& amp);

enum class MultiplierFamily { truncated_gaussian, gaussian_full };

/// Largest multiplier covered by the consistency theory:
/// 2 - (1 + 4e max{6 log m / n, sqrt(6 log m / n)})^-1 for the truncated GGM,
/// 2 - (1 + 80 sqrt(log m / n))^-1 for the Gaussian on R^m.
double multiplier_upper_bound(double n, double m, MultiplierFamily family = MultiplierFamily::truncated_gaussian);

struct EtaRecovery {
    double gamma22;
    VectorXd gamma12;
    double g2;
};

struct ProfiledLoss {
    QuadraticLoss k_loss;              // centered layout, Schur-complement blocks
    std::vector<EtaRecovery> recovery;

    /// eta_j = (g2_j - Gamma12_j' K_{.j}) / Gamma22_j
    VectorXd recover_eta(const MatrixXd& K) const;
};

ProfiledLoss profile_out_eta(const QuadraticLoss& loss);

/// Direct evaluation of the sample loss
///   (1/n) sum_i sum_j h_j' d_j log p + h_j [d_jj log p + (d_j log p)^2 / 2]
/// with analytic partials. Column j of K enters d_j, matching the column
/// decoupling of the quadratic form (identical for symmetric K).
double direct_sample_loss(const ModelSpec& spec, const std::vector<HSpec>& h, const Dataset& data,
                          const InteractionParams& params);

/// Quadratic part evaluated at parameters: sum_j 1/2 th_j' G_j th_j - g_j' th_j.
double quadratic_value(const QuadraticLoss& loss, const MatrixXd& K, const VectorXd* eta = nullptr,
                       bool use_raw = false);

/// Undo column standardization: K_ij / (s_i s_j)^a and eta_j / s_j^b (b > 0).
Estimate back_transform_estimate(const Estimate& est, const VectorXd& scale, const ModelSpec& spec);

/// Binary snapshot: "GSMLOSS1", u64 header length, JSON header, then for each
/// block Gamma (column-major), g and the applied diagonal, all little-endian
/// float64.
void write_loss_snapshot(const std::string& path, const QuadraticLoss& loss);
QuadraticLoss read_loss_snapshot(const std::string& path);

} // namespace gsm
