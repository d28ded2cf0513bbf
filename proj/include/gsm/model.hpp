#pragma once

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace gsm {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

// Selects a pairwise interaction power model
//   p(x) ∝ exp(-(1/2a) (x^a)' K x^a + eta' (x^b - 1)/b)   on the orthant,
// with (x^b - 1)/b read as log x when b == 0. When centered, eta == 0.
struct ModelSpec {
    double a = 1.0;
    double b = 1.0;
    bool centered = false;

    void validate() const;
};

struct InteractionParams {
    MatrixXd K;
    VectorXd eta;

    Index dim() const { return K.rows(); }
    void validate() const;
};

// ---------------------------------------------------------------------------
// Weight functions h. A closed menu so that h' is always analytic and the
// text form round-trips exactly.

struct TruncPower { double p; double c; };   // min(x^p, c)
struct Log1pTrunc { double c; };             // min(log(1 + x), c)
struct Mcp { double lam; double gam; };      // MCP(x; lam, gam)
struct Scad { double lam; double gam; };     // SCAD(x; lam, gam)
struct Constant { double v; };               // v

using HSpec = std::variant<TruncPower, Log1pTrunc, Mcp, Scad, Constant>;

struct HValue {
    double value;
    double deriv;
};

/// Parses `pow:<p>:<c>`, `log1p:<c>`, `mcp:<lam>:<gam>`, `scad:<lam>:<gam>`
/// or `const:<v>`; `inf` is accepted for truncation constants.
HSpec parse_hspec(std::string_view text);
std::string format_hspec(const HSpec& h);
/// Comma-separated list of specs, e.g. "log1p:1,log1p:2".
std::vector<HSpec> parse_hspec_list(std::string_view text);
void validate_hspec(const HSpec& h);

/// (h(x), h'(x)) for x > 0. At truncation points and knots the derivative of
/// the left piece is returned.
HValue h_eval(const HSpec& h, double x);

/// Same as h_eval but also accepts x == 0, returning the right limits
/// h(0+), h'(0+) (h' may be +inf for fractional powers).
HValue h_eval_closed(const HSpec& h, double x);

/// Points where h is not differentiable, ascending.
std::vector<double> h_knots(const HSpec& h);

enum class AdmissibilityClause { none, positivity, boundedness, origin };

struct Admissibility {
    bool admissible = true;
    AdmissibilityClause failed = AdmissibilityClause::none;
    std::string reason;
};

/// Membership test for the admissible class H_{a,b}: positivity,
/// piecewise-power bounds, and h(x) = o(x^q) at the origin. With b == 0 and
/// eta_min unknown the conservative q = 2 is used.
Admissibility h_admissible(const HSpec& h, const ModelSpec& spec,
                           std::optional<double> eta_min = std::nullopt);

// ---------------------------------------------------------------------------

struct Dataset {
    MatrixXd x;        // n x m, entries >= 0
    VectorXd scale;    // per-column divisor applied by standardize(), else ones

    Index n() const { return x.rows(); }
    Index m() const { return x.cols(); }
};

/// Wraps a matrix, checking non-negativity (strict positivity when
/// strictly_positive is set).
Dataset make_dataset(MatrixXd x, bool strictly_positive = false);

/// Divides column j by its root mean square ||x_j||_2 / sqrt(n) and records
/// the divisor in scale.
Dataset standardize(const Dataset& data);

double log_density_unnorm(const ModelSpec& spec, const InteractionParams& params,
                          const Eigen::Ref<const VectorXd>& x);

// ---------------------------------------------------------------------------
// Normalizability.

struct CopositivityConfig {
    double pd_tol = 1e-12;
    int grid_points = 24;          // simplex grid resolution per axis
    long max_grid_evals = 200000;  // beyond this the grid is replaced by random simplex draws
    int refine_iters = 500;
    unsigned long long seed = 12345;
};

enum class CopositivityStatus { proven_yes, proven_no, unknown };

struct CopositivityResult {
    CopositivityStatus status = CopositivityStatus::unknown;
    VectorXd witness;   // set when proven_no: v >= 0, sum(v) == 1, v'Kv <= 0
    double witness_value = 0.0;
};

CopositivityResult is_strictly_copositive(const MatrixXd& K, const CopositivityConfig& cfg = {});

enum class NormalizabilityStatus { ok, violated, unknown };

struct NormalizabilityVerdict {
    NormalizabilityStatus status = NormalizabilityStatus::unknown;
    std::string condition;   // "CC1", "CC2" or "CC3" when violated or unknown
};

NormalizabilityVerdict check_normalizable(const ModelSpec& spec, const InteractionParams& params,
                                          const CopositivityConfig& cfg = {});

} // namespace gsm
