#include "gsm/loss.hpp"

#include "gsm/errors.hpp"

#include <json.hpp>

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numbers>
#include <sstream>

namespace gsm {

namespace {

const HSpec& h_for(const std::vector<HSpec>& h, Index j) {
    return h.size() == 1 ? h.front() : h[static_cast<std::size_t>(j)];
}

[[noreturn]] void zero_cell_error(Index i, Index j, double e) {
    std::ostringstream os;
    os << "data entry (" << i << ", " << j << ") is zero but the loss needs x^" << e
       << "; all entries of this column must be positive for this model";
    throw DomainError(os.str());
}

// x^e for data entries; 0^e with e < 0 is a domain error.
double data_pow(double x, double e, Index i, Index j) {
    if (x == 0.0) {
        if (e < 0.0) zero_cell_error(i, j, e);
        return e == 0.0 ? 1.0 : 0.0;
    }
    return std::pow(x, e);
}

void check_h_sizes(const std::vector<HSpec>& h, Index m) {
    if (h.empty() || (h.size() != 1 && static_cast<Index>(h.size()) != m))
        throw DomainError("need one h spec or one per coordinate");
    for (const auto& hs : h) validate_hspec(hs);
}

MatrixXd gram(const MatrixXd& y, double scale) {
    const Index side = y.cols();
    MatrixXd out = MatrixXd::Zero(side, side);
    out.selfadjointView<Eigen::Lower>().rankUpdate(y.transpose(), scale);
    out.triangularView<Eigen::StrictlyUpper>() = out.transpose();
    return out;
}

struct HColumn {
    VectorXd value;
    VectorXd deriv;
};

HColumn eval_h_column(const HSpec& h, const Eigen::Ref<const VectorXd>& col, Index j) {
    const Index n = col.size();
    HColumn out{VectorXd(n), VectorXd(n)};
    for (Index i = 0; i < n; ++i) {
        const auto v = h_eval_closed(h, col(i));
        if (!std::isfinite(v.deriv)) {
            std::ostringstream os;
            os << "h'(0) is unbounded at data entry (" << i << ", " << j << ")";
            throw DomainError(os.str());
        }
        out.value(i) = v.value;
        out.deriv(i) = v.deriv;
    }
    return out;
}

void swap_if_big_endian(double* p, std::size_t count) {
    if constexpr (std::endian::native == std::endian::big) {
        for (std::size_t k = 0; k < count; ++k) {
            std::uint64_t u;
            std::memcpy(&u, p + k, 8);
            u = __builtin_bswap64(u);
            std::memcpy(p + k, &u, 8);
        }
    }
}

} // namespace

std::string to_string(Layout layout) {
    switch (layout) {
    case Layout::centered: return "centered";
    case Layout::noncentered: return "noncentered";
    case Layout::gaussian_full: return "gaussian_full";
    }
    return "unknown";
}

Layout layout_from_string(const std::string& s) {
    if (s == "centered") return Layout::centered;
    if (s == "noncentered") return Layout::noncentered;
    if (s == "gaussian_full") return Layout::gaussian_full;
    throw DomainError("unknown layout '" + s + "'");
}

std::string AmplifierSpec::describe() const {
    std::ostringstream os;
    switch (mode) {
    case Mode::none: os << "none"; break;
    case Mode::multiplier: os << "multiplier:" << delta; break;
    case Mode::explicit_gamma: os << "explicit"; break;
    }
    os << (scope == Scope::k_block_only ? "@k_block" : "@all");
    return os.str();
}

MatrixXd QuadraticLoss::raw_gamma(Index j) const {
    MatrixXd G = blocks[static_cast<std::size_t>(j)].gamma;
    if (applied.size() > 0) G.diagonal() -= applied.col(j);
    return G;
}

QuadraticLoss QuadraticLoss::raw() const {
    QuadraticLoss out = *this;
    for (Index j = 0; j < m; ++j) out.blocks[static_cast<std::size_t>(j)].gamma = raw_gamma(j);
    out.applied = MatrixXd::Zero(side(), m);
    out.amplifier = AmplifierSpec::none();
    return out;
}

QuadraticLoss assemble_pairwise(const ModelSpec& spec, const std::vector<HSpec>& h, const Dataset& data) {
    spec.validate();
    const Index n = data.n();
    const Index m = data.m();
    if (n < 1 || m < 1) throw DomainError("empty data matrix");
    check_h_sizes(h, m);
    if ((data.x.array() < 0.0).any()) throw DomainError("data must be non-negative");

    const double a = spec.a;
    const double b = spec.b;
    const bool nc = !spec.centered;

    QuadraticLoss loss;
    loss.layout = nc ? Layout::noncentered : Layout::centered;
    loss.n = n;
    loss.m = m;
    loss.spec = spec;
    loss.h = h;
    const Index side = loss.side();
    loss.applied = MatrixXd::Zero(side, m);
    loss.blocks.resize(static_cast<std::size_t>(m));

    const MatrixXd xa = data.x.array().pow(a).matrix();
    const double inv_n = 1.0 / static_cast<double>(n);

    MatrixXd y(n, side);
    VectorXd w(n);
    for (Index j = 0; j < m; ++j) {
        const auto col = data.x.col(j);
        const auto hc = eval_h_column(h_for(h, j), col, j);

        double diag_term = 0.0;
        double g2 = 0.0;
        for (Index i = 0; i < n; ++i) {
            const double x = col(i);
            const double hv = hc.value(i);
            const double hd = hc.deriv(i);
            const double xa1 = data_pow(x, a - 1.0, i, j);
            const double xa2 = a != 1.0 ? data_pow(x, a - 2.0, i, j) : 0.0;
            const double root_h = std::sqrt(hv);
            y.row(i).head(m) = -(root_h * xa1) * xa.row(i);
            w(i) = hd * xa1 + (a - 1.0) * hv * xa2;
            diag_term += hv * xa1 * xa1;
            if (nc) {
                const double xb1 = data_pow(x, b - 1.0, i, j);
                const double xb2 = b != 1.0 ? data_pow(x, b - 2.0, i, j) : 0.0;
                y(i, m) = root_h * xb1;
                g2 += -hd * xb1 - (b - 1.0) * hv * xb2;
            }
        }
        LossBlock& blk = loss.blocks[static_cast<std::size_t>(j)];
        blk.gamma = gram(y, inv_n);
        blk.g = VectorXd::Zero(side);
        blk.g.head(m).noalias() = inv_n * (xa.transpose() * w);
        blk.g(j) += a * diag_term * inv_n;
        if (nc) blk.g(m) = g2 * inv_n;
    }
    return loss;
}

QuadraticLoss assemble_truncated_gaussian(const HSpec& h, const Dataset& data, bool centered) {
    validate_hspec(h);
    const Index n = data.n();
    const Index m = data.m();
    if (n < 1 || m < 1) throw DomainError("empty data matrix");
    if ((data.x.array() < 0.0).any()) throw DomainError("data must be non-negative");

    QuadraticLoss loss;
    loss.layout = centered ? Layout::centered : Layout::noncentered;
    loss.n = n;
    loss.m = m;
    loss.spec = ModelSpec{1.0, 1.0, centered};
    loss.h = {h};
    const Index side = loss.side();
    loss.applied = MatrixXd::Zero(side, m);
    loss.blocks.resize(static_cast<std::size_t>(m));
    const double inv_n = 1.0 / static_cast<double>(n);
    const auto& x = data.x;

    for (Index j = 0; j < m; ++j) {
        const auto hc = eval_h_column(h, x.col(j), j);
        LossBlock& blk = loss.blocks[static_cast<std::size_t>(j)];
        blk.gamma = MatrixXd::Zero(side, side);
        MatrixXd g11 = x.transpose() * hc.value.asDiagonal() * x;
        blk.gamma.topLeftCorner(m, m) = 0.5 * inv_n * (g11 + g11.transpose());
        blk.g = VectorXd::Zero(side);
        blk.g.head(m) = inv_n * (x.transpose() * hc.deriv);
        blk.g(j) += inv_n * hc.value.sum();
        if (!centered) {
            const VectorXd g12 = -inv_n * (x.transpose() * hc.value);
            blk.gamma.col(m).head(m) = g12;
            blk.gamma.row(m).head(m) = g12.transpose();
            blk.gamma(m, m) = inv_n * hc.value.sum();
            blk.g(m) = -inv_n * hc.deriv.sum();
        }
    }
    return loss;
}

QuadraticLoss assemble_gaussian_full_support(const MatrixXd& x) {
    const Index n = x.rows();
    const Index m = x.cols();
    if (n < 1 || m < 1) throw DomainError("empty data matrix");
    QuadraticLoss loss;
    loss.layout = Layout::gaussian_full;
    loss.n = n;
    loss.m = m;
    loss.spec = ModelSpec{1.0, 1.0, true};
    loss.h = {Constant{1.0}};
    loss.applied = MatrixXd::Zero(m, m);
    const MatrixXd G = gram(x, 1.0 / static_cast<double>(n));
    loss.blocks.resize(static_cast<std::size_t>(m));
    for (Index j = 0; j < m; ++j) {
        loss.blocks[static_cast<std::size_t>(j)].gamma = G;
        loss.blocks[static_cast<std::size_t>(j)].g = VectorXd::Unit(m, j);
    }
    return loss;
}

QuadraticLoss amplify(const QuadraticLoss& loss, const AmplifierSpec& amp) {
    if (loss.layout == Layout::noncentered && amp.mode != AmplifierSpec::Mode::none &&
        amp.scope != AmplifierSpec::Scope::k_block_only)
        throw DomainError("the non-centered layout only admits amplification of the K block");
    QuadraticLoss out = loss;
    out.amplifier = amp;
    const Index side = loss.side();
    const Index in_scope = amp.scope == AmplifierSpec::Scope::k_block_only ? loss.m : side;
    if (out.applied.size() == 0) out.applied = MatrixXd::Zero(side, loss.m);

    switch (amp.mode) {
    case AmplifierSpec::Mode::none:
        return out;
    case AmplifierSpec::Mode::multiplier: {
        if (!(amp.delta >= 1.0) || !std::isfinite(amp.delta)) throw DomainError("multiplier must be >= 1");
        if (amp.delta == 1.0) return out;
        for (Index j = 0; j < loss.m; ++j) {
            auto& G = out.blocks[static_cast<std::size_t>(j)].gamma;
            for (Index l = 0; l < in_scope; ++l) {
                const double add = (amp.delta - 1.0) * G(l, l);
                G(l, l) += add;
                out.applied(l, j) += add;
            }
        }
        return out;
    }
    case AmplifierSpec::Mode::explicit_gamma: {
        const Index len = amp.gamma.size();
        if (len != side && len != side * loss.m)
            throw DomainError("explicit amplifier must have side or side * m entries");
        if ((amp.gamma.array() < 0.0).any()) throw DomainError("explicit amplifier entries must be >= 0");
        for (Index j = 0; j < loss.m; ++j) {
            auto& G = out.blocks[static_cast<std::size_t>(j)].gamma;
            for (Index l = 0; l < in_scope; ++l) {
                const double add = len == side ? amp.gamma(l) : amp.gamma(j * side + l);
                G(l, l) += add;
                out.applied(l, j) += add;
            }
        }
        return out;
    }
    }
    return out;
}

double multiplier_upper_bound(double n, double m, MultiplierFamily family) {
    if (!(n >= 1.0) || !(m >= 2.0)) throw DomainError("multiplier bound needs n >= 1 and m >= 2");
    if (family == MultiplierFamily::gaussian_full)
        return 2.0 - 1.0 / (1.0 + 80.0 * std::sqrt(std::log(m) / n));
    const double r = 6.0 * std::log(m) / n;
    return 2.0 - 1.0 / (1.0 + 4.0 * std::numbers::e * std::max(r, std::sqrt(r)));
}

VectorXd ProfiledLoss::recover_eta(const MatrixXd& K) const {
    const Index m = static_cast<Index>(recovery.size());
    VectorXd eta(m);
    for (Index j = 0; j < m; ++j) {
        const auto& r = recovery[static_cast<std::size_t>(j)];
        eta(j) = (r.g2 - r.gamma12.dot(K.col(j))) / r.gamma22;
    }
    return eta;
}

ProfiledLoss profile_out_eta(const QuadraticLoss& loss) {
    if (loss.layout != Layout::noncentered) throw DomainError("profiling needs the non-centered layout");
    const Index m = loss.m;
    ProfiledLoss out;
    QuadraticLoss& k = out.k_loss;
    k.layout = Layout::centered;
    k.n = loss.n;
    k.m = m;
    k.spec = loss.spec;
    k.h = loss.h;
    k.amplifier = loss.amplifier;
    k.applied = loss.applied.size() > 0 ? MatrixXd(loss.applied.topRows(m)) : MatrixXd::Zero(m, m);
    k.blocks.resize(static_cast<std::size_t>(m));
    out.recovery.resize(static_cast<std::size_t>(m));
    for (Index j = 0; j < m; ++j) {
        const auto& blk = loss.blocks[static_cast<std::size_t>(j)];
        const double g22 = blk.gamma(m, m);
        if (!(g22 > 0.0))
            throw NumericError("Gamma22 of block " + std::to_string(j) +
                               " is zero; eta_" + std::to_string(j) + " cannot be profiled out");
        const VectorXd g12 = blk.gamma.col(m).head(m);
        MatrixXd schur = blk.gamma.topLeftCorner(m, m) - (g12 * g12.transpose()) / g22;
        schur = (0.5 * (schur + schur.transpose())).eval();
        k.blocks[static_cast<std::size_t>(j)].gamma = std::move(schur);
        k.blocks[static_cast<std::size_t>(j)].g = blk.g.head(m) - g12 * (blk.g(m) / g22);
        out.recovery[static_cast<std::size_t>(j)] = EtaRecovery{g22, g12, blk.g(m)};
    }
    return out;
}

double direct_sample_loss(const ModelSpec& spec, const std::vector<HSpec>& h, const Dataset& data,
                          const InteractionParams& params) {
    spec.validate();
    params.validate();
    const Index n = data.n();
    const Index m = data.m();
    if (params.dim() != m) throw DomainError("parameter dimension does not match data");
    check_h_sizes(h, m);
    const bool nc = !spec.centered;
    if (nc && params.eta.size() != m) throw DomainError("non-centered loss needs eta");
    const double a = spec.a;
    const double b = spec.b;
    const MatrixXd xa = data.x.array().pow(a).matrix();
    const MatrixXd s = xa * params.K;  // s(i, j) = sum_k x_k^a K(k, j)

    double total = 0.0;
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < m; ++j) {
            const double x = data.x(i, j);
            const auto hv = h_eval_closed(h_for(h, j), x);
            const double xa1 = data_pow(x, a - 1.0, i, j);
            const double xa2 = a != 1.0 ? data_pow(x, a - 2.0, i, j) : 0.0;
            double d1 = -xa1 * s(i, j);
            double d2 = -(a - 1.0) * xa2 * s(i, j) - a * params.K(j, j) * xa1 * xa1;
            if (nc) {
                const double xb1 = data_pow(x, b - 1.0, i, j);
                const double xb2 = b != 1.0 ? data_pow(x, b - 2.0, i, j) : 0.0;
                d1 += params.eta(j) * xb1;
                d2 += (b - 1.0) * params.eta(j) * xb2;
            }
            total += hv.deriv * d1 + hv.value * (d2 + 0.5 * d1 * d1);
        }
    }
    return total / static_cast<double>(n);
}

double quadratic_value(const QuadraticLoss& loss, const MatrixXd& K, const VectorXd* eta, bool use_raw) {
    const Index m = loss.m;
    if (K.rows() != m || K.cols() != m) throw DomainError("K has the wrong shape for this loss");
    const Index side = loss.side();
    VectorXd th(side);
    double total = 0.0;
    for (Index j = 0; j < m; ++j) {
        th.head(m) = K.col(j);
        if (loss.has_eta()) th(m) = eta ? (*eta)(j) : 0.0;
        const auto& blk = loss.blocks[static_cast<std::size_t>(j)];
        if (use_raw)
            total += 0.5 * th.dot(loss.raw_gamma(j) * th) - blk.g.dot(th);
        else
            total += 0.5 * th.dot(blk.gamma * th) - blk.g.dot(th);
    }
    return total;
}

Estimate back_transform_estimate(const Estimate& est, const VectorXd& scale, const ModelSpec& spec) {
    const Index m = est.K.rows();
    if (scale.size() != m) throw DomainError("scale length does not match K");
    if (!(scale.array() > 0.0).all()) throw DomainError("scale entries must be positive");
    Estimate out = est;
    const VectorXd sa = scale.array().pow(spec.a).matrix();
    for (Index j = 0; j < m; ++j)
        for (Index i = 0; i < m; ++i) out.K(i, j) = est.K(i, j) / (sa(i) * sa(j));
    if (est.eta && spec.b > 0.0) out.eta = est.eta->cwiseQuotient(scale.array().pow(spec.b).matrix());
    return out;
}

// ---------------------------------------------------------------------------

void write_loss_snapshot(const std::string& path, const QuadraticLoss& loss) {
    nlohmann::json header;
    header["schema"] = "gsm/1";
    header["layout"] = to_string(loss.layout);
    header["n"] = loss.n;
    header["m"] = loss.m;
    header["a"] = loss.spec.a;
    header["b"] = loss.spec.b;
    std::vector<std::string> hs;
    for (const auto& h : loss.h) hs.push_back(format_hspec(h));
    header["h"] = hs;
    header["amplifier"] = loss.amplifier.describe();
    header["side"] = loss.side();
    const std::string text = header.dump();

    std::ofstream os(path, std::ios::binary);
    if (!os) throw DomainError("cannot write loss snapshot to " + path);
    os.write("GSMLOSS1", 8);
    std::uint64_t len = text.size();
    if constexpr (std::endian::native == std::endian::big) len = __builtin_bswap64(len);
    os.write(reinterpret_cast<const char*>(&len), 8);
    os.write(text.data(), static_cast<std::streamsize>(text.size()));

    const Index side = loss.side();
    std::vector<double> buf;
    for (Index j = 0; j < loss.m; ++j) {
        const auto& blk = loss.blocks[static_cast<std::size_t>(j)];
        buf.assign(blk.gamma.data(), blk.gamma.data() + side * side);
        buf.insert(buf.end(), blk.g.data(), blk.g.data() + side);
        for (Index l = 0; l < side; ++l) buf.push_back(loss.applied(l, j));
        swap_if_big_endian(buf.data(), buf.size());
        os.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size() * 8));
    }
    if (!os) throw NumericError("failed while writing loss snapshot " + path);
}

QuadraticLoss read_loss_snapshot(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DomainError("cannot open loss snapshot " + path);
    char magic[8];
    is.read(magic, 8);
    if (!is || std::string(magic, 8) != "GSMLOSS1") throw DomainError(path + " is not a loss snapshot");
    std::uint64_t len = 0;
    is.read(reinterpret_cast<char*>(&len), 8);
    if constexpr (std::endian::native == std::endian::big) len = __builtin_bswap64(len);
    std::string text(len, '\0');
    is.read(text.data(), static_cast<std::streamsize>(len));
    const auto header = nlohmann::json::parse(text);

    QuadraticLoss loss;
    loss.layout = layout_from_string(header.at("layout").get<std::string>());
    loss.n = header.at("n").get<Index>();
    loss.m = header.at("m").get<Index>();
    loss.spec = ModelSpec{header.at("a").get<double>(), header.at("b").get<double>(),
                          loss.layout != Layout::noncentered};
    for (const auto& s : header.at("h")) loss.h.push_back(parse_hspec(s.get<std::string>()));
    const Index side = loss.side();
    loss.applied = MatrixXd::Zero(side, loss.m);
    loss.blocks.resize(static_cast<std::size_t>(loss.m));
    std::vector<double> buf(static_cast<std::size_t>(side * side + 2 * side));
    for (Index j = 0; j < loss.m; ++j) {
        is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size() * 8));
        if (!is) throw DomainError("truncated loss snapshot " + path);
        swap_if_big_endian(buf.data(), buf.size());
        auto& blk = loss.blocks[static_cast<std::size_t>(j)];
        blk.gamma = Eigen::Map<const MatrixXd>(buf.data(), side, side);
        blk.g = Eigen::Map<const VectorXd>(buf.data() + side * side, side);
        loss.applied.col(j) = Eigen::Map<const VectorXd>(buf.data() + side * side + side, side);
    }
    if (loss.amplified()) {
        loss.amplifier.mode = AmplifierSpec::Mode::explicit_gamma;
        loss.amplifier.gamma = Eigen::Map<const VectorXd>(loss.applied.data(), loss.applied.size());
        loss.amplifier.scope = loss.layout == Layout::noncentered ? AmplifierSpec::Scope::k_block_only
                                                                  : AmplifierSpec::Scope::all_diagonal;
    }
    return loss;
}

} // namespace gsm
