#include "modalid/era.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "modalid/error.hpp"

namespace modalid {
namespace {

using cplx = std::complex<double>;

double sample_std(const std::vector<double>& v, double m) {
    if (v.size() < 2) return 0.0;
    double acc = 0.0;
    for (double x : v) acc += (x - m) * (x - m);
    return std::sqrt(acc / static_cast<double>(v.size() - 1));
}

double mean_of(const std::vector<double>& v) {
    double acc = 0.0;
    for (double x : v) acc += x;
    return v.empty() ? 0.0 : acc / static_cast<double>(v.size());
}

std::vector<double> to_vector(const Eigen::MatrixXd& m) {
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(m.size()));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) out.push_back(m(i, j));
    return out;
}

}  // namespace

double StateSpaceRealization::spectral_radius() const {
    if (A.size() == 0) return 0.0;
    return Eigen::EigenSolver<Eigen::MatrixXd>(A, false).eigenvalues().cwiseAbs().maxCoeff();
}

std::vector<double> StateSpaceRealization::markov_parameters(std::size_t count) const {
    if (!has_input()) throw InvalidParameterError("realization has no input vector");
    std::vector<double> out;
    out.reserve(count);
    Eigen::VectorXd x = b;
    for (std::size_t i = 0; i < count; ++i) {
        out.push_back(c.dot(x));
        x = A * x;
    }
    return out;
}

std::size_t default_hankel_size(std::size_t samples) {
    return std::min<std::size_t>(samples / 2, 200);
}

HankelPair build_hankel(std::span<const double> y, std::size_t n) {
    if (n == 0) throw InvalidParameterError("Hankel size must be positive");
    if (y.size() < 2 * n) {
        throw TooShortError("Hankel size " + std::to_string(n) + " needs " +
                            std::to_string(2 * n) + " samples, got " + std::to_string(y.size()));
    }
    HankelPair h;
    const auto ni = static_cast<Eigen::Index>(n);
    h.H0.resize(ni, ni);
    h.H1.resize(ni, ni);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            h.H0(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = y[i + j];
            h.H1(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = y[i + j + 1];
        }
    }
    h.built_from = 2 * n;
    return h;
}

std::vector<double> singular_values(const HankelPair& h) {
    const Eigen::BDCSVD<Eigen::MatrixXd> svd(h.H0);
    const auto& s = svd.singularValues();
    return {s.data(), s.data() + s.size()};
}

StateSpaceRealization era_realize(const HankelPair& h, std::size_t order, double Ts) {
    if (order == 0) throw InvalidParameterError("realization order must be positive");
    if (!(Ts > 0.0)) throw InvalidParameterError("sampling time must be positive");
    const auto n = static_cast<std::size_t>(h.H0.rows());
    if (order > n) {
        throw InvalidParameterError("order " + std::to_string(order) + " exceeds Hankel size " +
                                    std::to_string(n));
    }
    const Eigen::BDCSVD<Eigen::MatrixXd> svd(h.H0, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd& sv = svd.singularValues();
    std::size_t rank = 0;
    const double floor = kRankTolerance * (sv.size() > 0 ? sv(0) : 0.0);
    while (rank < static_cast<std::size_t>(sv.size()) && sv(static_cast<Eigen::Index>(rank)) > floor && sv(0) > 0.0) ++rank;
    if (order > rank) {
        throw RankDeficientError("order " + std::to_string(order) + " exceeds numerical rank " +
                                     std::to_string(rank) + " of the Hankel matrix",
                                 {sv.data(), sv.data() + sv.size()}, rank);
    }
    const auto r = static_cast<Eigen::Index>(order);
    const Eigen::MatrixXd U = svd.matrixU().leftCols(r);
    const Eigen::MatrixXd V = svd.matrixV().leftCols(r);
    const Eigen::VectorXd root = sv.head(r).cwiseSqrt();
    const Eigen::VectorXd inv_root = root.cwiseInverse();

    StateSpaceRealization out;
    out.A = inv_root.asDiagonal() * (U.transpose() * h.H1 * V) * inv_root.asDiagonal();
    out.b = root.asDiagonal() * V.row(0).transpose();
    out.c = U.row(0) * root.asDiagonal();
    out.Ts = Ts;
    return out;
}

Mode mode_from_eigenvalue(cplx lambda, double Ts) {
    const cplx l = std::log(lambda);
    const double mag = std::abs(l);
    Mode m;
    m.eigenvalue = lambda.imag() < 0.0 ? std::conj(lambda) : lambda;
    m.freq_hz = mag / (2.0 * std::numbers::pi * Ts);
    m.damping = mag > 0.0 ? -l.real() / mag : 0.0;
    m.overdamped = lambda.imag() == 0.0;
    m.alias_ambiguous = lambda.imag() == 0.0 && lambda.real() < 0.0;
    return m;
}

cplx eigenvalue_from_mode(double freq_hz, double damping, double Ts) {
    const double wn = 2.0 * std::numbers::pi * freq_hz;
    const double z = std::clamp(damping, -1.0, 1.0);
    const cplx s(-z * wn, wn * std::sqrt(std::max(0.0, 1.0 - z * z)));
    return std::exp(s * Ts);
}

Eigen::VectorXd balancing_scale(const Eigen::MatrixXd& A) {
    const Eigen::Index n = A.rows();
    Eigen::VectorXd d = Eigen::VectorXd::Ones(n);
    Eigen::MatrixXd B = A;
    for (bool changed = true; changed;) {
        changed = false;
        for (Eigen::Index i = 0; i < n; ++i) {
            const double c = B.col(i).cwiseAbs().sum() - std::abs(B(i, i));
            const double r = B.row(i).cwiseAbs().sum() - std::abs(B(i, i));
            if (c == 0.0 || r == 0.0) continue;
            double f = 1.0;
            while (c * f < r / (2.0 * f)) f *= 2.0;
            while (c * f > 2.0 * r / f) f /= 2.0;
            if (f != 1.0 && (c * f + r / f) < 0.95 * (c + r)) {
                d(i) *= f;
                B.col(i) *= f;
                B.row(i) /= f;
                changed = true;
            }
        }
    }
    return d;
}

Eigen::VectorXcd balanced_eigenvalues(const Eigen::MatrixXd& A) {
    const Eigen::VectorXd d = balancing_scale(A);
    const Eigen::MatrixXd B = d.cwiseInverse().asDiagonal() * A * d.asDiagonal();
    return Eigen::EigenSolver<Eigen::MatrixXd>(B, false).eigenvalues();
}

ModalParameters modal_parameters(const Eigen::MatrixXd& A, double Ts) {
    if (!(Ts > 0.0)) throw InvalidParameterError("sampling time must be positive");
    ModalParameters out;
    out.Ts = Ts;
    if (A.size() == 0) return out;
    const auto ev = balanced_eigenvalues(A);
    const double scale = std::max(1.0, A.cwiseAbs().maxCoeff());
    for (Eigen::Index i = 0; i < ev.size(); ++i) {
        const cplx lambda = ev(i);
        if (std::abs(lambda) <= 1e-12 * scale) {
            throw SingularModeError("eigenvalue at zero has no logarithm");
        }
        if (lambda.imag() < 0.0) continue;
        out.modes.push_back(mode_from_eigenvalue(lambda, Ts));
    }
    std::stable_sort(out.modes.begin(), out.modes.end(),
                     [](const Mode& a, const Mode& b) { return a.freq_hz < b.freq_hz; });
    return out;
}

ModalParameters modal_parameters(const StateSpaceRealization& r) {
    return modal_parameters(r.A, r.Ts);
}

ModalParameters aggregate_uncertainty(std::span<const ModalParameters> per_impact) {
    if (per_impact.size() < 2) {
        throw InvalidParameterError("aggregation needs at least two identifications");
    }
    const auto& ref = per_impact.front();
    const std::size_t nref = ref.modes.size();
    // partner[e][r]: index of the mode in entry e paired with reference mode r.
    std::vector<std::vector<std::optional<std::size_t>>> partner(per_impact.size());
    std::size_t unpaired = 0;
    for (std::size_t e = 0; e < per_impact.size(); ++e) {
        const auto& modes = per_impact[e].modes;
        partner[e].assign(nref, std::nullopt);
        struct Cand {
            double dist;
            std::size_t r, m;
        };
        std::vector<Cand> cands;
        for (std::size_t r = 0; r < nref; ++r)
            for (std::size_t m = 0; m < modes.size(); ++m)
                cands.push_back({std::abs(ref.modes[r].freq_hz - modes[m].freq_hz), r, m});
        std::stable_sort(cands.begin(), cands.end(),
                         [](const Cand& a, const Cand& b) { return a.dist < b.dist; });
        std::vector<bool> used(modes.size(), false);
        std::size_t matched = 0;
        for (const auto& c : cands) {
            if (partner[e][c.r] || used[c.m]) continue;
            partner[e][c.r] = c.m;
            used[c.m] = true;
            ++matched;
        }
        unpaired += modes.size() - matched;
    }

    ModalParameters out;
    out.Ts = ref.Ts;
    out.sources = per_impact.size();
    for (std::size_t r = 0; r < nref; ++r) {
        std::vector<double> f, z;
        bool complete = true;
        bool alias = false;
        for (std::size_t e = 0; e < per_impact.size(); ++e) {
            if (!partner[e][r]) {
                complete = false;
                break;
            }
            const auto& m = per_impact[e].modes[*partner[e][r]];
            f.push_back(m.freq_hz);
            z.push_back(m.damping);
            alias = alias || m.alias_ambiguous;
        }
        if (!complete) {
            ++unpaired;
            continue;
        }
        Mode m;
        m.freq_hz = mean_of(f);
        m.damping = mean_of(z);
        m.freq_std = sample_std(f, m.freq_hz);
        m.damping_std = sample_std(z, m.damping);
        m.eigenvalue = eigenvalue_from_mode(m.freq_hz, m.damping, out.Ts);
        m.overdamped = m.damping >= 1.0;
        m.alias_ambiguous = alias;
        out.modes.push_back(m);
    }
    out.unpaired = unpaired;
    return out;
}

void to_json(nlohmann::json& j, const StateSpaceRealization& r) {
    j = nlohmann::json{{"order", r.order()},
                       {"Ts", r.Ts},
                       {"A", to_vector(r.A)},
                       {"c", to_vector(r.c)},
                       {"stable_flag", r.stable()}};
    if (r.has_input()) j["b"] = to_vector(r.b);
    else j["b"] = nullptr;
}

void from_json(const nlohmann::json& j, StateSpaceRealization& r) {
    const auto n = j.at("order").get<std::size_t>();
    const auto a = j.at("A").get<std::vector<double>>();
    const auto c = j.at("c").get<std::vector<double>>();
    if (a.size() != n * n || c.size() != n) {
        throw ParseError("realization matrix sizes do not match order " + std::to_string(n), 0);
    }
    const auto ni = static_cast<Eigen::Index>(n);
    r.A.resize(ni, ni);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < n; ++k) r.A(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = a[i * n + k];
    r.c = Eigen::Map<const Eigen::RowVectorXd>(c.data(), ni);
    if (j.contains("b") && !j.at("b").is_null()) {
        const auto b = j.at("b").get<std::vector<double>>();
        if (b.size() != n) throw ParseError("input vector size does not match order", 0);
        r.b = Eigen::Map<const Eigen::VectorXd>(b.data(), ni);
    } else {
        r.b.resize(0);
    }
    r.Ts = j.at("Ts").get<double>();
}

void to_json(nlohmann::json& j, const ModalParameters& m) {
    auto modes = nlohmann::json::array();
    for (const auto& md : m.modes) {
        nlohmann::json e{{"eigenvalue_re", md.eigenvalue.real()},
                         {"eigenvalue_im", md.eigenvalue.imag()},
                         {"freq_hz", md.freq_hz},
                         {"damping", md.damping},
                         {"overdamped", md.overdamped},
                         {"alias_ambiguous", md.alias_ambiguous}};
        e["freq_std"] = md.freq_std ? nlohmann::json(*md.freq_std) : nlohmann::json(nullptr);
        e["damping_std"] = md.damping_std ? nlohmann::json(*md.damping_std) : nlohmann::json(nullptr);
        modes.push_back(std::move(e));
    }
    j = nlohmann::json{{"Ts", m.Ts}, {"sources", m.sources}, {"unpaired", m.unpaired}, {"modes", modes}};
}

void from_json(const nlohmann::json& j, ModalParameters& m) {
    m.Ts = j.at("Ts").get<double>();
    m.sources = j.value("sources", std::size_t{1});
    m.unpaired = j.value("unpaired", std::size_t{0});
    m.modes.clear();
    for (const auto& e : j.at("modes")) {
        Mode md;
        md.eigenvalue = {e.at("eigenvalue_re").get<double>(), e.at("eigenvalue_im").get<double>()};
        md.freq_hz = e.at("freq_hz").get<double>();
        md.damping = e.at("damping").get<double>();
        md.overdamped = e.value("overdamped", false);
        md.alias_ambiguous = e.value("alias_ambiguous", false);
        if (e.contains("freq_std") && !e.at("freq_std").is_null()) md.freq_std = e.at("freq_std").get<double>();
        if (e.contains("damping_std") && !e.at("damping_std").is_null()) md.damping_std = e.at("damping_std").get<double>();
        m.modes.push_back(md);
    }
}

}  // namespace modalid
