#pragma once

#include <Eigen/Dense>
#include <complex>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "json.hpp"

namespace modalid {

/// Discrete-time SISO model x[i+1] = A x[i] + b u[i], y[i] = c x[i].
struct StateSpaceRealization {
    Eigen::MatrixXd A;
    Eigen::VectorXd b;  // size 0 when the input vector is not known
    Eigen::RowVectorXd c;
    double Ts = 0.0;

    std::size_t order() const noexcept { return static_cast<std::size_t>(A.rows()); }
    bool has_input() const noexcept { return b.size() > 0; }
    double spectral_radius() const;
    bool stable() const { return spectral_radius() <= 1.0 + 1e-9; }

    /// c A^(i-1) b for i = 1..count.
    std::vector<double> markov_parameters(std::size_t count) const;
};

/// H0[i][j] = y_{i+j+1}, H1[i][j] = y_{i+j+2} (1-based samples).
struct HankelPair {
    Eigen::MatrixXd H0;
    Eigen::MatrixXd H1;
    std::size_t built_from = 0;
};

struct Mode {
    std::complex<double> eigenvalue;  // Im >= 0 representative of a conjugate pair
    double freq_hz = 0.0;
    double damping = 0.0;
    std::optional<double> freq_std;
    std::optional<double> damping_std;
    bool overdamped = false;       // real eigenvalue
    bool alias_ambiguous = false;  // negative real eigenvalue, principal log branch used
};

struct ModalParameters {
    std::vector<Mode> modes;  // ascending frequency
    double Ts = 0.0;
    std::size_t sources = 1;   // identifications that were aggregated
    std::size_t unpaired = 0;  // modes dropped because not every source had a partner
};

inline constexpr double kRankTolerance = 1e-10;

/// min(floor(samples / 2), 200).
std::size_t default_hankel_size(std::size_t samples);

/// y[0] holds y_1. Throws TooShortError unless y has 2n samples.
HankelPair build_hankel(std::span<const double> y, std::size_t n);

std::vector<double> singular_values(const HankelPair& h);

/// Truncated-SVD realization: A = S^-1/2 U' H1 V S^-1/2, b = first column of S^1/2 V',
/// c = first row of U S^1/2. Throws RankDeficientError when order exceeds the number of
/// singular values above kRankTolerance * sigma_1.
StateSpaceRealization era_realize(const HankelPair& h, std::size_t order, double Ts);

/// omega_n = |ln lambda| / (2 pi Ts), zeta = -Re(ln lambda) / |ln lambda|.
Mode mode_from_eigenvalue(std::complex<double> lambda, double Ts);

/// Inverse of mode_from_eigenvalue for 0 <= zeta <= 1.
std::complex<double> eigenvalue_from_mode(double freq_hz, double damping, double Ts);

/// Power-of-two diagonal d such that diag(d)^-1 A diag(d) has comparable row and column
/// norms. The scaling is exact in floating point.
Eigen::VectorXd balancing_scale(const Eigen::MatrixXd& A);

/// Eigenvalues of A computed on its balanced similar matrix.
Eigen::VectorXcd balanced_eigenvalues(const Eigen::MatrixXd& A);

/// One mode per conjugate pair. Throws SingularModeError for a zero eigenvalue.
ModalParameters modal_parameters(const Eigen::MatrixXd& A, double Ts);
ModalParameters modal_parameters(const StateSpaceRealization& r);

/// Greedy frequency pairing against the first entry, then per-mode mean and sample
/// standard deviation. The eigenvalue is re-synthesised from the mean frequency and damping.
ModalParameters aggregate_uncertainty(std::span<const ModalParameters> per_impact);

void to_json(nlohmann::json& j, const StateSpaceRealization& r);
void from_json(const nlohmann::json& j, StateSpaceRealization& r);
void to_json(nlohmann::json& j, const ModalParameters& m);
void from_json(const nlohmann::json& j, ModalParameters& m);

}  // namespace modalid
