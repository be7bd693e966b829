#pragma once

/**
 * @file linalg.hpp
 * @brief Dense linear-algebra kernel for the consensus protocols.
 *
 * Matrix exponential, the neutral-stability decomposition of a system
 * matrix into a skew-symmetric and a Hurwitz block, the consensus gain
 * built from it, stabilizing state feedback and the regulator-equation
 * solver used by the heterogeneous protocol.
 *
 * Everything here is a pure function of its arguments.
 */

#include <Eigen/Dense>

#include <complex>
#include <optional>
#include <span>
#include <vector>

namespace etcons {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using CMat = Eigen::MatrixXcd;

/// e^{A t}. Scaling and squaring with a degree-13 Pade approximant.
Mat matrix_exponential(const Mat& a, double t);

/// Largest singular value.
double spectral_norm(const Mat& a);

/// Largest real part over the spectrum of a square matrix.
double spectral_abscissa(const Mat& a);

std::vector<std::complex<double>> eigenvalues(const Mat& a);

/// Number of singular values above `tol`.
Eigen::Index numeric_rank(const CMat& a, double tol);

/// Tolerance for classifying an eigenvalue as lying on the imaginary axis.
double imaginary_axis_tolerance(const Mat& a);

/**
 * @brief Split of a neutrally stable A into imaginary-axis and Hurwitz parts.
 *
 * [E; F] A [Eplus Fplus] = blockdiag(X, Y) with X skew-symmetric (n1 x n1)
 * and Y Hurwitz. [Eplus Fplus] is the inverse of [E; F].
 */
struct NeutralDecomposition {
    Mat E;
    Mat F;
    Mat Eplus;
    Mat Fplus;
    Mat X;
    Mat Y;
    Eigen::Index n1 = 0;

    /// [E; F]
    Mat transform() const;
    /// [Eplus Fplus]
    Mat inverse_transform() const;
};

/**
 * @brief Decompose a neutrally stable matrix.
 *
 * Uses an ordered real Schur form (imaginary-axis cluster leading), a
 * Sylvester solve to decouple the two blocks, and a congruence that turns
 * the leading block exactly skew-symmetric.
 *
 * @throws NotNeutrallyStableError on an eigenvalue with positive real part
 *         or a defective imaginary-axis eigenvalue.
 * @throws DimensionError if `a` is not square or is empty.
 */
NeutralDecomposition neutral_stable_decompose(const Mat& a);

/// G = -B^T E^T E with E from neutral_stable_decompose(a).
Mat design_gain_G(const Mat& a, const Mat& b);

/// True when every eigenvalue with Re >= -tol passes the PBH rank test.
bool is_stabilizable(const Mat& a, const Mat& b);

/// -max Re eig(A + B K); positive means A + BK is Hurwitz.
double feedback_margin(const Mat& a, const Mat& b, const Mat& k);

/**
 * @brief Synthesize K with max Re eig(A + B K) <= -margin.
 *
 * Returns zero when A already meets the margin. Single-input controllable
 * pairs get pole placement at -margin * (1, 2, ..., n); everything else
 * gets LQR (Q = I, R = I) on the shifted pair (A + margin I, B).
 *
 * @throws SynthesisError when the result misses the margin.
 */
Mat stabilizing_feedback(const Mat& a, const Mat& b, double margin);

/// Continuous algebraic Riccati equation A^T P + P A - P B B^T P + Q = 0.
Mat solve_care(const Mat& a, const Mat& b, const Mat& q);

/// One follower's data for the regulator equations.
struct RegulatorAgent {
    Mat A;
    Mat B;
    Mat C;
    Mat E;
    Mat F;
};

struct RegulatorSolution {
    std::vector<Mat> Pi;
    std::vector<Mat> U;
    Mat R;
    /// Max over agents of ||Pi S - A Pi - B U - E||_F and ||C Pi + F - R||_F.
    double residual = 0.0;
    /// False when the stacked system is rank deficient and the minimum-norm
    /// member of the solution family was returned.
    bool unique = true;
};

/// Residual of a candidate solution, as defined on RegulatorSolution.
double regulator_residual(std::span<const RegulatorAgent> agents, const Mat& s,
                          const RegulatorSolution& sol);

/**
 * @brief Solve Pi_i S = A_i Pi_i + B_i U_i + E_i, R = C_i Pi_i + F_i for all i.
 *
 * All agents are stacked into one least-squares system. R is an unknown
 * shared by every agent unless `output_map` pins it.
 *
 * @throws RegulatorError if the residual exceeds 1e-8 * (1 + max |input|).
 * @throws DimensionError on inconsistent shapes.
 */
RegulatorSolution solve_regulator(std::span<const RegulatorAgent> agents, const Mat& s,
                                  const std::optional<Mat>& output_map = std::nullopt);

} // namespace etcons
