#include "etcons/linalg.hpp"

#include "etcons/errors.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <complex>
#include <sstream>

#define lapack_complex_float std::complex<float>
#define lapack_complex_double std::complex<double>
#include <lapacke.h>

namespace etcons {

namespace {

// dgees takes a plain function pointer for eigenvalue selection, so the
// selection rule travels through thread-local state.
enum class Select { ImaginaryAxis, OpenLeftHalf };
thread_local Select t_select = Select::ImaginaryAxis;
thread_local double t_select_tol = 0.0;

lapack_logical select_eigenvalue(const double* re, const double* /*im*/) {
    switch (t_select) {
    case Select::ImaginaryAxis:
        return std::abs(*re) <= t_select_tol ? 1 : 0;
    case Select::OpenLeftHalf:
        return *re < 0.0 ? 1 : 0;
    }
    return 0;
}

struct OrderedSchur {
    Mat T;
    Mat Q;
    Eigen::Index selected = 0;
    std::vector<std::complex<double>> values;
};

OrderedSchur ordered_schur(const Mat& a, Select rule, double tol) {
    const auto n = static_cast<lapack_int>(a.rows());
    OrderedSchur out;
    out.T = a;
    out.Q = Mat::Zero(a.rows(), a.rows());
    std::vector<double> wr(a.rows()), wi(a.rows());
    t_select = rule;
    t_select_tol = tol;
    lapack_int sdim = 0;
    const lapack_int info = LAPACKE_dgees(LAPACK_COL_MAJOR, 'V', 'S', select_eigenvalue, n,
                                          out.T.data(), n, &sdim, wr.data(), wi.data(),
                                          out.Q.data(), n);
    if (info < 0 || (info > 0 && info <= n)) {
        throw Error("real Schur factorization failed (dgees info " + std::to_string(info) + ")");
    }
    out.selected = sdim;
    out.values.reserve(a.rows());
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        out.values.emplace_back(wr[i], wi[i]);
    }
    return out;
}

std::string format_complex(std::complex<double> z) {
    std::ostringstream os;
    os.precision(6);
    os << z.real() << (z.imag() < 0 ? " - " : " + ") << std::abs(z.imag()) << "i";
    return os.str();
}

void require_square(const Mat& a, const char* what) {
    if (a.rows() != a.cols()) {
        throw DimensionError(std::string(what) + " must be square, got " +
                             std::to_string(a.rows()) + "x" + std::to_string(a.cols()));
    }
}

void require_finite(const Mat& a, const char* what) {
    if (!a.allFinite()) {
        throw DimensionError(std::string(what) + " has non-finite entries");
    }
}

Mat kron(const Mat& a, const Mat& b) {
    Mat out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        for (Eigen::Index j = 0; j < a.cols(); ++j) {
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
        }
    }
    return out;
}

Eigen::Map<const Vec> as_vec(const Mat& m) { return {m.data(), m.size()}; }

Mat reshape(const Vec& v, Eigen::Index rows, Eigen::Index cols) {
    return Eigen::Map<const Mat>(v.data(), rows, cols);
}

// Congruence L^T (.) L^{-T} that makes a block with semisimple
// imaginary-axis spectrum skew-symmetric. Returns L.
Mat skew_congruence(const Mat& t11) {
    const Eigen::Index k = t11.rows();
    const double scale = 1.0 + t11.norm();
    if ((t11 + t11.transpose()).norm() <= 1e-12 * scale) {
        return Mat::Identity(k, k);
    }
    Eigen::ComplexEigenSolver<CMat> ces(t11.cast<std::complex<double>>());
    if (ces.info() != Eigen::Success) {
        throw NotNeutrallyStableError("eigen-decomposition of the imaginary-axis block failed");
    }
    CMat v = ces.eigenvectors();
    v.colwise().normalize();
    Eigen::FullPivLU<CMat> lu(v);
    if (!lu.isInvertible() || lu.rcond() < 1e-12) {
        throw NotNeutrallyStableError(
            "imaginary-axis eigenvectors are numerically dependent (defective Jordan block)");
    }
    const CMat vinv = lu.inverse();
    Mat w = (vinv.adjoint() * vinv).real();
    w = 0.5 * (w + w.transpose()).eval();
    Eigen::LLT<Mat> llt(w);
    if (llt.info() != Eigen::Success) {
        throw NotNeutrallyStableError("symmetrizing Gram matrix is not positive definite");
    }
    return llt.matrixL();
}

} // namespace

Mat matrix_exponential(const Mat& a, double t) {
    require_square(a, "matrix_exponential input");
    if (!std::isfinite(t)) {
        throw DimensionError("matrix_exponential time must be finite");
    }
    if (a.rows() == 0) {
        return a;
    }
    if (t == 0.0) {
        return Mat::Identity(a.rows(), a.cols());
    }
    const Mat at = a * t;
    return at.exp();
}

double spectral_norm(const Mat& a) {
    if (a.size() == 0) {
        return 0.0;
    }
    Eigen::JacobiSVD<Mat> svd(a);
    return svd.singularValues()(0);
}

std::vector<std::complex<double>> eigenvalues(const Mat& a) {
    require_square(a, "eigenvalue input");
    std::vector<std::complex<double>> out;
    if (a.rows() == 0) {
        return out;
    }
    Eigen::EigenSolver<Mat> es(a, false);
    const auto ev = es.eigenvalues();
    out.assign(ev.data(), ev.data() + ev.size());
    return out;
}

double spectral_abscissa(const Mat& a) {
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& z : eigenvalues(a)) {
        best = std::max(best, z.real());
    }
    return best;
}

Eigen::Index numeric_rank(const CMat& a, double tol) {
    if (a.size() == 0) {
        return 0;
    }
    Eigen::JacobiSVD<CMat> svd(a);
    const auto& sv = svd.singularValues();
    Eigen::Index r = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i) {
        if (sv(i) > tol) {
            ++r;
        }
    }
    return r;
}

double imaginary_axis_tolerance(const Mat& a) { return 1e-8 * (1.0 + spectral_norm(a)); }

Mat NeutralDecomposition::transform() const {
    Mat out(E.rows() + F.rows(), E.cols() > 0 ? E.cols() : F.cols());
    out << E, F;
    return out;
}

Mat NeutralDecomposition::inverse_transform() const {
    Mat out(Eplus.rows() > 0 ? Eplus.rows() : Fplus.rows(), Eplus.cols() + Fplus.cols());
    out << Eplus, Fplus;
    return out;
}

NeutralDecomposition neutral_stable_decompose(const Mat& a) {
    require_square(a, "system matrix");
    require_finite(a, "system matrix");
    if (a.rows() == 0) {
        throw DimensionError("system matrix is empty");
    }
    const Eigen::Index n = a.rows();
    const double norm = spectral_norm(a);
    const double axis_tol = 1e-8 * (1.0 + norm);

    OrderedSchur schur = ordered_schur(a, Select::ImaginaryAxis, axis_tol);

    std::vector<std::complex<double>> on_axis;
    for (const auto& z : schur.values) {
        if (z.real() > axis_tol) {
            throw NotNeutrallyStableError("eigenvalue " + format_complex(z) +
                                          " has positive real part");
        }
        if (std::abs(z.real()) <= axis_tol) {
            on_axis.push_back(z);
        }
    }
    const auto n1 = static_cast<Eigen::Index>(on_axis.size());
    if (schur.selected != n1) {
        throw Error("Schur reordering separated " + std::to_string(schur.selected) +
                    " eigenvalues, expected " + std::to_string(n1));
    }

    // Semisimplicity: rank(A - lambda I) = n - multiplicity per cluster.
    const double cluster_tol = 1e-6 * (1.0 + norm);
    std::vector<bool> used(on_axis.size(), false);
    for (std::size_t i = 0; i < on_axis.size(); ++i) {
        if (used[i]) {
            continue;
        }
        std::complex<double> centre = 0.0;
        Eigen::Index mult = 0;
        for (std::size_t j = i; j < on_axis.size(); ++j) {
            if (!used[j] && std::abs(on_axis[j] - on_axis[i]) <= cluster_tol) {
                used[j] = true;
                centre += on_axis[j];
                ++mult;
            }
        }
        centre /= static_cast<double>(mult);
        CMat shifted = a.cast<std::complex<double>>();
        shifted.diagonal().array() -= centre;
        const auto rank = numeric_rank(shifted, 1e-8 * (1.0 + norm));
        if (rank != n - mult) {
            throw NotNeutrallyStableError("imaginary-axis eigenvalue " + format_complex(centre) +
                                          " is not semisimple (rank " + std::to_string(rank) +
                                          ", expected " + std::to_string(n - mult) + ")");
        }
    }

    const Eigen::Index n2 = n - n1;
    const Mat t11 = schur.T.topLeftCorner(n1, n1);
    const Mat t12 = schur.T.topRightCorner(n1, n2);
    const Mat t22 = schur.T.bottomRightCorner(n2, n2);
    const Mat q1 = schur.Q.leftCols(n1);
    const Mat q2 = schur.Q.rightCols(n2);

    // T11 Z - Z T22 = -T12 decouples the blocks.
    Mat z = Mat::Zero(n1, n2);
    if (n1 > 0 && n2 > 0) {
        z = -t12;
        double scale = 1.0;
        const lapack_int info = LAPACKE_dtrsyl(
            LAPACK_COL_MAJOR, 'N', 'N', -1, static_cast<lapack_int>(n1),
            static_cast<lapack_int>(n2), t11.data(), static_cast<lapack_int>(n1), t22.data(),
            static_cast<lapack_int>(n2), z.data(), static_cast<lapack_int>(n1), &scale);
        if (info < 0) {
            throw Error("Sylvester solve failed (dtrsyl info " + std::to_string(info) + ")");
        }
        z /= scale;
    }

    NeutralDecomposition d;
    d.n1 = n1;
    Mat l = Mat::Identity(n1, n1);
    if (n1 > 0) {
        l = skew_congruence(t11);
    }
    // L^{-T} = (L^{-1})^T
    const Mat l_inv_t =
        l.triangularView<Eigen::Lower>().solve(Mat::Identity(n1, n1)).transpose();

    d.E = l.transpose() * (q1.transpose() - z * q2.transpose());
    d.F = q2.transpose();
    d.Eplus = q1 * l_inv_t;
    d.Fplus = q1 * z + q2;
    Mat x = l.transpose() * t11 * l_inv_t;
    d.X = 0.5 * (x - x.transpose());
    d.Y = t22;
    return d;
}

Mat design_gain_G(const Mat& a, const Mat& b) {
    if (b.rows() != a.rows()) {
        throw DimensionError("B must have as many rows as A");
    }
    const NeutralDecomposition d = neutral_stable_decompose(a);
    const Mat h = d.E * b;
    return -h.transpose() * d.E;
}

bool is_stabilizable(const Mat& a, const Mat& b) {
    require_square(a, "A");
    if (b.rows() != a.rows()) {
        throw DimensionError("B must have as many rows as A");
    }
    const Eigen::Index n = a.rows();
    const double norm = spectral_norm(a);
    const double tol = 1e-8 * (1.0 + norm);
    for (const auto& z : eigenvalues(a)) {
        if (z.real() < -tol) {
            continue;
        }
        CMat pbh(n, n + b.cols());
        pbh.leftCols(n) = a.cast<std::complex<double>>();
        pbh.leftCols(n).diagonal().array() -= z;
        pbh.rightCols(b.cols()) = b.cast<std::complex<double>>();
        if (numeric_rank(pbh, tol * (1.0 + spectral_norm(b))) < n) {
            return false;
        }
    }
    return true;
}

double feedback_margin(const Mat& a, const Mat& b, const Mat& k) {
    if (b.rows() != a.rows() || k.rows() != b.cols() || k.cols() != a.cols()) {
        throw DimensionError("feedback gain shape does not match (A, B)");
    }
    return -spectral_abscissa(a + b * k);
}

Mat solve_care(const Mat& a, const Mat& b, const Mat& q) {
    require_square(a, "A");
    const Eigen::Index n = a.rows();
    Mat h(2 * n, 2 * n);
    h << a, -b * b.transpose(), -q, -a.transpose();
    OrderedSchur schur = ordered_schur(h, Select::OpenLeftHalf, 0.0);
    if (schur.selected != n) {
        throw SynthesisError("Hamiltonian has " + std::to_string(schur.selected) +
                             " stable eigenvalues, expected " + std::to_string(n) +
                             "; pair is not stabilizable");
    }
    const Mat u11 = schur.Q.topLeftCorner(n, n);
    const Mat u21 = schur.Q.bottomLeftCorner(n, n);
    Eigen::FullPivLU<Mat> lu(u11);
    if (!lu.isInvertible()) {
        throw SynthesisError("Riccati stable subspace is not a graph");
    }
    Mat p = u21 * lu.inverse();
    return 0.5 * (p + p.transpose());
}

Mat stabilizing_feedback(const Mat& a, const Mat& b, double margin) {
    require_square(a, "A");
    require_finite(a, "A");
    require_finite(b, "B");
    if (b.rows() != a.rows()) {
        throw DimensionError("B must have as many rows as A");
    }
    if (!(margin > 0.0)) {
        throw SynthesisError("stability margin must be positive");
    }
    const Eigen::Index n = a.rows();
    const Eigen::Index m = b.cols();
    const double tol = 1e-9 * (1.0 + spectral_norm(a));
    Mat k = Mat::Zero(m, n);
    if (spectral_abscissa(a) <= -margin) {
        return k;
    }

    bool placed = false;
    if (m == 1) {
        Mat ctrb(n, n);
        Mat col = b;
        for (Eigen::Index i = 0; i < n; ++i) {
            ctrb.col(i) = col;
            col = a * col;
        }
        Eigen::JacobiSVD<Mat> svd(ctrb);
        const auto& sv = svd.singularValues();
        if (sv(n - 1) > 1e-10 * sv(0)) {
            // Ackermann: desired characteristic polynomial prod (s + margin * j).
            Mat phi = Mat::Identity(n, n);
            for (Eigen::Index j = 1; j <= n; ++j) {
                phi = phi * (a + margin * static_cast<double>(j) * Mat::Identity(n, n));
            }
            Vec last = Vec::Zero(n);
            last(n - 1) = 1.0;
            const Mat row = last.transpose() * ctrb.fullPivLu().inverse() * phi;
            k = -row;
            placed = feedback_margin(a, b, k) >= margin - tol;
        }
    }
    if (!placed) {
        const Mat shifted = a + margin * Mat::Identity(n, n);
        const Mat p = solve_care(shifted, b, Mat::Identity(n, n));
        k = -b.transpose() * p;
    }
    const double achieved = feedback_margin(a, b, k);
    if (achieved < margin - tol) {
        std::ostringstream os;
        os << "synthesized feedback reaches margin " << achieved << " < requested " << margin
           << "; pair is not stabilizable to that margin";
        throw SynthesisError(os.str());
    }
    return k;
}

double regulator_residual(std::span<const RegulatorAgent> agents, const Mat& s,
                          const RegulatorSolution& sol) {
    double worst = 0.0;
    for (std::size_t i = 0; i < agents.size(); ++i) {
        const auto& ag = agents[i];
        const Mat r1 = sol.Pi[i] * s - ag.A * sol.Pi[i] - ag.B * sol.U[i] - ag.E;
        const Mat r2 = ag.C * sol.Pi[i] + ag.F - sol.R;
        worst = std::max({worst, r1.norm(), r2.norm()});
    }
    return worst;
}

RegulatorSolution solve_regulator(std::span<const RegulatorAgent> agents, const Mat& s,
                                  const std::optional<Mat>& output_map) {
    require_square(s, "S");
    if (agents.empty()) {
        throw DimensionError("regulator needs at least one agent");
    }
    const Eigen::Index q = s.rows();
    const Eigen::Index p = agents.front().C.rows();
    double magnitude = s.cwiseAbs().maxCoeff();

    Eigen::Index unknowns = 0;
    Eigen::Index equations = 0;
    std::vector<Eigen::Index> offset;
    for (std::size_t i = 0; i < agents.size(); ++i) {
        const auto& ag = agents[i];
        const Eigen::Index ni = ag.A.rows();
        const Eigen::Index mi = ag.B.cols();
        const std::string tag = "agent " + std::to_string(i + 1) + ": ";
        if (ag.A.cols() != ni || ag.B.rows() != ni || ag.C.cols() != ni || ag.C.rows() != p ||
            ag.E.rows() != ni || ag.E.cols() != q || ag.F.rows() != p || ag.F.cols() != q) {
            throw DimensionError(tag + "regulator data shapes are inconsistent "
                                       "(need A n x n, B n x m, C p x n, E n x q, F p x q)");
        }
        for (const Mat* m : {&ag.A, &ag.B, &ag.C, &ag.E, &ag.F}) {
            require_finite(*m, "regulator input");
            if (m->size() > 0) {
                magnitude = std::max(magnitude, m->cwiseAbs().maxCoeff());
            }
        }
        offset.push_back(unknowns);
        unknowns += (ni + mi) * q;
        equations += (ni + p) * q;
    }
    const Eigen::Index r_offset = unknowns;
    if (output_map) {
        if (output_map->rows() != p || output_map->cols() != q) {
            throw DimensionError("prescribed output map must be p x q");
        }
        magnitude = std::max(magnitude, output_map->cwiseAbs().maxCoeff());
    } else {
        unknowns += p * q;
    }

    Mat lhs = Mat::Zero(equations, unknowns);
    Vec rhs = Vec::Zero(equations);
    Eigen::Index row = 0;
    const Mat iq = Mat::Identity(q, q);
    for (std::size_t i = 0; i < agents.size(); ++i) {
        const auto& ag = agents[i];
        const Eigen::Index ni = ag.A.rows();
        const Eigen::Index mi = ag.B.cols();
        const Eigen::Index pi_col = offset[i];
        const Eigen::Index u_col = pi_col + ni * q;

        // vec(Pi S - A Pi - B U) = vec(E)
        lhs.block(row, pi_col, ni * q, ni * q) =
            kron(s.transpose(), Mat::Identity(ni, ni)) - kron(iq, ag.A);
        lhs.block(row, u_col, ni * q, mi * q) = -kron(iq, ag.B);
        rhs.segment(row, ni * q) = as_vec(ag.E);
        row += ni * q;

        // vec(C Pi - R) = -vec(F)
        lhs.block(row, pi_col, p * q, ni * q) = kron(iq, ag.C);
        if (output_map) {
            rhs.segment(row, p * q) = as_vec(*output_map) - as_vec(ag.F);
        } else {
            lhs.block(row, r_offset, p * q, p * q) = -Mat::Identity(p * q, p * q);
            rhs.segment(row, p * q) = -as_vec(ag.F);
        }
        row += p * q;
    }

    Eigen::CompleteOrthogonalDecomposition<Mat> cod(lhs);
    const Vec sol_vec = cod.solve(rhs);

    RegulatorSolution sol;
    sol.unique = cod.rank() == unknowns;
    for (std::size_t i = 0; i < agents.size(); ++i) {
        const Eigen::Index ni = agents[i].A.rows();
        const Eigen::Index mi = agents[i].B.cols();
        sol.Pi.push_back(reshape(sol_vec.segment(offset[i], ni * q), ni, q));
        sol.U.push_back(reshape(sol_vec.segment(offset[i] + ni * q, mi * q), mi, q));
    }
    sol.R = output_map ? *output_map : reshape(sol_vec.segment(r_offset, p * q), p, q);
    sol.residual = regulator_residual(agents, s, sol);

    const double tol = 1e-8 * (1.0 + magnitude);
    if (!(sol.residual <= tol)) {
        std::ostringstream os;
        os << "regulator equations have no common output map (residual " << sol.residual
           << " > " << tol << ")";
        throw RegulatorError(os.str());
    }
    return sol;
}

} // namespace etcons
