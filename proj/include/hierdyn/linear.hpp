#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SVD>
#include <unsupported/Eigen/MatrixFunctions>

#include "hierdyn/check.hpp"
#include "hierdyn/error.hpp"
#include "hierdyn/vector_field.hpp"

namespace hierdyn {

class LinearAlgebraError : public Error {
public:
    using Error::Error;
};

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// x' = A x.
template <typename Scalar>
struct LinearSystem {
    MatrixX<Scalar> A;

    explicit LinearSystem(MatrixX<Scalar> a) : A(std::move(a))
    {
        if (A.rows() != A.cols()) throw LinearAlgebraError("system matrix must be square");
        if (A.size() == 0) throw LinearAlgebraError("system matrix is empty");
        if (!A.allFinite()) throw LinearAlgebraError("system matrix has non-finite entries");
    }

    Eigen::Index dimension() const { return A.rows(); }
};

/// pi(x) = P x with P of full row rank n < m.
template <typename Scalar>
struct LinearProjection {
    MatrixX<Scalar> P;

    explicit LinearProjection(MatrixX<Scalar> p, Scalar tol = Scalar(1e-10)) : P(std::move(p))
    {
        if (P.size() == 0) throw LinearAlgebraError("projection matrix is empty");
        if (!P.allFinite()) throw LinearAlgebraError("projection matrix has non-finite entries");
        if (P.rows() >= P.cols())
            throw LinearAlgebraError("no reduction: projection must have fewer rows than columns");
        Eigen::JacobiSVD<MatrixX<Scalar>> svd(P);
        svd.setThreshold(tol);
        if (svd.rank() < P.rows()) throw LinearAlgebraError("projection matrix is rank deficient");
    }
};

/// A W = W K on an A-invariant kernel basis W.
template <typename Scalar>
struct StructureConstants {
    MatrixX<Scalar> K;
    /// |A W - W K|_F / |A W|_F (0 when A W = 0).
    Scalar residual = 0;
};

/// Orthonormal basis (m x (m-n) columns) of ker P.
template <typename Derived>
MatrixX<typename Derived::Scalar> kernel_basis(const Eigen::MatrixBase<Derived>& P,
                                               typename Derived::Scalar tol = typename Derived::Scalar(1e-10))
{
    using Scalar = typename Derived::Scalar;
    const Eigen::Index n = P.rows(), m = P.cols();
    if (m == 0) throw LinearAlgebraError("projection matrix is empty");
    Eigen::JacobiSVD<MatrixX<Scalar>> svd(P, Eigen::ComputeFullV);
    svd.setThreshold(tol);
    if (svd.rank() < std::min(n, m)) throw LinearAlgebraError("projection matrix is rank deficient");
    if (n >= m) throw LinearAlgebraError("no reduction: kernel of P is trivial");
    return svd.matrixV().rightCols(m - n);
}

/// Route B: K = (W^T W)^{-1} W^T A W and its residual.
template <typename DerivedA, typename DerivedW>
StructureConstants<typename DerivedA::Scalar> structure_constants(const Eigen::MatrixBase<DerivedA>& A,
                                                                  const Eigen::MatrixBase<DerivedW>& W)
{
    using Scalar = typename DerivedA::Scalar;
    StructureConstants<Scalar> sc;
    MatrixX<Scalar> AW = A * W;
    MatrixX<Scalar> G = W.transpose() * W;
    sc.K = G.ldlt().solve(W.transpose() * AW);
    Scalar scale = AW.norm();
    Scalar floor = std::numeric_limits<Scalar>::epsilon() * A.norm() * W.norm();
    sc.residual = scale <= floor ? Scalar(0) : Scalar((AW - W * sc.K).norm() / scale);
    return sc;
}

template <typename Scalar>
struct KernelInvariance {
    CheckReport report;
    /// Present when the kernel is A-invariant.
    std::optional<StructureConstants<Scalar>> constants;
};

/// Route A: ker P is A-invariant iff P A W = 0. The residual is
/// |P A W|_F / (|P|_2 |A|_F).
template <typename DerivedA, typename DerivedP>
KernelInvariance<typename DerivedA::Scalar> kernel_invariance_check(
    const Eigen::MatrixBase<DerivedA>& A, const Eigen::MatrixBase<DerivedP>& P,
    typename DerivedA::Scalar tol = typename DerivedA::Scalar(1e-8))
{
    using Scalar = typename DerivedA::Scalar;
    if (A.rows() != A.cols()) throw LinearAlgebraError("system matrix must be square");
    if (P.cols() != A.rows()) throw LinearAlgebraError("projection and system dimensions differ");
    MatrixX<Scalar> W = kernel_basis(P);
    MatrixX<Scalar> PAW = P * A * W;
    Eigen::JacobiSVD<MatrixX<Scalar>> psvd(P);
    Scalar denom = psvd.singularValues()(0) * A.norm();
    Scalar res = denom > 0 ? Scalar(PAW.norm() / denom) : Scalar(0);

    KernelInvariance<Scalar> out;
    CheckReport& r = out.report;
    r.name = "kernel-invariance";
    r.method = Method::Numeric;
    r.max_residual = static_cast<double>(res);
    if (res < tol) {
        out.constants = structure_constants(A, W);
        r.details = "ker P is A-invariant";
    } else {
        r.verdict = Verdict::Fail;
        Eigen::JacobiSVD<MatrixX<Scalar>> s(PAW, Eigen::ComputeThinV);
        Eigen::Matrix<Scalar, Eigen::Dynamic, 1> x = W * s.matrixV().col(0);
        r.witness = x.template cast<double>().eval();
        r.details = "A maps ker P outside itself";
    }
    return out;
}

/// Route B verdict on its own: invariant iff the structure-constant residual is below tol.
template <typename DerivedA, typename DerivedP>
bool structure_constants_invariant(const Eigen::MatrixBase<DerivedA>& A, const Eigen::MatrixBase<DerivedP>& P,
                                   typename DerivedA::Scalar tol = typename DerivedA::Scalar(1e-8))
{
    return structure_constants(A, kernel_basis(P)).residual < tol;
}

/// B = P A P^+ such that B P = P A; the reduced system is y' = B y.
template <typename DerivedA, typename DerivedP>
MatrixX<typename DerivedA::Scalar> reduced_matrix(const Eigen::MatrixBase<DerivedA>& A,
                                                  const Eigen::MatrixBase<DerivedP>& P,
                                                  typename DerivedA::Scalar tol = typename DerivedA::Scalar(1e-8))
{
    using Scalar = typename DerivedA::Scalar;
    auto inv = kernel_invariance_check(A, P, tol);
    if (!inv.report.passed()) throw LinearAlgebraError("reduced_matrix: ker P is not A-invariant");
    MatrixX<Scalar> Pd = P;
    MatrixX<Scalar> B = Pd * A * Pd.completeOrthogonalDecomposition().pseudoInverse();
    Scalar scale = std::max(Scalar(1), Scalar(Pd.norm() * A.norm()));
    if ((B * Pd - Pd * A).norm() > Scalar(1e-10) * scale)
        throw LinearAlgebraError("reduced_matrix: B P = P A does not hold to 1e-10");
    return B;
}

template <typename Scalar>
struct LinearReduction {
    MatrixX<Scalar> W;  // orthonormal kernel basis, m x k
    MatrixX<Scalar> P;  // orthonormal complement as rows, (m-k) x m
    MatrixX<Scalar> B;  // reduced matrix, (m-k) x (m-k)
};

/// sin of the largest principal angle between the column spans of two
/// orthonormal bases (1 when dimensions differ).
template <typename DerivedU, typename DerivedV>
typename DerivedU::Scalar subspace_angle(const Eigen::MatrixBase<DerivedU>& U, const Eigen::MatrixBase<DerivedV>& V)
{
    using Scalar = typename DerivedU::Scalar;
    if (U.cols() != V.cols() || U.rows() != V.rows()) return Scalar(1);
    if (U.cols() == 0) return Scalar(0);
    MatrixX<Scalar> R = V - U * (U.transpose() * V);
    return Eigen::JacobiSVD<MatrixX<Scalar>>(R).singularValues()(0);
}

namespace detail {

template <typename Scalar>
std::vector<std::complex<Scalar>> block_eigenvalues(const MatrixX<Scalar>& T, Eigen::Index p, Eigen::Index s)
{
    if (s == 1) return {std::complex<Scalar>(T(p, p), 0)};
    Scalar a = T(p, p), b = T(p, p + 1), c = T(p + 1, p), d = T(p + 1, p + 1);
    std::complex<Scalar> mean((a + d) / 2, 0);
    std::complex<Scalar> disc = std::sqrt(std::complex<Scalar>((a - d) * (a - d) / 4 + b * c, 0));
    return {mean + disc, mean - disc};
}

/// Swaps the adjacent diagonal blocks of sizes p1, p2 starting at row p of
/// the quasi-triangular T, updating Q so that A = Q T Q^T still holds.
/// Returns false when the blocks share an eigenvalue and are coupled.
template <typename Scalar>
bool swap_schur_blocks(MatrixX<Scalar>& T, MatrixX<Scalar>& Q, Eigen::Index p, Eigen::Index p1, Eigen::Index p2)
{
    const Eigen::Index s = p1 + p2;
    const Scalar scale = std::max(T.norm(), Scalar(1));
    auto e1 = block_eigenvalues<Scalar>(T, p, p1);
    auto e2 = block_eigenvalues<Scalar>(T, p + p1, p2);
    Scalar gap = std::numeric_limits<Scalar>::infinity();
    for (auto a : e1)
        for (auto b : e2) gap = std::min(gap, std::abs(a - b));

    MatrixX<Scalar> Z = MatrixX<Scalar>::Zero(s, s);
    if (gap <= Scalar(1e-10) * scale) {
        if (T.block(p, p + p1, p1, p2).norm() > Scalar(1e-10) * scale) return false;
        Z.block(p1, 0, p2, p2).setIdentity();
        Z.block(0, p2, p1, p1).setIdentity();
    } else {
        // T11 X - X T22 = -T12 via its Kronecker form.
        MatrixX<Scalar> T11 = T.block(p, p, p1, p1), T22 = T.block(p + p1, p + p1, p2, p2);
        MatrixX<Scalar> K(p1 * p2, p1 * p2);
        K.setZero();
        for (Eigen::Index j = 0; j < p2; ++j) {
            K.block(j * p1, j * p1, p1, p1) += T11;
            for (Eigen::Index i = 0; i < p2; ++i)
                K.block(j * p1, i * p1, p1, p1) -= T22(i, j) * MatrixX<Scalar>::Identity(p1, p1);
        }
        MatrixX<Scalar> T12 = T.block(p, p + p1, p1, p2);
        Eigen::Matrix<Scalar, Eigen::Dynamic, 1> rhs =
            -Eigen::Map<Eigen::Matrix<Scalar, Eigen::Dynamic, 1>>(T12.data(), p1 * p2);
        Eigen::Matrix<Scalar, Eigen::Dynamic, 1> xv = K.fullPivLu().solve(rhs);
        MatrixX<Scalar> X = Eigen::Map<MatrixX<Scalar>>(xv.data(), p1, p2);
        MatrixX<Scalar> basis(s, p2);
        basis.topRows(p1) = X;
        basis.bottomRows(p2).setIdentity();
        Eigen::HouseholderQR<MatrixX<Scalar>> qr(basis);
        Z = qr.householderQ() * MatrixX<Scalar>::Identity(s, s);
    }
    T.middleRows(p, s) = Z.transpose() * T.middleRows(p, s);
    T.middleCols(p, s) = T.middleCols(p, s) * Z;
    Q.middleCols(p, s) = Q.middleCols(p, s) * Z;
    if (T.block(p + p2, p, p1, p2).norm() > Scalar(1e-8) * scale) return false;
    T.block(p + p2, p, p1, p2).setZero();
    return true;
}

}  // namespace detail

/// A-invariant subspaces reachable as leading columns of a reordered real
/// Schur form, i.e. sums of real eigenspaces and complex-pair planes. Each
/// subspace W (dimension 1..m-1) is returned with P spanning its orthogonal
/// complement and the reduced matrix B = P A P^T. At most max_combos block
/// subsets are tried, smallest first. Coupled repeated eigenvalues are only
/// split in the order Schur delivers them, so the list is partial.
template <typename Derived>
std::vector<LinearReduction<typename Derived::Scalar>> enumerate_linear_reductions(
    const Eigen::MatrixBase<Derived>& A, typename Derived::Scalar tol = typename Derived::Scalar(1e-8),
    std::size_t max_combos = 1024)
{
    using Scalar = typename Derived::Scalar;
    using Mat = MatrixX<Scalar>;
    const Eigen::Index m = A.rows();
    if (A.rows() != A.cols()) throw LinearAlgebraError("system matrix must be square");
    std::vector<LinearReduction<Scalar>> out;
    if (m < 2) return out;

    Eigen::RealSchur<Mat> schur(Mat(A), true);
    if (schur.info() != Eigen::Success) throw LinearAlgebraError("real Schur decomposition did not converge");
    const Mat T0 = schur.matrixT();
    const Mat Q0 = schur.matrixU();
    std::vector<Eigen::Index> sizes;
    for (Eigen::Index i = 0; i < m;) {
        Eigen::Index s = (i + 1 < m && T0(i + 1, i) != Scalar(0)) ? 2 : 1;
        sizes.push_back(s);
        i += s;
    }
    const std::size_t nb = sizes.size();

    // Subsets of blocks, smallest cardinality first, excluding none and all.
    std::vector<std::vector<std::size_t>> subsets;
    for (std::size_t card = 1; card < nb && subsets.size() < max_combos; ++card) {
        std::vector<bool> pick(nb, false);
        std::fill(pick.begin(), pick.begin() + static_cast<std::ptrdiff_t>(card), true);
        do {
            std::vector<std::size_t> s;
            for (std::size_t i = 0; i < nb; ++i)
                if (pick[i]) s.push_back(i);
            subsets.push_back(std::move(s));
        } while (subsets.size() < max_combos && std::prev_permutation(pick.begin(), pick.end()));
    }

    const Scalar anorm = A.norm();
    for (const auto& subset : subsets) {
        Mat T = T0, Q = Q0;
        std::vector<std::size_t> order(nb);
        for (std::size_t i = 0; i < nb; ++i) order[i] = i;
        bool ok = true;
        Eigen::Index dim = 0;
        for (std::size_t target = 0; target < subset.size() && ok; ++target) {
            std::size_t pos =
                static_cast<std::size_t>(std::find(order.begin(), order.end(), subset[target]) - order.begin());
            while (pos > target) {
                Eigen::Index row = 0;
                for (std::size_t i = 0; i + 1 < pos; ++i) row += sizes[order[i]];
                if (!detail::swap_schur_blocks<Scalar>(T, Q, row, sizes[order[pos - 1]], sizes[order[pos]])) {
                    ok = false;
                    break;
                }
                std::swap(order[pos - 1], order[pos]);
                --pos;
            }
            dim += sizes[subset[target]];
        }
        if (!ok) continue;
        Mat W = Q.leftCols(dim);
        // Re-orthonormalize against accumulated rounding.
        Eigen::HouseholderQR<Mat> qrw(W);
        W = qrw.householderQ() * Mat::Identity(m, dim);
        bool dup = false;
        for (const auto& r : out) {
            if (r.W.cols() == dim && subspace_angle(r.W, W) < Scalar(1e-6)) {
                dup = true;
                break;
            }
        }
        if (dup) continue;
        Mat full = qrw.householderQ() * Mat::Identity(m, m);
        Mat P = full.rightCols(m - dim).transpose();
        auto check = kernel_invariance_check(A, P, tol);
        if (!check.report.passed()) continue;
        Mat B = P * A * P.transpose();
        if ((B * P - P * A).norm() > Scalar(1e-10) * std::max(Scalar(1), anorm)) continue;
        out.push_back({std::move(W), std::move(P), std::move(B)});
    }
    return out;
}

/// Matrix exponential by scaling and squaring.
template <typename Derived>
MatrixX<typename Derived::Scalar> expm(const Eigen::MatrixBase<Derived>& A)
{
    MatrixX<typename Derived::Scalar> M = A;
    return M.exp();
}

/// The field x' = A x on the given coordinates.
VectorField linear_field(const Eigen::Ref<const Eigen::MatrixXd>& A, const SymbolList& coords);

struct TrivialSymmetries {
    VectorField dynamics;  // the field A x itself
    VectorField euler;     // sum_i x_i d/dx_i
    CheckReport dynamics_check;
    CheckReport euler_check;
};

/// The two symmetries every linear system has, each verified with is_symmetry.
TrivialSymmetries trivial_symmetries(const Eigen::Ref<const Eigen::MatrixXd>& A, const SymbolList& coords);

}  // namespace hierdyn
