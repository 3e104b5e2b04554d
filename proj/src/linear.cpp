#include "hierdyn/linear.hpp"

#include "hierdyn/liesym.hpp"

namespace hierdyn {

VectorField linear_field(const Eigen::Ref<const Eigen::MatrixXd>& A, const SymbolList& coords)
{
    const auto m = static_cast<Eigen::Index>(coords.size());
    if (A.rows() != m || A.cols() != m) throw LinearAlgebraError("matrix size does not match the coordinate count");
    if (!A.allFinite()) throw LinearAlgebraError("system matrix has non-finite entries");
    std::vector<ScalarExpr> comps;
    comps.reserve(coords.size());
    for (Eigen::Index i = 0; i < m; ++i) {
        ScalarExpr c;
        for (Eigen::Index j = 0; j < m; ++j) {
            if (A(i, j) != 0.0) c = c + ScalarExpr(A(i, j)) * ScalarExpr::symbol(coords[static_cast<std::size_t>(j)]);
        }
        comps.push_back(simplify(c));
    }
    return VectorField(coords, std::move(comps));
}

TrivialSymmetries trivial_symmetries(const Eigen::Ref<const Eigen::MatrixXd>& A, const SymbolList& coords)
{
    VectorField v = linear_field(A, coords);
    VectorField euler = linear_field(Eigen::MatrixXd::Identity(A.rows(), A.cols()), coords);
    Domain box = Domain::cube(A.rows(), -1.0, 1.0);
    CheckReport dyn = is_symmetry(v, v, box);
    CheckReport eul = is_symmetry(v, euler, box);
    return {v, euler, dyn, eul};
}

}  // namespace hierdyn
