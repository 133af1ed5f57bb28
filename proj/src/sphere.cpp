#include "tokdyn/sphere.hpp"

#include "tokdyn/errors.hpp"

#include <cmath>
#include <string>

namespace tokdyn {

UnitVector UnitVector::from_unit(Vec v) {
    const double norm = v.norm();
    require(std::abs(norm - 1.0) <= kNormTolerance, ErrorCode::InvalidArgument,
            "vector norm " + std::to_string(norm) + " is not 1");
    return UnitVector(std::move(v));
}

UnitVector normalize(const Vec& v) {
    const double norm = v.norm();
    require(norm >= kZeroNorm, ErrorCode::ZeroVector, "cannot normalize a zero vector");
    return UnitVector(v / norm);
}

TangentVector tangent_project(const UnitVector& x, const Vec& v) {
    const Vec& base = x.coords();
    require(base.size() == v.size(), ErrorCode::InvalidArgument, "tangent_project: dimension mismatch");
    return TangentVector{x, v - base.dot(v) * base};
}

TokenConfig::TokenConfig(Mat tokens) : tokens_(std::move(tokens)) {
    require(tokens_.cols() >= 2, ErrorCode::InvalidArgument, "a token configuration needs n >= 2");
    require(tokens_.rows() >= 2, ErrorCode::DimensionTooSmall, "a token configuration needs d >= 2");
    for (Index i = 0; i < tokens_.cols(); ++i) {
        const double norm = tokens_.col(i).norm();
        require(std::abs(norm - 1.0) <= kNormTolerance, ErrorCode::InvalidArgument,
                "token " + std::to_string(i) + " has norm " + std::to_string(norm));
    }
}

TokenConfig TokenConfig::from_directions(const Mat& directions) {
    Mat tokens = directions;
    normalize_columns(tokens);
    return TokenConfig(std::move(tokens));
}

TokenConfig TokenConfig::rotated(const Mat& orthogonal) const {
    require(orthogonal.rows() == d() && orthogonal.cols() == d(), ErrorCode::InvalidArgument,
            "rotation must be d x d");
    return from_directions(orthogonal * tokens_);
}

TokenConfig TokenConfig::permuted(std::span<const Index> perm) const {
    require(static_cast<Index>(perm.size()) == n(), ErrorCode::InvalidArgument, "permutation size mismatch");
    Mat out(d(), n());
    for (Index k = 0; k < n(); ++k) out.col(k) = tokens_.col(perm[static_cast<std::size_t>(k)]);
    return TokenConfig(std::move(out));
}

GramMatrix::GramMatrix(Mat entries) : entries_(std::move(entries)) {
    require(entries_.rows() == entries_.cols(), ErrorCode::InvalidArgument, "Gram matrix must be square");
    for (Index i = 0; i < entries_.rows(); ++i) {
        require(std::abs(entries_(i, i) - 1.0) <= kNormTolerance, ErrorCode::InvalidArgument,
                "Gram diagonal must be 1");
        for (Index j = 0; j < i; ++j) {
            require(entries_(i, j) == entries_(j, i), ErrorCode::InvalidArgument, "Gram matrix must be symmetric");
        }
    }
}

double GramMatrix::min_eigenvalue() const {
    Eigen::SelfAdjointEigenSolver<Mat> solver(entries_, Eigen::EigenvaluesOnly);
    return solver.eigenvalues().minCoeff();
}

GramMatrix gram(const TokenConfig& X) {
    Mat g = X.matrix().transpose() * X.matrix();
    // Symmetrize exactly and pin the diagonal; both differ from the raw
    // product only by rounding.
    g = 0.5 * (g + g.transpose()).eval();
    g.diagonal().setOnes();
    return GramMatrix(std::move(g));
}

Mat simplex_gram(Index n, double gamma) {
    Mat s = Mat::Constant(n, n, gamma);
    s.diagonal().setOnes();
    return s;
}

TokenConfig simplex_config(Index n, Index d, double gamma, Stream* rng) {
    require(n >= 2, ErrorCode::InvalidArgument, "simplex_config needs n >= 2");
    require(d >= n, ErrorCode::DimensionTooSmall,
            "simplex_config needs d >= n (d=" + std::to_string(d) + ", n=" + std::to_string(n) + ")");
    const double lower = -1.0 / static_cast<double>(n - 1);
    require(gamma > lower && gamma < 1.0, ErrorCode::OverlapOutOfRange,
            "overlap " + std::to_string(gamma) + " outside (-1/(n-1), 1)");

    const Eigen::LLT<Mat> llt(simplex_gram(n, gamma));
    require(llt.info() == Eigen::Success, ErrorCode::NumericalFailure, "simplex Gram matrix not positive definite");
    // Rows of L are the token coordinates in R^n.
    const Mat coords = llt.matrixL().toDenseMatrix().transpose();  // n x n, column i = token i

    Mat tokens;
    if (rng != nullptr) {
        tokens = random_orthonormal_frame(d, n, *rng) * coords;
    } else {
        tokens = Mat::Zero(d, n);
        tokens.topRows(n) = coords;
    }
    normalize_columns(tokens);
    return TokenConfig(std::move(tokens));
}

double mean_overlap(const Mat& tokens) {
    const Vec barycenter = tokens.rowwise().mean();
    return barycenter.squaredNorm();
}

double mean_overlap(const TokenConfig& X) { return mean_overlap(X.matrix()); }

double kappa(const TokenConfig& X) { return mean_overlap(X) / static_cast<double>(X.d()); }

Mat uniform_points(Index n, Index d, Stream& rng) {
    Mat points(d, n);
    rng.fill_normal(std::span<double>(points.data(), static_cast<std::size_t>(points.size())));
    normalize_columns(points);
    return points;
}

TokenConfig uniform_config(Index n, Index d, Stream& rng) { return TokenConfig(uniform_points(n, d, rng)); }

Mat random_orthonormal_frame(Index d, Index k, Stream& rng) {
    require(k <= d, ErrorCode::DimensionTooSmall, "frame wider than the ambient dimension");
    Mat gaussian(d, k);
    rng.fill_normal(std::span<double>(gaussian.data(), static_cast<std::size_t>(gaussian.size())));
    const Eigen::HouseholderQR<Mat> qr(gaussian);
    Mat q = qr.householderQ() * Mat::Identity(d, k);
    // Sign convention making the law exactly Haar.
    const Mat r = qr.matrixQR().topLeftCorner(k, k);
    for (Index j = 0; j < k; ++j) {
        if (r(j, j) < 0.0) q.col(j) *= -1.0;
    }
    return q;
}

void normalize_columns(Mat& m) {
    for (Index i = 0; i < m.cols(); ++i) {
        const double norm = m.col(i).norm();
        require(norm >= kZeroNorm, ErrorCode::ZeroVector, "column " + std::to_string(i) + " vanished");
        m.col(i) /= norm;
    }
}

}  // namespace tokdyn
