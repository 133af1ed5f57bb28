#pragma once

// Geometry of (S^{d-1})^n: normalization, tangent projection, Gram matrices,
// simplex configurations and the scalar order parameters.

#include "tokdyn/rng.hpp"

#include <Eigen/Dense>

#include <span>

namespace tokdyn {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Index = Eigen::Index;

inline constexpr double kNormTolerance = 1e-12;
inline constexpr double kOrthogonalityTolerance = 1e-10;
inline constexpr double kPsdTolerance = 1e-8;
inline constexpr double kZeroNorm = 1e-300;

class UnitVector {
  public:
    // Throws InvalidArgument unless | |v| - 1 | <= kNormTolerance.
    static UnitVector from_unit(Vec v);

    [[nodiscard]] const Vec& coords() const { return coords_; }
    [[nodiscard]] Index dim() const { return coords_.size(); }
    operator const Vec&() const { return coords_; }  // NOLINT(google-explicit-constructor)

  private:
    explicit UnitVector(Vec v) : coords_(std::move(v)) {}
    friend UnitVector normalize(const Vec& v);

    Vec coords_;
};

struct TangentVector {
    UnitVector base;
    Vec vec;
};

// n tokens stored as the columns of a d x n matrix.
class TokenConfig {
  public:
    // Validates shape (n >= 2, d >= 2) and unit column norms.
    explicit TokenConfig(Mat tokens);

    // Normalizes every column first; throws ZeroVector on a vanishing column.
    static TokenConfig from_directions(const Mat& directions);

    [[nodiscard]] Index n() const { return tokens_.cols(); }
    [[nodiscard]] Index d() const { return tokens_.rows(); }
    [[nodiscard]] const Mat& matrix() const { return tokens_; }
    [[nodiscard]] auto token(Index i) const { return tokens_.col(i); }
    [[nodiscard]] UnitVector unit(Index i) const { return UnitVector::from_unit(tokens_.col(i)); }

    // Applies the same orthogonal map to every token.
    [[nodiscard]] TokenConfig rotated(const Mat& orthogonal) const;
    // Column permutation: result.token(k) == token(perm[k]).
    [[nodiscard]] TokenConfig permuted(std::span<const Index> perm) const;

  private:
    Mat tokens_;
};

class GramMatrix {
  public:
    // Checks symmetry and unit diagonal; PSD is checked separately.
    explicit GramMatrix(Mat entries);

    [[nodiscard]] const Mat& entries() const { return entries_; }
    [[nodiscard]] Index n() const { return entries_.rows(); }
    [[nodiscard]] double operator()(Index i, Index j) const { return entries_(i, j); }
    [[nodiscard]] double min_eigenvalue() const;
    [[nodiscard]] bool is_psd() const { return min_eigenvalue() >= -kPsdTolerance; }

  private:
    Mat entries_;
};

UnitVector normalize(const Vec& v);
TangentVector tangent_project(const UnitVector& x, const Vec& v);
GramMatrix gram(const TokenConfig& X);

// Tokens with every pairwise overlap equal to gamma: Cholesky factor of
// (1-gamma) I + gamma 11^T embedded in R^d, then carried by a Haar-random
// orthonormal frame when a stream is supplied.
TokenConfig simplex_config(Index n, Index d, double gamma, Stream* rng = nullptr);
Mat simplex_gram(Index n, double gamma);

double mean_overlap(const TokenConfig& X);
double mean_overlap(const Mat& tokens);
double kappa(const TokenConfig& X);

// Independent uniform points on S^{d-1}.
TokenConfig uniform_config(Index n, Index d, Stream& rng);
Mat uniform_points(Index n, Index d, Stream& rng);

// Haar-distributed d x k matrix with orthonormal columns (k <= d).
Mat random_orthonormal_frame(Index d, Index k, Stream& rng);

// Normalizes every column of `m` in place; throws ZeroVector on a vanishing column.
void normalize_columns(Mat& m);

}  // namespace tokdyn
