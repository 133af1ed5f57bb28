#pragma once

// Softmax attention fields on the sphere: attention weights, attended means,
// velocities B_theta, and Monte-Carlo estimators of the drift and of the
// shared-noise covariance kernel.

#include "tokdyn/rng.hpp"
#include "tokdyn/sphere.hpp"
#include "tokdyn/weights.hpp"

#include <cstddef>

namespace tokdyn {

class Temperature {
  public:
    // Throws InvalidArgument unless beta is finite and non-negative.
    explicit Temperature(double beta);
    [[nodiscard]] double value() const { return beta_; }

  private:
    double beta_;
};

struct AttentionRow {
    Vec weights;  // probability vector over the keys
};

AttentionRow attention_row(const Mat& A, const UnitVector& x, const TokenConfig& X, Temperature beta);
Vec attended_mean(const Mat& A, const UnitVector& x, const TokenConfig& X, Temperature beta);
Vec velocity(const HeadWeights& head, const UnitVector& x, const TokenConfig& X, Temperature beta);

// Column-wise stable softmax of a logits matrix (n keys x q queries), in place.
void softmax_columns(Mat& logits);

// Batched forms over q queries (columns of `queries`) attending to n keys.
// attention_weights returns n x q: column i is the row pi_{i -> .}.
Mat attention_weights(const Mat& A, const Mat& queries, const Mat& keys, double beta);
Mat attended_means(const Mat& A, const Mat& queries, const Mat& keys, double beta);
Mat velocities(const HeadWeights& head, const Mat& queries, const Mat& keys, double beta);

struct VectorEstimate {
    Vec mean;
    Vec stderr;
    std::size_t samples = 0;
};

struct MatrixEstimate {
    Mat mean;
    Mat stderr;
    std::size_t samples = 0;
};

enum class HeadSampling {
    Auto,     // Reduced when every query/key block is narrower than d, else Full.
    Full,     // Materialize (V, A) exactly as sample_head does.
    Reduced,  // Sample only the projections the field needs.
};

// Draws the attention field of one random head at a fixed set of queries and
// keys.
//
// The reduced route uses that W'^T Q, W^T K and G M have i.i.d. Gaussian rows
// with covariances Q^T Q, K^T K and M^T M, so a head acting on q <= n < d
// tokens costs O(d n) normals instead of O(d^2).  Both routes produce the same
// joint law of all quantities returned; only the Full route reproduces
// sample_head draws pathwise.
class FieldSampler {
  public:
    FieldSampler(const WeightLaw& law, Temperature beta, HeadSampling mode = HeadSampling::Auto);

    // Fixes the queries and keys (both d x .); they must outlive later draws.
    void bind(const Mat& queries, const Mat& keys);

    // Attention weights for a fresh A (n x q; column i is pi_{i -> .}).
    Mat sample_attention(Stream& rng) const;
    // Attended means m_A(q_i) for a fresh A (d x q).
    Mat sample_means(Stream& rng) const;
    // Velocities V m_A(q_i) for a fresh head (d x q).
    Mat sample_velocities(Stream& rng) const;

    // True when every query receives the same velocity (reduced route, identical means).
    [[nodiscard]] bool shared_velocity() const { return reduced_ && identical_means_; }
    // The shared velocity column; same draws as sample_velocities.
    Vec sample_shared_velocity(Stream& rng) const;

    [[nodiscard]] bool reduced() const { return reduced_; }
    [[nodiscard]] const WeightLaw& law() const { return law_; }
    [[nodiscard]] double beta() const { return beta_; }

  private:
    [[nodiscard]] bool means_are_deterministic() const;
    Mat random_attention(Stream& rng) const;
    Mat reduced_values(const Mat& means, Stream& rng) const;
    Vec shared_value(const Vec& bar, Stream& rng) const;

    const WeightLaw& law_;
    double beta_;
    HeadSampling mode_;
    bool reduced_ = false;
    const Mat* queries_ = nullptr;
    const Mat* keys_ = nullptr;
    bool self_attention_ = false;
    bool identical_means_ = false;  // every query sees the same attended mean
    Mat query_factor_;  // q x q with F F^T = Q^T Q
    Mat key_factor_;    // n x n with F F^T = K^T K
    Mat mean_logits_;   // (mean_A Q)^T K contribution, transposed to n x q
    Mat fixed_attention_;  // set when A is deterministic or beta == 0
    Mat fixed_means_;
};

// Monte-Carlo estimate of b(x) = E_theta B_theta[mu_X](x).
VectorEstimate mc_drift(const WeightLaw& law, const UnitVector& x, const TokenConfig& X, Temperature beta,
                        std::size_t samples, Stream& rng);

// Monte-Carlo estimate of E[(P_i xi(x_i)) (P_j xi(x_j))^T] for a law centered in V.
MatrixEstimate mc_kernel(const WeightLaw& law, const TokenConfig& X, Temperature beta, Index i, Index j,
                         std::size_t samples, Stream& rng);

// (1/d) P_i E_A<m_A(x_i), m_A(x_j)> P_j for the Gaussian law with sigma_V^2 = 1/d.
MatrixEstimate gaussian_kernel_closed(const WeightLaw& law, const TokenConfig& X, Temperature beta, Index i,
                                      Index j, std::size_t samples_A, Stream& rng);

// E_A <m_A(x_i), m_A(x_j)> for every pair; the diagonal holds E |m_A(x_i)|^2.
MatrixEstimate mean_overlap_kernel(const WeightLaw& law, const TokenConfig& X, Temperature beta,
                                   std::size_t samples_A, Stream& rng);

// Returns F with F F^T = G for a symmetric positive semi-definite G.
Mat psd_factor(const Mat& gram);

}  // namespace tokdyn
