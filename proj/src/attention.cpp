#include "tokdyn/attention.hpp"

#include "tokdyn/errors.hpp"
#include "tokdyn/stats.hpp"

#include <cmath>
#include <limits>

namespace tokdyn {

namespace {

Mat standard_normals(Index rows, Index cols, Stream& rng) {
    Mat m(rows, cols);
    rng.fill_normal(std::span<double>(m.data(), static_cast<std::size_t>(m.size())));
    return m;
}

Mat projector(const Vec& x) { return Mat::Identity(x.size(), x.size()) - x * x.transpose(); }

Mat barycenter_columns(const Mat& keys, Index q) {
    const Vec bar = keys.rowwise().mean();
    return bar.replicate(1, q);
}

}  // namespace

Temperature::Temperature(double beta) : beta_(beta) {
    require(std::isfinite(beta) && beta >= 0.0, ErrorCode::InvalidArgument, "beta must be finite and >= 0");
}

void softmax_columns(Mat& logits) {
    for (Index c = 0; c < logits.cols(); ++c) {
        auto col = logits.col(c);
        const double top = col.maxCoeff();
        col = (col.array() - top).exp();
        col = (col.array() < std::numeric_limits<double>::min()).select(0.0, col);
        col /= col.sum();
    }
}

AttentionRow attention_row(const Mat& A, const UnitVector& x, const TokenConfig& X, Temperature beta) {
    require(A.rows() == X.d() && A.cols() == X.d() && x.dim() == X.d(), ErrorCode::InvalidArgument,
            "attention_row: dimension mismatch");
    Mat logits = beta.value() * (X.matrix().transpose() * (A * x.coords()));
    softmax_columns(logits);
    return AttentionRow{logits.col(0)};
}

Vec attended_mean(const Mat& A, const UnitVector& x, const TokenConfig& X, Temperature beta) {
    return X.matrix() * attention_row(A, x, X, beta).weights;
}

Vec velocity(const HeadWeights& head, const UnitVector& x, const TokenConfig& X, Temperature beta) {
    return head.V * attended_mean(head.A, x, X, beta);
}

Mat attention_weights(const Mat& A, const Mat& queries, const Mat& keys, double beta) {
    Mat logits = beta * (keys.transpose() * (A * queries));
    softmax_columns(logits);
    return logits;
}

Mat attended_means(const Mat& A, const Mat& queries, const Mat& keys, double beta) {
    if (beta == 0.0) return barycenter_columns(keys, queries.cols());
    return keys * attention_weights(A, queries, keys, beta);
}

Mat velocities(const HeadWeights& head, const Mat& queries, const Mat& keys, double beta) {
    return head.V * attended_means(head.A, queries, keys, beta);
}

Mat psd_factor(const Mat& gram) {
    const Eigen::LDLT<Mat> ldlt(gram);
    if (ldlt.info() != Eigen::Success) {
        // Rank-deficient Grams (collapsed tokens) can stall the pivoted LDLT.
        const Eigen::SelfAdjointEigenSolver<Mat> eig(gram);
        require(eig.info() == Eigen::Success, ErrorCode::NumericalFailure, "psd_factor: eigensolver failed");
        return eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
    }
    const Vec root = ldlt.vectorD().cwiseMax(0.0).cwiseSqrt();
    const Mat lower = Mat(ldlt.matrixL()) * root.asDiagonal();
    return ldlt.transpositionsP().transpose() * lower;
}

FieldSampler::FieldSampler(const WeightLaw& law, Temperature beta, HeadSampling mode)
    : law_(law), beta_(beta.value()), mode_(mode) {
    law_.validate();
}

bool FieldSampler::means_are_deterministic() const { return beta_ == 0.0 || law_.sigma_A == 0.0; }

void FieldSampler::bind(const Mat& queries, const Mat& keys) {
    require(queries.rows() == law_.d && keys.rows() == law_.d, ErrorCode::InvalidArgument,
            "FieldSampler::bind: dimension mismatch");
    queries_ = &queries;
    keys_ = &keys;
    self_attention_ = &queries == &keys;
    const Index d = law_.d;
    reduced_ = mode_ == HeadSampling::Reduced ||
               (mode_ == HeadSampling::Auto && queries.cols() < d && keys.cols() < d);

    identical_means_ = beta_ == 0.0 || (law_.sigma_A == 0.0 && !law_.has_mean_A());
    if (means_are_deterministic()) {
        if (identical_means_) {
            fixed_attention_ = Mat::Constant(keys.cols(), queries.cols(), 1.0 / static_cast<double>(keys.cols()));
            fixed_means_ = barycenter_columns(keys, queries.cols());
        } else {
            fixed_attention_ = attention_weights(law_.mean_A, queries, keys, beta_);
            fixed_means_ = keys * fixed_attention_;
        }
    } else {
        fixed_attention_.resize(0, 0);
        fixed_means_.resize(0, 0);
    }
    if (!reduced_ || means_are_deterministic()) return;

    key_factor_ = psd_factor(keys.transpose() * keys);
    query_factor_ = self_attention_ ? key_factor_ : psd_factor(queries.transpose() * queries);
    if (law_.has_mean_A()) {
        mean_logits_ = keys.transpose() * (law_.mean_A * queries);
    } else {
        mean_logits_.resize(0, 0);
    }
}

Mat FieldSampler::random_attention(Stream& rng) const {
    const Index d = law_.d;
    Mat logits;
    if (reduced_) {
        const Mat u = law_.sigma_A * (standard_normals(d, query_factor_.cols(), rng) * query_factor_.transpose());
        const Mat y = law_.sigma_A * (standard_normals(d, key_factor_.cols(), rng) * key_factor_.transpose());
        logits = y.transpose() * u;
        if (mean_logits_.size() != 0) logits += mean_logits_;
    } else {
        const Mat w = law_.sigma_A * standard_normals(d, d, rng);
        const Mat w_prime = law_.sigma_A * standard_normals(d, d, rng);
        Mat aq = w * (w_prime.transpose() * *queries_);
        if (law_.has_mean_A()) aq += law_.mean_A * *queries_;
        logits = keys_->transpose() * aq;
    }
    logits *= beta_;
    softmax_columns(logits);
    return logits;
}

Mat FieldSampler::reduced_values(const Mat& means, Stream& rng) const {
    const Index d = law_.d;
    const Index q = means.cols();
    if (identical_means_) return shared_value(means.col(0), rng).replicate(1, q);
    Mat v = law_.has_mean_V() ? Mat(law_.mean_V * means) : Mat::Zero(d, q);
    if (law_.sigma_V > 0.0) {
        const Mat factor = psd_factor(means.transpose() * means);
        v.noalias() += law_.sigma_V * (standard_normals(d, factor.cols(), rng) * factor.transpose());
    }
    return v;
}

Vec FieldSampler::shared_value(const Vec& bar, Stream& rng) const {
    const Index d = law_.d;
    Vec v = law_.has_mean_V() ? Vec(law_.mean_V * bar) : Vec::Zero(d);
    if (law_.sigma_V > 0.0) {
        Vec z(d);
        rng.fill_normal(std::span<double>(z.data(), static_cast<std::size_t>(d)));
        v += (law_.sigma_V * bar.norm()) * z;
    }
    return v;
}

Vec FieldSampler::sample_shared_velocity(Stream& rng) const {
    require(shared_velocity(), ErrorCode::InvalidArgument, "sample_shared_velocity: velocities differ across queries");
    (void)sample_attention(rng);
    return shared_value(fixed_means_.col(0), rng);
}

Mat FieldSampler::sample_attention(Stream& rng) const {
    require(queries_ != nullptr, ErrorCode::InvalidArgument, "FieldSampler used before bind");
    if (law_.sigma_A == 0.0 || (reduced_ && beta_ == 0.0)) return fixed_attention_;
    if (beta_ == 0.0) {
        // The full route still consumes W and W' so draws stay aligned with sample_head.
        const Index d = law_.d;
        standard_normals(d, d, rng);
        standard_normals(d, d, rng);
        return fixed_attention_;
    }
    return random_attention(rng);
}

Mat FieldSampler::sample_means(Stream& rng) const {
    const Mat weights = sample_attention(rng);
    if (fixed_means_.size() != 0) return fixed_means_;
    return *keys_ * weights;
}

Mat FieldSampler::sample_velocities(Stream& rng) const {
    require(queries_ != nullptr, ErrorCode::InvalidArgument, "FieldSampler used before bind");
    if (reduced_) {
        const Mat means = sample_means(rng);
        return reduced_values(means, rng);
    }
    // Same draw order as sample_head: G, then W, then W'.
    const Index d = law_.d;
    Mat v = law_.sigma_V > 0.0 ? Mat(law_.sigma_V * standard_normals(d, d, rng)) : Mat::Zero(d, d);
    if (law_.has_mean_V()) v += law_.mean_V;
    const Mat means = sample_means(rng);
    return v * means;
}

VectorEstimate mc_drift(const WeightLaw& law, const UnitVector& x, const TokenConfig& X, Temperature beta,
                        std::size_t samples, Stream& rng) {
    require(samples >= 2, ErrorCode::InvalidArgument, "mc_drift needs samples >= 2");
    const Mat query = x.coords();
    FieldSampler sampler(law, beta);
    sampler.bind(query, X.matrix());
    MatrixStats stats(law.d, 1);
    for (std::size_t s = 0; s < samples; ++s) stats.push(sampler.sample_velocities(rng));
    return VectorEstimate{stats.mean().col(0), stats.stderr_of_mean().col(0), samples};
}

MatrixEstimate mc_kernel(const WeightLaw& law, const TokenConfig& X, Temperature beta, Index i, Index j,
                         std::size_t samples, Stream& rng) {
    require(samples >= 2, ErrorCode::InvalidArgument, "mc_kernel needs samples >= 2");
    require(law.centered_V(), ErrorCode::NonCenteredLaw, "mc_kernel requires mean_V = 0");
    require(i >= 0 && i < X.n() && j >= 0 && j < X.n(), ErrorCode::InvalidArgument, "mc_kernel: token index");
    Mat pair(X.d(), 2);
    pair.col(0) = X.token(i);
    pair.col(1) = X.token(j);
    FieldSampler sampler(law, beta);
    sampler.bind(pair, X.matrix());
    const Mat p_i = projector(pair.col(0));
    const Mat p_j = projector(pair.col(1));
    MatrixStats stats(X.d(), X.d());
    Mat outer(X.d(), X.d());
    for (std::size_t s = 0; s < samples; ++s) {
        const Mat xi = sampler.sample_velocities(rng);
        const Vec g_i = p_i * xi.col(0);
        const Vec g_j = p_j * xi.col(1);
        outer.noalias() = g_i * g_j.transpose();
        stats.push(outer);
    }
    return MatrixEstimate{stats.mean(), stats.stderr_of_mean(), samples};
}

MatrixEstimate gaussian_kernel_closed(const WeightLaw& law, const TokenConfig& X, Temperature beta, Index i,
                                      Index j, std::size_t samples_A, Stream& rng) {
    require(law.centered_V(), ErrorCode::NonCenteredLaw, "gaussian_kernel_closed requires mean_V = 0");
    const double d = static_cast<double>(law.d);
    require(std::abs(law.sigma_V * law.sigma_V * d - 1.0) <= 1e-9, ErrorCode::WrongScaling,
            "gaussian_kernel_closed requires sigma_V^2 = 1/d");
    require(i >= 0 && i < X.n() && j >= 0 && j < X.n(), ErrorCode::InvalidArgument,
            "gaussian_kernel_closed: token index");
    Mat pair(X.d(), 2);
    pair.col(0) = X.token(i);
    pair.col(1) = X.token(j);
    FieldSampler sampler(law, beta);
    sampler.bind(pair, X.matrix());

    RunningStats overlap;
    std::size_t used = 0;
    if (beta.value() == 0.0 || law.sigma_A == 0.0) {
        const Mat m = sampler.sample_means(rng);
        overlap.push(m.col(0).dot(m.col(1)));
    } else {
        require(samples_A >= 2, ErrorCode::InvalidArgument, "gaussian_kernel_closed needs samples_A >= 2");
        for (std::size_t s = 0; s < samples_A; ++s) {
            const Mat m = sampler.sample_means(rng);
            overlap.push(m.col(0).dot(m.col(1)));
        }
        used = samples_A;
    }
    const Mat base = projector(pair.col(0)) * projector(pair.col(1)) / d;
    return MatrixEstimate{overlap.mean() * base, overlap.stderr_of_mean() * base.cwiseAbs(), used};
}

MatrixEstimate mean_overlap_kernel(const WeightLaw& law, const TokenConfig& X, Temperature beta,
                                   std::size_t samples_A, Stream& rng) {
    FieldSampler sampler(law, beta);
    sampler.bind(X.matrix(), X.matrix());
    if (beta.value() == 0.0 || law.sigma_A == 0.0) {
        const Mat m = sampler.sample_means(rng);
        return MatrixEstimate{m.transpose() * m, Mat::Zero(X.n(), X.n()), 0};
    }
    require(samples_A >= 2, ErrorCode::InvalidArgument, "mean_overlap_kernel needs samples_A >= 2");
    MatrixStats stats(X.n(), X.n());
    for (std::size_t s = 0; s < samples_A; ++s) {
        const Mat m = sampler.sample_means(rng);
        stats.push(m.transpose() * m);
    }
    return MatrixEstimate{stats.mean(), stats.stderr_of_mean(), samples_A};
}

}  // namespace tokdyn
