#include "tokdyn/weights.hpp"

#include "tokdyn/errors.hpp"

#include <cmath>

namespace tokdyn {

namespace {

Mat gaussian_matrix(Index rows, Index cols, double scale, Stream& rng) {
    Mat m(rows, cols);
    rng.fill_normal(std::span<double>(m.data(), static_cast<std::size_t>(m.size())));
    if (scale != 1.0) m *= scale;
    return m;
}

}  // namespace

void WeightLaw::validate() const {
    require(d >= 2, ErrorCode::DimensionTooSmall, "weight law needs d >= 2");
    require(sigma_V >= 0.0 && std::isfinite(sigma_V), ErrorCode::InvalidArgument, "sigma_V must be finite and >= 0");
    require(sigma_A >= 0.0 && std::isfinite(sigma_A), ErrorCode::InvalidArgument, "sigma_A must be finite and >= 0");
    require(mean_V.size() == 0 || (mean_V.rows() == d && mean_V.cols() == d), ErrorCode::InvalidArgument,
            "mean_V must be d x d");
    require(mean_A.size() == 0 || (mean_A.rows() == d && mean_A.cols() == d), ErrorCode::InvalidArgument,
            "mean_A must be d x d");
}

WeightLaw gaussian_default(Index d) {
    require(d >= 2, ErrorCode::DimensionTooSmall, "gaussian_default needs d >= 2");
    const double scale = 1.0 / std::sqrt(static_cast<double>(d));
    return WeightLaw{.d = d, .sigma_V = scale, .sigma_A = scale, .mean_V = {}, .mean_A = {}};
}

HeadWeights sample_head(const WeightLaw& law, Stream& rng, SampleOptions options) {
    const Index d = law.d;
    HeadWeights head;
    head.V = law.sigma_V > 0.0 ? gaussian_matrix(d, d, law.sigma_V, rng) : Mat::Zero(d, d);
    if (law.mean_V.size() != 0) head.V += law.mean_V;

    if (law.sigma_A > 0.0) {
        Mat w = gaussian_matrix(d, d, law.sigma_A, rng);
        Mat w_prime = gaussian_matrix(d, d, law.sigma_A, rng);
        head.A.noalias() = w * w_prime.transpose();
        if (options.keep_factors) {
            head.W = std::move(w);
            head.W_prime = std::move(w_prime);
        }
    } else {
        head.A = Mat::Zero(d, d);
        if (options.keep_factors) {
            head.W = Mat::Zero(d, d);
            head.W_prime = Mat::Zero(d, d);
        }
    }
    if (law.mean_A.size() != 0) head.A += law.mean_A;
    return head;
}

std::vector<HeadWeights> sample_layer(const WeightLaw& law, int heads, Stream& rng, SampleOptions options) {
    require(heads >= 1, ErrorCode::InvalidArgument, "a layer needs at least one head");
    std::vector<HeadWeights> layer;
    layer.reserve(static_cast<std::size_t>(heads));
    for (int h = 0; h < heads; ++h) layer.push_back(sample_head(law, rng, options));
    return layer;
}

}  // namespace tokdyn
