#pragma once

// The weight law rho_* and head sampling.
//
// V = mean_V + sigma_V * G and A = mean_A + W W'^T, with G, W, W' carrying
// independent standard / N(0, sigma_A^2) entries.  Means are optional: an
// empty matrix stands for zero.

#include "tokdyn/rng.hpp"
#include "tokdyn/sphere.hpp"

#include <optional>
#include <vector>

namespace tokdyn {

struct WeightLaw {
    Index d = 0;
    double sigma_V = 0.0;
    double sigma_A = 0.0;
    Mat mean_V;  // empty or d x d
    Mat mean_A;  // empty or d x d

    [[nodiscard]] bool has_mean_V() const { return mean_V.size() != 0 && !mean_V.isZero(0.0); }
    [[nodiscard]] bool has_mean_A() const { return mean_A.size() != 0 && !mean_A.isZero(0.0); }
    [[nodiscard]] bool centered_V() const { return !has_mean_V(); }

    // Throws InvalidArgument on negative scales or mis-shaped means.
    void validate() const;
};

// sigma_V = sigma_A = 1/sqrt(d), zero means.
WeightLaw gaussian_default(Index d);

struct HeadWeights {
    Mat V;
    Mat A;
    // Present only when sampled with keep_factors (A - mean_A == W * W'^T).
    std::optional<Mat> W;
    std::optional<Mat> W_prime;
};

struct SampleOptions {
    bool keep_factors = false;
};

// Consumes the stream in the fixed order G, W, W'.
HeadWeights sample_head(const WeightLaw& law, Stream& rng, SampleOptions options = {});

// H sequential sample_head draws from the same stream.
std::vector<HeadWeights> sample_layer(const WeightLaw& law, int heads, Stream& rng, SampleOptions options = {});

}  // namespace tokdyn
