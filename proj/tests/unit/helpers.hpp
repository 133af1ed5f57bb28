#pragma once

#include "tokdyn/errors.hpp"
#include "tokdyn/sphere.hpp"

#include <doctest.h>

#include <cmath>

namespace tokdyn::testing {

template <typename F>
ErrorCode error_code_of(F&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected a tokdyn::Error");
    return ErrorCode::InvalidArgument;
}

inline double max_norm_deviation(const Mat& tokens) {
    return (tokens.colwise().norm().array() - 1.0).abs().maxCoeff();
}

inline TokenConfig random_config(Index n, Index d, std::uint64_t seed) {
    Stream rng = RngKey(seed).stream();
    return uniform_config(n, d, rng);
}

inline Mat random_orthogonal(Index d, std::uint64_t seed) {
    Stream rng = RngKey(seed).derive(7).stream();
    return random_orthonormal_frame(d, d, rng);
}

}  // namespace tokdyn::testing
