#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>

namespace tokdyn {

// Welford accumulator with Chan's merge, so sharded estimates combine
// independently of shard order.
class RunningStats {
  public:
    void push(double x) {
        ++count_;
        const double delta = x - mean_;
        mean_ += delta / static_cast<double>(count_);
        m2_ += delta * (x - mean_);
    }

    void merge(const RunningStats& other) {
        if (other.count_ == 0) return;
        if (count_ == 0) {
            *this = other;
            return;
        }
        const double n_a = static_cast<double>(count_);
        const double n_b = static_cast<double>(other.count_);
        const double delta = other.mean_ - mean_;
        const double total = n_a + n_b;
        mean_ += delta * n_b / total;
        m2_ += other.m2_ + delta * delta * n_a * n_b / total;
        count_ += other.count_;
    }

    [[nodiscard]] std::size_t count() const { return count_; }
    [[nodiscard]] double mean() const { return mean_; }
    [[nodiscard]] double variance() const { return count_ > 1 ? m2_ / static_cast<double>(count_ - 1) : 0.0; }
    [[nodiscard]] double stddev() const { return std::sqrt(variance()); }
    [[nodiscard]] double stderr_of_mean() const {
        return count_ > 1 ? std::sqrt(variance() / static_cast<double>(count_)) : 0.0;
    }

  private:
    std::size_t count_ = 0;
    double mean_ = 0.0;
    double m2_ = 0.0;
};

// Entrywise Welford over fixed-shape matrices (vectors are n x 1).
class MatrixStats {
  public:
    MatrixStats(Eigen::Index rows, Eigen::Index cols)
        : mean_(Eigen::MatrixXd::Zero(rows, cols)), m2_(Eigen::MatrixXd::Zero(rows, cols)) {}

    void push(const Eigen::MatrixXd& x) {
        ++count_;
        const Eigen::MatrixXd delta = x - mean_;
        mean_ += delta / static_cast<double>(count_);
        m2_.array() += delta.array() * (x - mean_).array();
    }

    void merge(const MatrixStats& other) {
        if (other.count_ == 0) return;
        if (count_ == 0) {
            *this = other;
            return;
        }
        const double n_a = static_cast<double>(count_);
        const double n_b = static_cast<double>(other.count_);
        const double total = n_a + n_b;
        const Eigen::MatrixXd delta = other.mean_ - mean_;
        mean_ += delta * (n_b / total);
        m2_ += other.m2_ + delta.cwiseProduct(delta) * (n_a * n_b / total);
        count_ += other.count_;
    }

    [[nodiscard]] std::size_t count() const { return count_; }
    [[nodiscard]] const Eigen::MatrixXd& mean() const { return mean_; }
    [[nodiscard]] Eigen::MatrixXd stderr_of_mean() const {
        if (count_ < 2) return Eigen::MatrixXd::Zero(mean_.rows(), mean_.cols());
        const double n = static_cast<double>(count_);
        return (m2_ / ((n - 1.0) * n)).cwiseSqrt();
    }

  private:
    std::size_t count_ = 0;
    Eigen::MatrixXd mean_;
    Eigen::MatrixXd m2_;
};

}  // namespace tokdyn
