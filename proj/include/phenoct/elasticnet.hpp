#pragma once

#include <vector>

#include <Eigen/Dense>

namespace phenoct {

// J(w, b) = alpha*||w||_1 + ((1-alpha)/2)*||w||_2^2
//           + C * sum_i s_i * logloss_i(sigmoid(x_i.w + b))
// Smaller C means stronger regularization. The intercept is unpenalized.
struct ElasticNetConfig {
    double C = 0.1;
    double l1_ratio = 0.5;
    std::size_t max_iterations = 10000;
    double tolerance = 1e-7;  // relative objective change
};

struct FitResult {
    Eigen::VectorXd weights;
    double intercept = 0.0;
    double objective = 0.0;
    std::size_t iterations = 0;
    bool converged = false;
    double kkt_residual = 0.0;
};

// Balanced class weights: n_total / (2 * n_class). Throws on a
// single-class label vector.
Eigen::VectorXd class_weights(const Eigen::VectorXd& labels);

double objective(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                 const Eigen::VectorXd& sample_weights, const Eigen::VectorXd& w, double b,
                 const ElasticNetConfig& config);

// Monotone accelerated proximal gradient with backtracking line search.
// Zero initialization, no randomness; identical inputs give identical
// results.
FitResult fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
              const Eigen::VectorXd& sample_weights, const ElasticNetConfig& config);

Eigen::VectorXd predict_proba(const Eigen::MatrixXd& X, const Eigen::VectorXd& weights,
                              double intercept);

struct KktReport {
    bool pass;
    double residual;
};

KktReport kkt_check(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                    const Eigen::VectorXd& sample_weights, const FitResult& fit,
                    const ElasticNetConfig& config, double tol = 1e-4);

inline double soft_threshold(double v, double t) {
    if (v > t) return v - t;
    if (v < -t) return v + t;
    return 0.0;
}

}  // namespace phenoct
