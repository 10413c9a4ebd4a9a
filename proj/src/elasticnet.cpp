#include "phenoct/elasticnet.hpp"

#include <cmath>
#include <stdexcept>

#include "phenoct/common.hpp"

namespace phenoct {

namespace {

// log(1 + exp(z)) - y*z, numerically stable.
double logloss_term(double z, double y) {
    const double soft = z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
    return soft - y * z;
}

double smooth_part(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                   const Eigen::VectorXd& s, const Eigen::VectorXd& w, double b,
                   const ElasticNetConfig& cfg) {
    const Eigen::VectorXd z = X * w + Eigen::VectorXd::Constant(X.rows(), b);
    double loss = 0.0;
    for (Eigen::Index i = 0; i < z.size(); ++i) loss += s[i] * logloss_term(z[i], y[i]);
    return cfg.C * loss + 0.5 * (1.0 - cfg.l1_ratio) * w.squaredNorm();
}

// Gradient of the smooth part with respect to (w, b).
void smooth_grad(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::VectorXd& s,
                 const Eigen::VectorXd& w, double b, const ElasticNetConfig& cfg,
                 Eigen::VectorXd& gw, double& gb) {
    const Eigen::VectorXd z = X * w + Eigen::VectorXd::Constant(X.rows(), b);
    Eigen::VectorXd r(z.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) r[i] = s[i] * (sigmoid(z[i]) - y[i]);
    gw = cfg.C * (X.transpose() * r) + (1.0 - cfg.l1_ratio) * w;
    gb = cfg.C * r.sum();
}

}  // namespace

Eigen::VectorXd class_weights(const Eigen::VectorXd& labels) {
    const auto n = labels.size();
    double n_pos = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) n_pos += labels[i];
    const double n_neg = static_cast<double>(n) - n_pos;
    if (n_pos == 0.0 || n_neg == 0.0)
        throw DataError("degenerate label vector: single class");
    const double w_pos = static_cast<double>(n) / (2.0 * n_pos);
    const double w_neg = static_cast<double>(n) / (2.0 * n_neg);
    Eigen::VectorXd w(n);
    for (Eigen::Index i = 0; i < n; ++i) w[i] = labels[i] > 0.5 ? w_pos : w_neg;
    return w;
}

double objective(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::VectorXd& s,
                 const Eigen::VectorXd& w, double b, const ElasticNetConfig& cfg) {
    if (X.rows() != y.size() || X.rows() != s.size() || X.cols() != w.size())
        throw DataError("objective: shape mismatch");
    return cfg.l1_ratio * w.lpNorm<1>() + smooth_part(X, y, s, w, b, cfg);
}

FitResult fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::VectorXd& s,
              const ElasticNetConfig& cfg) {
    const auto p = X.cols();
    Eigen::VectorXd w = Eigen::VectorXd::Zero(p);
    double b = 0.0;
    Eigen::VectorXd w_prev = w;
    double b_prev = b;
    Eigen::VectorXd v = w;  // extrapolation point
    double bv = b;
    double t_momentum = 1.0;
    double step = 1.0;

    double J = objective(X, y, s, w, b, cfg);
    FitResult result;

    Eigen::VectorXd gw(p);
    double gb = 0.0;
    std::size_t iter = 0;
    for (; iter < cfg.max_iterations; ++iter) {
        const double g_v = smooth_part(X, y, s, v, bv, cfg);
        smooth_grad(X, y, s, v, bv, cfg, gw, gb);

        // Backtracking: halve the step until the quadratic upper bound holds.
        Eigen::VectorXd w_new(p);
        double b_new = 0.0;
        for (;;) {
            for (Eigen::Index j = 0; j < p; ++j)
                w_new[j] = soft_threshold(v[j] - step * gw[j], step * cfg.l1_ratio);
            b_new = bv - step * gb;
            const Eigen::VectorXd dw = w_new - v;
            const double db = b_new - bv;
            const double quad = g_v + gw.dot(dw) + gb * db +
                                (dw.squaredNorm() + db * db) / (2.0 * step);
            if (smooth_part(X, y, s, w_new, b_new, cfg) <= quad + 1e-12) break;
            step *= 0.5;
            if (step < 1e-18) break;
        }

        double J_new = objective(X, y, s, w_new, b_new, cfg);
        if (J_new > J) {
            // Monotone safeguard: plain proximal step from the current
            // iterate, momentum restarted.
            smooth_grad(X, y, s, w, b, cfg, gw, gb);
            const double g_x = smooth_part(X, y, s, w, b, cfg);
            for (;;) {
                for (Eigen::Index j = 0; j < p; ++j)
                    w_new[j] = soft_threshold(w[j] - step * gw[j], step * cfg.l1_ratio);
                b_new = b - step * gb;
                const Eigen::VectorXd dw = w_new - w;
                const double db = b_new - b;
                const double quad = g_x + gw.dot(dw) + gb * db +
                                    (dw.squaredNorm() + db * db) / (2.0 * step);
                if (smooth_part(X, y, s, w_new, b_new, cfg) <= quad + 1e-12) break;
                step *= 0.5;
                if (step < 1e-18) break;
            }
            J_new = objective(X, y, s, w_new, b_new, cfg);
            t_momentum = 1.0;
            if (J_new > J) {
                // No descent direction at machine precision; stop.
                result.converged = true;
                break;
            }
        }

        const double t_next = (1.0 + std::sqrt(1.0 + 4.0 * t_momentum * t_momentum)) / 2.0;
        v = w_new + ((t_momentum - 1.0) / t_next) * (w_new - w);
        bv = b_new + ((t_momentum - 1.0) / t_next) * (b_new - b);
        t_momentum = t_next;

        w_prev = w;
        b_prev = b;
        w = w_new;
        b = b_new;

        const double rel = std::abs(J - J_new) / std::max(1.0, std::abs(J));
        J = J_new;
        if (rel < cfg.tolerance) {
            // Objective has plateaued; accept only if stationarity holds,
            // otherwise keep iterating (converged implies KKT residual
            // within tolerance).
            FitResult probe;
            probe.weights = w;
            probe.intercept = b;
            if (kkt_check(X, y, s, probe, cfg).pass) {
                result.converged = true;
                ++iter;
                break;
            }
        }
    }

    result.weights = w;
    result.intercept = b;
    result.objective = J;
    result.iterations = iter;
    const auto kkt = kkt_check(X, y, s, result, cfg);
    result.kkt_residual = kkt.residual;
    if (!kkt.pass) result.converged = false;
    return result;
}

Eigen::VectorXd predict_proba(const Eigen::MatrixXd& X, const Eigen::VectorXd& weights,
                              double intercept) {
    const Eigen::VectorXd z = X * weights + Eigen::VectorXd::Constant(X.rows(), intercept);
    Eigen::VectorXd p(z.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) p[i] = sigmoid(z[i]);
    return p;
}

KktReport kkt_check(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                    const Eigen::VectorXd& s, const FitResult& fit,
                    const ElasticNetConfig& cfg, double tol) {
    Eigen::VectorXd gw(X.cols());
    double gb = 0.0;
    smooth_grad(X, y, s, fit.weights, fit.intercept, cfg, gw, gb);
    double residual = std::abs(gb);
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
        double violation;
        if (fit.weights[j] != 0.0) {
            violation = std::abs(gw[j] + cfg.l1_ratio * (fit.weights[j] > 0.0 ? 1.0 : -1.0));
        } else {
            violation = std::max(0.0, std::abs(gw[j]) - cfg.l1_ratio);
        }
        residual = std::max(residual, violation);
    }
    return KktReport{residual <= tol, residual};
}

}  // namespace phenoct
