#pragma once

#include "ensembleguard/common.hpp"

namespace ensembleguard {

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

inline void validate(const AdamConfig& a) {
    if (!(a.beta1 >= 0.0 && a.beta1 < 1.0)) throw ConfigError("adam beta1 must be in [0, 1)");
    if (!(a.beta2 >= 0.0 && a.beta2 < 1.0)) throw ConfigError("adam beta2 must be in [0, 1)");
    if (!(a.epsilon > 0.0)) throw ConfigError("adam epsilon must be positive");
}

/// Bias-corrected Adam over one flat parameter vector.
class Adam {
public:
    Adam(Eigen::Index size, double learning_rate, AdamConfig cfg = {})
        : lr_(learning_rate), cfg_(cfg), m_(Vector::Zero(size)), v_(Vector::Zero(size)) {}

    void step(Vector& params, const Vector& grad) {
        ++t_;
        m_ = cfg_.beta1 * m_ + (1.0 - cfg_.beta1) * grad;
        v_ = cfg_.beta2 * v_ + (1.0 - cfg_.beta2) * grad.cwiseProduct(grad);
        const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
        params.array() -= lr_ * (m_.array() / c1) / ((v_.array() / c2).sqrt() + cfg_.epsilon);
    }

    long steps() const { return t_; }

private:
    double lr_;
    AdamConfig cfg_;
    Vector m_;
    Vector v_;
    long t_ = 0;
};

}  // namespace ensembleguard
