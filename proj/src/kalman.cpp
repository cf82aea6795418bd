#include "netsample/kalman.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "netsample/errors.hpp"

namespace netsample {

KalmanState KalmanState::from_model(const FlowModel& model) {
    model.validate();
    return KalmanState{model.init_mean - model.mean, model.init_var.asDiagonal()};
}

Prediction predict(const KalmanState& state, const FlowModel& model) {
    const auto n = model.rho.size();
    if (state.mean.size() != n || state.cov.rows() != n || state.cov.cols() != n) {
        throw UsageError("predict: state and model dimensions disagree");
    }
    const auto transition = model.rho.asDiagonal();
    Prediction pred;
    pred.mean = transition * state.mean;
    pred.cov = transition * state.cov * transition;
    pred.cov.diagonal() += model.noise_var;
    return pred;
}

MeasurementNoise measurement_noise(const Prediction& pred, const SamplingPlan& plan, const FlowModel& model,
                                   const RoutingMatrix& routing, const NoiseOptions& options) {
    const auto n = static_cast<Eigen::Index>(routing.n_flows());
    if (pred.mean.size() != n || model.mean.size() != n || plan.n_flows() != routing.n_flows()) {
        throw UsageError("measurement_noise: dimensions disagree");
    }
    MeasurementNoise noise{Eigen::VectorXd(n)};
    for (Eigen::Index j = 0; j < n; ++j) {
        const double coeff = combined_variance_coeff(plan.path_rates(routing, static_cast<std::size_t>(j)));
        if (std::isinf(coeff)) {
            noise.variances(j) = std::numeric_limits<double>::infinity();
            continue;
        }
        const double volume = std::max(options.volume_floor, pred.mean(j) + model.mean(j));
        noise.variances(j) = std::max(options.variance_floor, volume * coeff);
    }
    return noise;
}

KalmanState update(const Prediction& pred, const Observations& z, const MeasurementNoise& noise,
                   std::size_t time_index) {
    const auto n = pred.mean.size();
    if (static_cast<Eigen::Index>(z.size()) != n || noise.variances.size() != n || pred.cov.rows() != n) {
        throw UsageError("update: dimensions disagree");
    }
    std::vector<Eigen::Index> observed;
    for (Eigen::Index j = 0; j < n; ++j) {
        const double v = noise.variances(j);
        const bool missing = !z[static_cast<std::size_t>(j)].has_value();
        if (missing != std::isinf(v)) {
            throw UsageError("update: flow " + std::to_string(j) + " missing-observation and +inf noise disagree");
        }
        if (!missing && !(v > 0.0)) throw UsageError("update: measurement variance must be positive");
        if (!missing) observed.push_back(j);
    }

    KalmanState next{pred.mean, pred.cov};
    if (observed.empty()) return next;

    const auto m = static_cast<Eigen::Index>(observed.size());
    Eigen::MatrixXd innovation_cov(m, m);
    Eigen::MatrixXd cross(n, m);  // P H^T
    Eigen::VectorXd residual(m);
    for (Eigen::Index a = 0; a < m; ++a) {
        const auto ja = observed[static_cast<std::size_t>(a)];
        cross.col(a) = pred.cov.col(ja);
        residual(a) = *z[static_cast<std::size_t>(ja)] - pred.mean(ja);
        for (Eigen::Index b = 0; b < m; ++b) innovation_cov(a, b) = pred.cov(ja, observed[static_cast<std::size_t>(b)]);
        innovation_cov(a, a) += noise.variances(ja);
    }

    const Eigen::LLT<Eigen::MatrixXd> chol(innovation_cov);
    if (chol.info() != Eigen::Success) {
        throw NumericalError("innovation covariance is not positive definite", time_index);
    }
    // K = P H^T S^-1, so K^T = S^-1 H P.
    const Eigen::MatrixXd gain = chol.solve(cross.transpose()).transpose();
    next.mean += gain * residual;
    next.cov -= gain * cross.transpose();
    next.cov = 0.5 * (next.cov + next.cov.transpose());
    if (!next.mean.allFinite() || !next.cov.allFinite()) {
        throw NumericalError("filter state became non-finite", time_index);
    }
    return next;
}

FilterStep filter_step(const KalmanState& state, const FlowModel& model, const SamplingPlan& plan,
                       const std::vector<std::optional<double>>& z_uncentered, const RoutingMatrix& routing,
                       std::size_t time_index, const NoiseOptions& options) {
    const auto pred = predict(state, model);
    const auto noise = measurement_noise(pred, plan, model, routing, options);
    if (z_uncentered.size() != routing.n_flows()) throw UsageError("filter_step: observation count mismatch");
    Observations centered(z_uncentered.size());
    for (std::size_t j = 0; j < centered.size(); ++j) {
        if (z_uncentered[j]) centered[j] = *z_uncentered[j] - model.mean(static_cast<Eigen::Index>(j));
    }
    FilterStep out{update(pred, centered, noise, time_index), {}};
    out.estimates = (out.state.mean + model.mean).cwiseMax(0.0);
    return out;
}

double asymmetry(const Eigen::MatrixXd& cov) { return (cov - cov.transpose()).cwiseAbs().maxCoeff(); }

}  // namespace netsample
