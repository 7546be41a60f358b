#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace gridcurb {

/// Smooth nonlinear program
///
///   min f(x)  s.t.  h(x) = 0,  g(x) <= 0,  lower <= x <= upper.
///
/// Jacobians are dense, one row per constraint.
class NlpProblem {
public:
    virtual ~NlpProblem() = default;

    virtual Eigen::Index num_variables() const = 0;
    virtual double objective(const Eigen::VectorXd& x) const = 0;
    virtual Eigen::VectorXd objective_gradient(const Eigen::VectorXd& x) const = 0;
    virtual Eigen::VectorXd equalities(const Eigen::VectorXd& x) const = 0;
    virtual Eigen::MatrixXd equality_jacobian(const Eigen::VectorXd& x) const = 0;
    virtual Eigen::VectorXd inequalities(const Eigen::VectorXd& x) const = 0;
    virtual Eigen::MatrixXd inequality_jacobian(const Eigen::VectorXd& x) const = 0;

    /// Infinite entries mean no bound.
    virtual Eigen::VectorXd lower_bounds() const;
    virtual Eigen::VectorXd upper_bounds() const;
};

enum class HessianMethod { FiniteDifference, DampedBfgs };

struct IpmOptions {
    double feasibility_tolerance = 1e-6;
    double gradient_tolerance = 1e-6;
    double complementarity_tolerance = 1e-6;
    double cost_tolerance = 1e-6;
    int max_iterations = 150;
    double centering = 0.1;            // barrier reduction factor sigma
    double step_to_boundary = 0.99995;  // fraction-to-boundary xi
    HessianMethod hessian = HessianMethod::FiniteDifference;
    double difference_step = 1e-6;
};

enum class IpmStatus { Converged, MaxIterations, NumericalFailure };

std::string to_string(IpmStatus status);

struct IpmIteration {
    int iteration = 0;
    double objective = 0.0;
    double feasibility = 0.0;
    double gradient = 0.0;
    double complementarity = 0.0;
    double step = 0.0;
    double barrier = 0.0;
};

struct IpmResult {
    IpmStatus status = IpmStatus::MaxIterations;
    Eigen::VectorXd x;
    Eigen::VectorXd lambda;  // equality multipliers
    /// Inequality multipliers: g(x) rows, then active lower bounds, then
    /// active upper bounds, in variable order.
    Eigen::VectorXd mu;
    Eigen::VectorXd mu_lower;  // per variable, zero when unbounded
    Eigen::VectorXd mu_upper;
    double objective = 0.0;
    double feasibility = 0.0;      // max(|h|, g+) at the last iterate
    double max_violation = 0.0;    // unscaled max(|h|, g+, bound violation)
    double gradient = 0.0;
    double complementarity = 0.0;
    int iterations = 0;
    std::vector<IpmIteration> log;

    bool converged() const { return status == IpmStatus::Converged; }
};

/// Primal-dual interior-point method with slack variables for the
/// inequalities, a fraction-to-boundary rule on primal and dual steps and
/// inertia correction on the reduced KKT system.
IpmResult solve_ipm(const NlpProblem& problem, const Eigen::VectorXd& x0, const IpmOptions& options = {});

/// Gradient of the Lagrangian f + lambda'h + mu'g, bounds excluded.
Eigen::VectorXd lagrangian_gradient(const NlpProblem& problem, const Eigen::VectorXd& x,
                                    const Eigen::VectorXd& lambda, const Eigen::VectorXd& mu);

}  // namespace gridcurb
