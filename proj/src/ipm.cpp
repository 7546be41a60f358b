#include "gridcurb/ipm.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>

namespace gridcurb {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double inf_norm(const Eigen::VectorXd& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }
double max_or(const Eigen::VectorXd& v, double fallback) { return v.size() == 0 ? fallback : v.maxCoeff(); }

/// Variable bounds folded into linear inequality rows. A variable whose
/// bounds coincide becomes an equality row instead, since the interior of
/// its box is empty.
struct BoundRows {
    std::vector<Eigen::Index> lower_idx, upper_idx, fixed_idx;
    Eigen::VectorXd lower, upper;

    explicit BoundRows(const NlpProblem& p) : lower(p.lower_bounds()), upper(p.upper_bounds()) {
        for (Eigen::Index i = 0; i < lower.size(); ++i) {
            if (lower[i] == upper[i]) {
                fixed_idx.push_back(i);
                continue;
            }
            if (std::isfinite(lower[i])) lower_idx.push_back(i);
            if (std::isfinite(upper[i])) upper_idx.push_back(i);
        }
    }
    Eigen::Index count() const { return static_cast<Eigen::Index>(lower_idx.size() + upper_idx.size()); }
};

struct Evaluation {
    double f = 0.0;
    Eigen::VectorXd df, h, g;  // g includes bound rows
    Eigen::MatrixXd jh, jg;
    Eigen::Index n_nonlinear_g = 0;
};

Evaluation evaluate(const NlpProblem& p, const BoundRows& b, const Eigen::VectorXd& x) {
    Evaluation e;
    e.f = p.objective(x);
    e.df = p.objective_gradient(x);
    const Eigen::VectorXd hn = p.equalities(x);
    const Eigen::MatrixXd jhn = p.equality_jacobian(x);
    const auto nfix = static_cast<Eigen::Index>(b.fixed_idx.size());
    e.h.resize(hn.size() + nfix);
    e.jh = Eigen::MatrixXd::Zero(hn.size() + nfix, x.size());
    e.h.head(hn.size()) = hn;
    if (hn.size() > 0) e.jh.topRows(hn.size()) = jhn;
    for (Eigen::Index k = 0; k < nfix; ++k) {
        const Eigen::Index i = b.fixed_idx[static_cast<std::size_t>(k)];
        e.h[hn.size() + k] = x[i] - b.lower[i];
        e.jh(hn.size() + k, i) = 1.0;
    }
    const Eigen::VectorXd gn = p.inequalities(x);
    const Eigen::MatrixXd jgn = p.inequality_jacobian(x);
    e.n_nonlinear_g = gn.size();
    const Eigen::Index n = x.size();
    const Eigen::Index rows = gn.size() + b.count();
    e.g.resize(rows);
    e.jg = Eigen::MatrixXd::Zero(rows, n);
    e.g.head(gn.size()) = gn;
    if (gn.size() > 0) e.jg.topRows(gn.size()) = jgn;
    Eigen::Index r = gn.size();
    for (auto i : b.lower_idx) {
        e.g[r] = b.lower[i] - x[i];
        e.jg(r++, i) = -1.0;
    }
    for (auto i : b.upper_idx) {
        e.g[r] = x[i] - b.upper[i];
        e.jg(r++, i) = 1.0;
    }
    return e;
}

bool all_finite(const Evaluation& e) {
    return std::isfinite(e.f) && e.df.allFinite() && e.h.allFinite() && e.g.allFinite() &&
           e.jh.allFinite() && e.jg.allFinite();
}

Eigen::MatrixXd fd_hessian(const NlpProblem& p, const Eigen::VectorXd& x, const Eigen::VectorXd& lambda,
                           const Eigen::VectorXd& mu_nonlinear, double step) {
    const Eigen::Index n = x.size();
    Eigen::MatrixXd h(n, n);
    Eigen::VectorXd xp = x;
    for (Eigen::Index j = 0; j < n; ++j) {
        const double dj = step * std::max(1.0, std::abs(x[j]));
        xp[j] = x[j] + dj;
        const Eigen::VectorXd gp = lagrangian_gradient(p, xp, lambda, mu_nonlinear);
        xp[j] = x[j] - dj;
        const Eigen::VectorXd gm = lagrangian_gradient(p, xp, lambda, mu_nonlinear);
        xp[j] = x[j];
        h.col(j) = (gp - gm) / (2.0 * dj);
    }
    return 0.5 * (h + h.transpose());
}

void bfgs_update(Eigen::MatrixXd& b, const Eigen::VectorXd& s, const Eigen::VectorXd& y) {
    const Eigen::VectorXd bs = b * s;
    const double sbs = s.dot(bs);
    if (sbs <= 1e-16) return;
    const double sy = s.dot(y);
    const double theta = sy >= 0.2 * sbs ? 1.0 : 0.8 * sbs / (sbs - sy);
    const Eigen::VectorXd r = theta * y + (1.0 - theta) * bs;
    const double sr = s.dot(r);
    if (sr <= 1e-16) return;
    b += r * r.transpose() / sr - bs * bs.transpose() / sbs;
}

struct KktSolver {
    double last_delta = 0.0;

    /// Solves [M J'; J 0] [dx; dl] = rhs after shifting M (and, for a rank
    /// deficient J, the lower block) until the matrix has n positive and m
    /// negative eigenvalues. The lower shift shrinks with the barrier
    /// parameter so that it does not bias the converged point.
    bool solve(const Eigen::MatrixXd& m, const Eigen::MatrixXd& j, const Eigen::VectorXd& rhs, double barrier,
               Eigen::VectorXd& out) {
        const Eigen::Index n = m.rows();
        const Eigen::Index k = j.rows();
        Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(n + k, n + k);
        kkt.topLeftCorner(n, n) = m;
        kkt.topRightCorner(n, k) = j.transpose();
        kkt.bottomLeftCorner(k, n) = j;

        double delta = 0.0;
        double delta_c = 0.0;
        for (int attempt = 0; attempt < 40; ++attempt) {
            Eigen::MatrixXd shifted = kkt;
            shifted.topLeftCorner(n, n).diagonal().array() += delta;
            shifted.bottomRightCorner(k, k).diagonal().array() -= delta_c;
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(shifted);
            if (es.info() != Eigen::Success) return false;
            const Eigen::VectorXd& ev = es.eigenvalues();
            const double scale = std::max(1.0, ev.cwiseAbs().maxCoeff());
            const double zero_tol = 1e-13 * scale;
            Eigen::Index pos = 0, neg = 0, zero = 0;
            for (Eigen::Index i = 0; i < ev.size(); ++i) {
                if (ev[i] > zero_tol) ++pos;
                else if (ev[i] < -zero_tol) ++neg;
                else ++zero;
            }
            if (pos == n && neg == k) {
                out = es.eigenvectors() * ((es.eigenvectors().transpose() * rhs).array() / ev.array()).matrix();
                last_delta = delta;
                return out.allFinite();
            }
            if (zero > 0 && delta_c == 0.0) delta_c = 1e-8 * scale * std::pow(std::min(1.0, std::max(barrier, 1e-20)), 0.25);
            if (delta == 0.0)
                delta = last_delta == 0.0 ? 1e-4 : std::max(1e-20, last_delta / 3.0);
            else
                delta *= last_delta == 0.0 ? 100.0 : 8.0;
        }
        return false;
    }
};

}  // namespace

Eigen::VectorXd NlpProblem::lower_bounds() const {
    return Eigen::VectorXd::Constant(num_variables(), -kInf);
}

Eigen::VectorXd NlpProblem::upper_bounds() const { return Eigen::VectorXd::Constant(num_variables(), kInf); }

std::string to_string(IpmStatus status) {
    switch (status) {
    case IpmStatus::Converged: return "converged";
    case IpmStatus::MaxIterations: return "max iterations";
    case IpmStatus::NumericalFailure: return "numerical failure";
    }
    return "unknown";
}

Eigen::VectorXd lagrangian_gradient(const NlpProblem& problem, const Eigen::VectorXd& x,
                                    const Eigen::VectorXd& lambda, const Eigen::VectorXd& mu) {
    Eigen::VectorXd g = problem.objective_gradient(x);
    if (lambda.size() > 0) g += problem.equality_jacobian(x).transpose() * lambda;
    if (mu.size() > 0) g += problem.inequality_jacobian(x).transpose() * mu;
    return g;
}

IpmResult solve_ipm(const NlpProblem& problem, const Eigen::VectorXd& x0, const IpmOptions& options) {
    const BoundRows bounds(problem);
    Eigen::VectorXd x = x0;
    for (auto i : bounds.lower_idx) x[i] = std::max(x[i], bounds.lower[i]);
    for (auto i : bounds.upper_idx) x[i] = std::min(x[i], bounds.upper[i]);
    for (auto i : bounds.fixed_idx) x[i] = bounds.lower[i];

    IpmResult res;
    Evaluation ev = evaluate(problem, bounds, x);
    const Eigen::Index n = x.size();
    const Eigen::Index neq = ev.h.size();
    const Eigen::Index nh = neq - static_cast<Eigen::Index>(bounds.fixed_idx.size());
    const Eigen::Index niq = ev.g.size();
    const Eigen::Index ng = ev.n_nonlinear_g;

    double gamma = 1.0;
    Eigen::VectorXd z = Eigen::VectorXd::Ones(niq);
    Eigen::VectorXd mu = z;
    for (Eigen::Index i = 0; i < niq; ++i) {
        if (ev.g[i] < -1.0) z[i] = -ev.g[i];
        mu[i] = std::min(1.0, gamma / z[i]);
    }
    Eigen::VectorXd lambda = Eigen::VectorXd::Zero(neq);

    auto lagr_grad = [&](const Evaluation& e) {
        Eigen::VectorXd lx = e.df;
        if (neq > 0) lx += e.jh.transpose() * lambda;
        if (niq > 0) lx += e.jg.transpose() * mu;
        return lx;
    };

    Eigen::MatrixXd bfgs = Eigen::MatrixXd::Identity(n, n);
    KktSolver kkt;
    double f_prev = ev.f;

    auto conditions = [&](const Evaluation& e, double f_old, IpmIteration& it) {
        const double xn = inf_norm(x);
        it.objective = e.f;
        it.feasibility = std::max(inf_norm(e.h), max_or(e.g, 0.0));
        it.gradient = inf_norm(lagr_grad(e)) / (1.0 + std::max(inf_norm(lambda), inf_norm(mu)));
        it.complementarity = (niq > 0 ? z.dot(mu) : 0.0) / (1.0 + xn);
        const double cost = std::abs(e.f - f_old) / (1.0 + std::abs(f_old));
        return it.feasibility < options.feasibility_tolerance && it.gradient < options.gradient_tolerance &&
               it.complementarity < options.complementarity_tolerance && cost < options.cost_tolerance;
    };

    IpmIteration it0;
    bool done = conditions(ev, ev.f, it0);
    it0.barrier = gamma;
    res.log.push_back(it0);
    res.status = done ? IpmStatus::Converged : IpmStatus::MaxIterations;

    int iter = 0;
    while (!done && iter < options.max_iterations) {
        ++iter;
        const Eigen::VectorXd lx = lagr_grad(ev);
        Eigen::MatrixXd hess;
        if (options.hessian == HessianMethod::FiniteDifference)
            hess = fd_hessian(problem, x, lambda.head(nh), mu.head(ng), options.difference_step);
        else
            hess = bfgs;

        const Eigen::VectorXd zinv = z.cwiseInverse();
        const Eigen::VectorXd w = mu.cwiseProduct(zinv);
        Eigen::MatrixXd m = hess;
        Eigen::VectorXd nvec = lx;
        if (niq > 0) {
            m += ev.jg.transpose() * w.asDiagonal() * ev.jg;
            const Eigen::VectorXd t = zinv.cwiseProduct(mu.cwiseProduct(ev.g) + Eigen::VectorXd::Constant(niq, gamma));
            nvec += ev.jg.transpose() * t;
        }
        Eigen::VectorXd rhs(n + neq);
        rhs.head(n) = -nvec;
        rhs.tail(neq) = -ev.h;
        Eigen::VectorXd sol;
        if (!kkt.solve(m, ev.jh, rhs, gamma, sol)) {
            res.status = IpmStatus::NumericalFailure;
            break;
        }
        const Eigen::VectorXd dx = sol.head(n);
        const Eigen::VectorXd dlam = sol.tail(neq);
        Eigen::VectorXd dz(niq), dmu(niq);
        if (niq > 0) {
            dz = -ev.g - z - ev.jg * dx;
            dmu = -mu + zinv.cwiseProduct(Eigen::VectorXd::Constant(niq, gamma) - mu.cwiseProduct(dz));
        }

        double alpha_p = 1.0, alpha_d = 1.0;
        for (Eigen::Index i = 0; i < niq; ++i) {
            if (dz[i] < 0.0) alpha_p = std::min(alpha_p, options.step_to_boundary * z[i] / -dz[i]);
            if (dmu[i] < 0.0) alpha_d = std::min(alpha_d, options.step_to_boundary * mu[i] / -dmu[i]);
        }

        const Eigen::VectorXd x_old = x;
        x += alpha_p * dx;
        if (niq > 0) {
            z += alpha_p * dz;
            mu += alpha_d * dmu;
        }
        lambda += alpha_d * dlam;
        if (niq > 0) gamma = options.centering * z.dot(mu) / static_cast<double>(niq);

        Evaluation next = evaluate(problem, bounds, x);
        if (!all_finite(next) || !x.allFinite()) {
            res.status = IpmStatus::NumericalFailure;
            x = x_old;
            break;
        }
        if (options.hessian == HessianMethod::DampedBfgs) {
            const Eigen::VectorXd mu_g = mu.head(ng);
            const Eigen::VectorXd lam = lambda.head(nh);
            const Eigen::VectorXd y = lagrangian_gradient(problem, x, lam, mu_g) -
                                      lagrangian_gradient(problem, x_old, lam, mu_g);
            bfgs_update(bfgs, x - x_old, y);
        }
        f_prev = ev.f;
        ev = std::move(next);

        IpmIteration it;
        it.iteration = iter;
        it.step = inf_norm(alpha_p * dx);
        it.barrier = gamma;
        done = conditions(ev, f_prev, it);
        res.log.push_back(it);
        if (done) res.status = IpmStatus::Converged;
    }

    if (res.status == IpmStatus::NumericalFailure) ev = evaluate(problem, bounds, x);
    const IpmIteration& last = res.log.back();
    res.x = x;
    res.lambda = lambda.head(nh);
    res.mu = mu;
    res.objective = ev.f;
    res.feasibility = last.feasibility;
    res.gradient = last.gradient;
    res.complementarity = last.complementarity;
    res.iterations = iter;
    res.max_violation = std::max(inf_norm(ev.h), std::max(0.0, max_or(ev.g, 0.0)));
    res.mu_lower = Eigen::VectorXd::Zero(n);
    res.mu_upper = Eigen::VectorXd::Zero(n);
    Eigen::Index r = ng;
    for (auto i : bounds.lower_idx) res.mu_lower[i] = mu[r++];
    for (auto i : bounds.upper_idx) res.mu_upper[i] = mu[r++];
    for (std::size_t k = 0; k < bounds.fixed_idx.size(); ++k) {
        const Eigen::Index i = bounds.fixed_idx[k];
        const double l = lambda[nh + static_cast<Eigen::Index>(k)];
        res.mu_upper[i] = std::max(l, 0.0);
        res.mu_lower[i] = std::max(-l, 0.0);
    }
    return res;
}

}  // namespace gridcurb
