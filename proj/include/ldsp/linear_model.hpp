#pragma once

// L2-regularized logistic regression (binary and multinomial), feature
// standardization and recursive feature elimination.
//
// Objective, for parameters theta = (W, b):
//     sum_i logloss_i(theta) + (lambda / 2) * ||W||^2
// The bias is never penalized. Binary problems are solved with damped
// Newton steps, multinomial ones with L-BFGS; both use Armijo backtracking so
// the training loss never increases between iterations. Nothing is sampled:
// identical inputs give bit-identical models.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <deque>
#include <limits>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "ldsp/error.hpp"

namespace ldsp::linear {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

class Standardizer {
public:
    Standardizer() = default;

    /// Column means and population standard deviations; zero deviations are
    /// replaced by 1 so constant columns map to 0.
    static Standardizer fit(const Matrix& x) {
        if (x.rows() == 0) throw Error(ErrorCode::InvalidArgument, "Standardizer::fit: no rows");
        Standardizer s;
        const auto n = static_cast<double>(x.rows());
        s.means_ = Vector::Zero(x.cols());
        s.stds_ = Vector::Zero(x.cols());
        for (Eigen::Index j = 0; j < x.cols(); ++j) {
            double sum = 0.0;
            for (Eigen::Index i = 0; i < x.rows(); ++i) sum += x(i, j);
            const double mean = sum / n;
            double ss = 0.0;
            for (Eigen::Index i = 0; i < x.rows(); ++i) {
                const double d = x(i, j) - mean;
                ss += d * d;
            }
            const double sd = std::sqrt(ss / n);
            s.means_(j) = mean;
            s.stds_(j) = sd > 0.0 ? sd : 1.0;
        }
        return s;
    }

    [[nodiscard]] Matrix transform(const Matrix& x) const {
        check_cols(x);
        return (x.rowwise() - means_.transpose()).array().rowwise() / stds_.transpose().array();
    }

    [[nodiscard]] Matrix inverse_transform(const Matrix& z) const {
        check_cols(z);
        return (z.array().rowwise() * stds_.transpose().array()).matrix().rowwise() + means_.transpose();
    }

    [[nodiscard]] const Vector& means() const noexcept { return means_; }
    [[nodiscard]] const Vector& stds() const noexcept { return stds_; }

private:
    void check_cols(const Matrix& x) const {
        if (x.cols() != means_.size())
            throw Error(ErrorCode::DimensionMismatch, "Standardizer: expected " + std::to_string(means_.size()) +
                                                          " columns, got " + std::to_string(x.cols()));
    }

    Vector means_;
    Vector stds_;
};

enum class Solver { Auto, Newton, Lbfgs };

struct FitOptions {
    double l2_lambda = 1.0;
    double tol = 1e-6;          // on the L2 norm of the full gradient
    std::size_t max_iter = 0;   // 0: 100 for Newton, 2000 for L-BFGS
    Solver solver = Solver::Auto;
    std::size_t lbfgs_memory = 10;
};

struct LogisticModel {
    // Binary: one row holding the class-1 weights. Multinomial: one row per class.
    Matrix weights;
    Vector bias;
    double l2_lambda = 1.0;
    std::vector<int> classes;  // ascending
    bool converged = false;
    std::size_t iterations = 0;
    std::vector<double> loss_history;  // objective after each accepted step, starting at the initial point

    [[nodiscard]] bool is_binary() const noexcept { return classes.size() == 2; }
    [[nodiscard]] Eigen::Index dim() const noexcept { return weights.cols(); }

    /// Index into `classes` of the prediction for one row. Binary predicts the
    /// second class only for a strictly positive margin; multinomial ties go to
    /// the lowest class index.
    [[nodiscard]] std::size_t predict_index(const Eigen::Ref<const Eigen::RowVectorXd>& row) const {
        if (is_binary()) {
            const double z = row.dot(weights.row(0)) + bias(0);
            return z > 0.0 ? 1 : 0;
        }
        std::size_t best = 0;
        double best_score = -std::numeric_limits<double>::infinity();
        for (Eigen::Index c = 0; c < weights.rows(); ++c) {
            const double s = row.dot(weights.row(c)) + bias(c);
            if (s > best_score) {
                best_score = s;
                best = static_cast<std::size_t>(c);
            }
        }
        return best;
    }

    [[nodiscard]] std::vector<int> predict(const Matrix& x) const {
        if (x.cols() != dim())
            throw Error(ErrorCode::DimensionMismatch, "predict: model has " + std::to_string(dim()) +
                                                          " features, input has " + std::to_string(x.cols()));
        std::vector<int> out(static_cast<std::size_t>(x.rows()));
        for (Eigen::Index i = 0; i < x.rows(); ++i) out[static_cast<std::size_t>(i)] = classes[predict_index(x.row(i))];
        return out;
    }
};

namespace detail {

inline double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

inline double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

inline void require_finite(const Matrix& x, const char* what) {
    if (!x.allFinite()) throw Error(ErrorCode::NonFiniteInput, std::string(what) + ": non-finite feature value");
}

struct Encoded {
    std::vector<int> classes;
    std::vector<std::size_t> index;  // row -> class index
};

inline Encoded encode_labels(std::span<const int> y) {
    Encoded e;
    e.classes.assign(y.begin(), y.end());
    std::sort(e.classes.begin(), e.classes.end());
    e.classes.erase(std::unique(e.classes.begin(), e.classes.end()), e.classes.end());
    e.index.reserve(y.size());
    for (int v : y)
        e.index.push_back(static_cast<std::size_t>(std::lower_bound(e.classes.begin(), e.classes.end(), v) -
                                                   e.classes.begin()));
    return e;
}

}  // namespace detail

/// Binary objective. `params` holds d weights followed by the bias; `y01`
/// holds 0/1 targets. When `grad` is non-null it receives the gradient.
inline double binary_objective(const Matrix& x, const Vector& y01, const Vector& params, double l2_lambda,
                               Vector* grad = nullptr) {
    const Eigen::Index d = x.cols();
    const auto w = params.head(d);
    const double b = params(d);
    const Vector z = (x * w).array() + b;
    double loss = 0.0;
    for (Eigen::Index i = 0; i < z.size(); ++i) loss += detail::softplus(z(i)) - y01(i) * z(i);
    loss += 0.5 * l2_lambda * w.squaredNorm();
    if (grad) {
        Vector r(z.size());
        for (Eigen::Index i = 0; i < z.size(); ++i) r(i) = detail::sigmoid(z(i)) - y01(i);
        grad->resize(d + 1);
        grad->head(d) = x.transpose() * r + l2_lambda * w;
        (*grad)(d) = r.sum();
    }
    return loss;
}

/// Multinomial softmax objective. `params` is laid out class by class as
/// [w_c (d values), b_c]; `labels` are class indices in [0, n_classes).
inline double multinomial_objective(const Matrix& x, std::span<const std::size_t> labels, std::size_t n_classes,
                                    const Vector& params, double l2_lambda, Vector* grad = nullptr) {
    const Eigen::Index d = x.cols();
    const auto c_count = static_cast<Eigen::Index>(n_classes);
    Matrix w(c_count, d);
    Vector b(c_count);
    for (Eigen::Index c = 0; c < c_count; ++c) {
        w.row(c) = params.segment(c * (d + 1), d).transpose();
        b(c) = params(c * (d + 1) + d);
    }
    Matrix scores = x * w.transpose();
    scores.rowwise() += b.transpose();
    double loss = 0.0;
    Matrix resid(scores.rows(), c_count);
    for (Eigen::Index i = 0; i < scores.rows(); ++i) {
        const double m = scores.row(i).maxCoeff();
        double denom = 0.0;
        for (Eigen::Index c = 0; c < c_count; ++c) denom += std::exp(scores(i, c) - m);
        const double log_z = m + std::log(denom);
        const auto yi = static_cast<Eigen::Index>(labels[static_cast<std::size_t>(i)]);
        loss += log_z - scores(i, yi);
        for (Eigen::Index c = 0; c < c_count; ++c) resid(i, c) = std::exp(scores(i, c) - log_z);
        resid(i, yi) -= 1.0;
    }
    loss += 0.5 * l2_lambda * w.squaredNorm();
    if (grad) {
        grad->resize(c_count * (d + 1));
        const Matrix gw = resid.transpose() * x;  // C x d
        for (Eigen::Index c = 0; c < c_count; ++c) {
            grad->segment(c * (d + 1), d) = (gw.row(c) + l2_lambda * w.row(c)).transpose();
            (*grad)(c * (d + 1) + d) = resid.col(c).sum();
        }
    }
    return loss;
}

namespace detail {

struct SolveResult {
    Vector params;
    bool converged = false;
    std::size_t iterations = 0;
    std::vector<double> loss_history;
};

// Armijo backtracking along `dir`; returns the accepted step or 0 when no
// step of at least 2^-60 decreases the objective.
template <typename Objective>
double backtrack(const Objective& f, const Vector& x, double fx, const Vector& g, const Vector& dir, double t0,
                 Vector& x_new, double& f_new, Vector& g_new) {
    const double slope = g.dot(dir);
    if (!(slope < 0.0)) return 0.0;
    double t = t0;
    for (int k = 0; k < 60; ++k) {
        x_new = x + t * dir;
        f_new = f(x_new, &g_new);
        if (std::isfinite(f_new) && f_new <= fx + 1e-4 * t * slope) return t;
        t *= 0.5;
    }
    return 0.0;
}

template <typename Objective, typename Hessian>
SolveResult newton(const Objective& f, const Hessian& hess, Vector x0, double tol, std::size_t max_iter) {
    SolveResult r;
    r.params = std::move(x0);
    Vector g;
    double fx = f(r.params, &g);
    r.loss_history.push_back(fx);
    Vector x_new, g_new;
    double f_new = 0.0;
    for (; r.iterations < max_iter; ++r.iterations) {
        if (g.norm() <= tol) {
            r.converged = true;
            return r;
        }
        const Matrix h = hess(r.params);
        Vector dir = h.ldlt().solve(-g);
        if (!dir.allFinite() || g.dot(dir) >= 0.0) dir = -g;
        const double t = backtrack(f, r.params, fx, g, dir, 1.0, x_new, f_new, g_new);
        if (t == 0.0) break;
        r.params.swap(x_new);
        g.swap(g_new);
        fx = f_new;
        r.loss_history.push_back(fx);
    }
    r.converged = g.norm() <= tol;
    return r;
}

template <typename Objective>
SolveResult lbfgs(const Objective& f, Vector x0, double tol, std::size_t max_iter, std::size_t memory) {
    SolveResult r;
    r.params = std::move(x0);
    Vector g;
    double fx = f(r.params, &g);
    r.loss_history.push_back(fx);
    std::deque<Vector> s_hist, y_hist;
    std::deque<double> rho_hist;
    Vector x_new, g_new;
    double f_new = 0.0;
    for (; r.iterations < max_iter; ++r.iterations) {
        const double gnorm = g.norm();
        if (gnorm <= tol) {
            r.converged = true;
            return r;
        }
        // two-loop recursion
        Vector q = -g;
        const std::size_t m = s_hist.size();
        std::vector<double> alpha(m);
        for (std::size_t k = m; k-- > 0;) {
            alpha[k] = rho_hist[k] * s_hist[k].dot(q);
            q -= alpha[k] * y_hist[k];
        }
        if (m > 0) q *= s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
        for (std::size_t k = 0; k < m; ++k) {
            const double beta = rho_hist[k] * y_hist[k].dot(q);
            q += (alpha[k] - beta) * s_hist[k];
        }
        double t0 = 1.0;
        if (m == 0) t0 = std::min(1.0, 1.0 / gnorm);
        if (g.dot(q) >= 0.0) {
            q = -g;
            t0 = std::min(1.0, 1.0 / gnorm);
            s_hist.clear();
            y_hist.clear();
            rho_hist.clear();
        }
        const double t = backtrack(f, r.params, fx, g, q, t0, x_new, f_new, g_new);
        if (t == 0.0) break;
        Vector s = x_new - r.params;
        Vector yv = g_new - g;
        const double sy = s.dot(yv);
        if (sy > 1e-12 * yv.squaredNorm()) {
            if (s_hist.size() == memory) {
                s_hist.pop_front();
                y_hist.pop_front();
                rho_hist.pop_front();
            }
            s_hist.push_back(std::move(s));
            y_hist.push_back(std::move(yv));
            rho_hist.push_back(1.0 / sy);
        }
        r.params.swap(x_new);
        g.swap(g_new);
        fx = f_new;
        r.loss_history.push_back(fx);
    }
    r.converged = g.norm() <= tol;
    return r;
}

}  // namespace detail

/// Fits a logistic model on caller-standardized features. Two classes give a
/// binary model, more give a joint multinomial one. A solve that stops before
/// reaching `tol` returns the model with converged = false.
inline LogisticModel fit_logistic(const Matrix& x, std::span<const int> y, const FitOptions& opts = {}) {
    if (static_cast<std::size_t>(x.rows()) != y.size())
        throw Error(ErrorCode::DimensionMismatch, "fit_logistic: " + std::to_string(x.rows()) + " rows but " +
                                                      std::to_string(y.size()) + " labels");
    if (x.rows() < 2) throw Error(ErrorCode::InvalidArgument, "fit_logistic: need at least 2 rows");
    if (opts.l2_lambda < 0.0) throw Error(ErrorCode::InvalidArgument, "fit_logistic: negative l2_lambda");
    detail::require_finite(x, "fit_logistic");
    const auto enc = detail::encode_labels(y);
    if (enc.classes.size() < 2) throw Error(ErrorCode::SingleClassInput, "fit_logistic: only one class present");

    const Eigen::Index d = x.cols();
    const double lambda = opts.l2_lambda;
    LogisticModel model;
    model.l2_lambda = lambda;
    model.classes = enc.classes;

    detail::SolveResult sol;
    if (enc.classes.size() == 2) {
        Vector y01(x.rows());
        for (Eigen::Index i = 0; i < x.rows(); ++i) y01(i) = static_cast<double>(enc.index[static_cast<std::size_t>(i)]);
        auto f = [&](const Vector& p, Vector* g) { return binary_objective(x, y01, p, lambda, g); };
        const bool use_newton = opts.solver == Solver::Newton || (opts.solver == Solver::Auto && d <= 1500);
        if (use_newton) {
            auto hess = [&](const Vector& p) {
                const Vector z = (x * p.head(d)).array() + p(d);
                Matrix xa(x.rows(), d + 1);
                xa.leftCols(d) = x;
                xa.col(d).setOnes();
                Vector sq(z.size());
                for (Eigen::Index i = 0; i < z.size(); ++i) {
                    const double s = detail::sigmoid(z(i));
                    sq(i) = std::sqrt(s * (1.0 - s));
                }
                xa = sq.asDiagonal() * xa;
                Matrix h = Matrix::Zero(d + 1, d + 1);
                h.selfadjointView<Eigen::Lower>().rankUpdate(xa.transpose());
                h = h.selfadjointView<Eigen::Lower>();
                h.diagonal().head(d).array() += lambda;
                h(d, d) += 1e-10;
                return h;
            };
            sol = detail::newton(f, hess, Vector::Zero(d + 1), opts.tol, opts.max_iter ? opts.max_iter : 100);
        } else {
            sol = detail::lbfgs(f, Vector::Zero(d + 1), opts.tol, opts.max_iter ? opts.max_iter : 2000,
                                opts.lbfgs_memory);
        }
        model.weights = sol.params.head(d).transpose();
        model.bias = Vector::Constant(1, sol.params(d));
    } else {
        const std::size_t c_count = enc.classes.size();
        auto f = [&](const Vector& p, Vector* g) {
            return multinomial_objective(x, enc.index, c_count, p, lambda, g);
        };
        sol = detail::lbfgs(f, Vector::Zero(static_cast<Eigen::Index>(c_count) * (d + 1)), opts.tol,
                            opts.max_iter ? opts.max_iter : 2000, opts.lbfgs_memory);
        const auto cc = static_cast<Eigen::Index>(c_count);
        model.weights.resize(cc, d);
        model.bias.resize(cc);
        for (Eigen::Index c = 0; c < cc; ++c) {
            model.weights.row(c) = sol.params.segment(c * (d + 1), d).transpose();
            model.bias(c) = sol.params(c * (d + 1) + d);
        }
    }
    if (!model.weights.allFinite() || !model.bias.allFinite())
        throw Error(ErrorCode::NonFiniteInput, "fit_logistic: optimizer produced non-finite parameters");
    model.converged = sol.converged;
    model.iterations = sol.iterations;
    model.loss_history = std::move(sol.loss_history);
    return model;
}

inline double predict_accuracy(const LogisticModel& model, const Matrix& x, std::span<const int> y) {
    if (x.cols() != model.dim())
        throw Error(ErrorCode::DimensionMismatch, "predict_accuracy: model has " + std::to_string(model.dim()) +
                                                      " features, input has " + std::to_string(x.cols()));
    if (static_cast<std::size_t>(x.rows()) != y.size())
        throw Error(ErrorCode::DimensionMismatch, "predict_accuracy: row/label count mismatch");
    if (y.empty()) throw Error(ErrorCode::InvalidArgument, "predict_accuracy: empty evaluation set");
    std::size_t correct = 0;
    for (Eigen::Index i = 0; i < x.rows(); ++i)
        if (model.classes[model.predict_index(x.row(i))] == y[static_cast<std::size_t>(i)]) ++correct;
    return static_cast<double>(correct) / static_cast<double>(y.size());
}

/// Column subset of x in the given order.
inline Matrix select_columns(const Matrix& x, std::span<const std::size_t> cols) {
    Matrix out(x.rows(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t j = 0; j < cols.size(); ++j) {
        if (cols[j] >= static_cast<std::size_t>(x.cols()))
            throw Error(ErrorCode::DimensionMismatch, "select_columns: column " + std::to_string(cols[j]) +
                                                          " out of range");
        out.col(static_cast<Eigen::Index>(j)) = x.col(static_cast<Eigen::Index>(cols[j]));
    }
    return out;
}

struct RfeOptions {
    std::size_t keep_count = 20;
    double step_fraction = 0.1;  // share of survivors removed per round
    FitOptions fit;
};

struct RfeResult {
    std::vector<std::size_t> selected_dims;      // ascending
    std::map<std::size_t, double> final_weights;  // signed weights of the final refit
    std::vector<std::size_t> elimination_order;  // first eliminated first
};

/// Recursive feature elimination with a binary logistic model on
/// caller-standardized features. Each round removes ceil(step * survivors)
/// features of smallest |weight| (never going below keep_count); ties in
/// |weight| eliminate the higher column index first. The survivors are refit
/// once more and that fit supplies final_weights.
inline RfeResult rfe(const Matrix& x, std::span<const int> y, const RfeOptions& opts = {}) {
    if (opts.keep_count < 1) throw Error(ErrorCode::InvalidArgument, "rfe: keep_count must be >= 1");
    if (!(opts.step_fraction > 0.0 && opts.step_fraction <= 1.0))
        throw Error(ErrorCode::InvalidArgument, "rfe: step_fraction must be in (0, 1]");
    const auto d = static_cast<std::size_t>(x.cols());
    const std::size_t keep = std::min(opts.keep_count, d);

    std::vector<std::size_t> survivors(d);
    std::iota(survivors.begin(), survivors.end(), std::size_t{0});
    RfeResult res;
    while (survivors.size() > keep) {
        const LogisticModel m = fit_logistic(select_columns(x, survivors), y, opts.fit);
        if (!m.is_binary()) throw Error(ErrorCode::InvalidArgument, "rfe: labels must be binary");
        std::vector<std::size_t> order(survivors.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            const double wa = std::fabs(m.weights(0, static_cast<Eigen::Index>(a)));
            const double wb = std::fabs(m.weights(0, static_cast<Eigen::Index>(b)));
            if (wa != wb) return wa < wb;
            return survivors[a] > survivors[b];
        });
        auto step = static_cast<std::size_t>(
            std::ceil(opts.step_fraction * static_cast<double>(survivors.size()) - 1e-12));
        step = std::clamp<std::size_t>(step, 1, survivors.size() - keep);
        std::vector<bool> drop(survivors.size(), false);
        for (std::size_t k = 0; k < step; ++k) {
            drop[order[k]] = true;
            res.elimination_order.push_back(survivors[order[k]]);
        }
        std::vector<std::size_t> next;
        next.reserve(survivors.size() - step);
        for (std::size_t k = 0; k < survivors.size(); ++k)
            if (!drop[k]) next.push_back(survivors[k]);
        survivors = std::move(next);
    }
    const LogisticModel final_model = fit_logistic(select_columns(x, survivors), y, opts.fit);
    if (!final_model.is_binary()) throw Error(ErrorCode::InvalidArgument, "rfe: labels must be binary");
    res.selected_dims = survivors;
    for (std::size_t k = 0; k < survivors.size(); ++k)
        res.final_weights[survivors[k]] = final_model.weights(0, static_cast<Eigen::Index>(k));
    return res;
}

}  // namespace ldsp::linear
