#pragma once

// Reference implementations used only by the tests. They favour brute force
// and textbook formulas over speed and share no code with the library.

#include <algorithm>
#include <array>
#include <bitset>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <tuple>
#include <vector>

#include <Eigen/Dense>

#include "camtrap/core.hpp"
#include "camtrap/image.hpp"
#include "camtrap/imaging.hpp"

namespace oracle {

// Pixel counting on an explicit raster.
inline double pixel_iou(const camtrap::BoundingBox& a, const camtrap::BoundingBox& b, int grid) {
    long long inter = 0;
    long long uni = 0;
    for (int y = 0; y < grid; ++y) {
        for (int x = 0; x < grid; ++x) {
            const bool in_a = x >= a.x && x < a.x + a.w && y >= a.y && y < a.y + a.h;
            const bool in_b = x >= b.x && x < b.x + b.w && y >= b.y && y < b.y + b.h;
            inter += (in_a && in_b) ? 1 : 0;
            uni += (in_a || in_b) ? 1 : 0;
        }
    }
    return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

// 8x8 raster of a box as a 64-cell bitset, for the exhaustive sweep.
inline std::bitset<64> raster8(const camtrap::BoundingBox& b) {
    std::bitset<64> bits;
    for (int y = b.y; y < b.y + b.h; ++y) {
        for (int x = b.x; x < b.x + b.w; ++x) bits.set(static_cast<std::size_t>(y * 8 + x));
    }
    return bits;
}

inline std::vector<camtrap::BoundingBox> all_boxes(int grid) {
    std::vector<camtrap::BoundingBox> boxes;
    for (int y = 0; y < grid; ++y) {
        for (int x = 0; x < grid; ++x) {
            for (int h = 1; y + h <= grid; ++h) {
                for (int w = 1; x + w <= grid; ++w) boxes.push_back({x, y, w, h});
            }
        }
    }
    return boxes;
}

inline double soft_threshold(double x, double kappa) { return std::copysign(std::max(std::abs(x) - kappa, 0.0), x); }

// Singular value thresholding through the eigen-decomposition of A^T A:
// A = U S V^T with V, S^2 from the eigensolver and U = A V / S.
inline Eigen::MatrixXd svt(const Eigen::MatrixXd& a, double tau) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(a.transpose() * a);
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(a.rows(), a.cols());
    for (Eigen::Index i = 0; i < eig.eigenvalues().size(); ++i) {
        const double sigma = std::sqrt(std::max(eig.eigenvalues()(i), 0.0));
        if (sigma <= tau) continue;
        const Eigen::VectorXd v = eig.eigenvectors().col(i);
        const Eigen::VectorXd u = a * v / sigma;
        out += (sigma - tau) * u * v.transpose();
    }
    return out;
}

inline double nuclear_norm(const Eigen::MatrixXd& a) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(a);
    return svd.singularValues().sum();
}

// Objective of the multi-output lasso with an unpenalized intercept per output.
inline double lasso_objective(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, const Eigen::MatrixXd& beta,
                              const Eigen::VectorXd& b, double lambda) {
    const double n = static_cast<double>(x.rows());
    const Eigen::MatrixXd r = (y - x * beta).rowwise() - b.transpose();
    return r.squaredNorm() / (2.0 * n) + lambda * beta.cwiseAbs().sum();
}

struct LassoSolution {
    Eigen::MatrixXd beta;
    Eigen::VectorXd intercept;
    double objective = 0.0;
};

// Accelerated proximal gradient on (beta, intercept) jointly; the intercept
// is a plain gradient coordinate with no shrinkage.
inline LassoSolution lasso_proximal_gradient(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, double lambda,
                                             int max_iter = 200000, double tol = 1e-13) {
    const Eigen::Index n = x.rows();
    const Eigen::Index p = x.cols();
    const Eigen::Index k = y.cols();
    Eigen::MatrixXd design(n, p + 1);
    design << Eigen::VectorXd::Ones(n), x;
    const double lipschitz = Eigen::JacobiSVD<Eigen::MatrixXd>(design).singularValues()(0);
    const double step = static_cast<double>(n) / (lipschitz * lipschitz);

    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(p + 1, k);  // row 0 is the intercept
    Eigen::MatrixXd z = w;
    double t = 1.0;
    double prev_obj = std::numeric_limits<double>::infinity();
    for (int it = 0; it < max_iter; ++it) {
        const Eigen::MatrixXd grad = design.transpose() * (design * z - y) / static_cast<double>(n);
        Eigen::MatrixXd next = z - step * grad;
        for (Eigen::Index i = 1; i <= p; ++i) {
            for (Eigen::Index c = 0; c < k; ++c) next(i, c) = soft_threshold(next(i, c), step * lambda);
        }
        const double obj =
            lasso_objective(x, y, next.bottomRows(p), next.row(0).transpose(), lambda);
        // Restart the momentum whenever the objective goes up.
        if (obj > prev_obj) {
            if (z == w) break;  // a plain proximal step no longer descends
            t = 1.0;
            z = w;
            continue;
        }
        const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
        const double change = (next - w).cwiseAbs().maxCoeff();
        z = next + ((t - 1.0) / t_next) * (next - w);
        w = next;
        t = t_next;
        prev_obj = obj;
        if (change < tol) break;
    }
    LassoSolution s;
    s.beta = w.bottomRows(p);
    s.intercept = w.row(0).transpose();
    s.objective = lasso_objective(x, y, s.beta, s.intercept, lambda);
    return s;
}

// Euclidean projection onto {0 <= a <= c, y^T a = 0}. The balance y^T a(nu)
// of a(nu) = clip(v - nu y) is piecewise linear and non-increasing in nu, so
// the root is found exactly between two adjacent breakpoints.
inline Eigen::VectorXd project_dual(const Eigen::VectorXd& v, std::span<const int> y, double c) {
    auto clipped = [&](double nu) {
        Eigen::VectorXd a(v.size());
        for (Eigen::Index i = 0; i < v.size(); ++i) a(i) = std::clamp(v(i) - nu * y[i], 0.0, c);
        return a;
    };
    auto balance = [&](double nu) {
        const Eigen::VectorXd a = clipped(nu);
        double s = 0.0;
        for (Eigen::Index i = 0; i < a.size(); ++i) s += y[i] * a(i);
        return s;
    };
    std::vector<double> knots;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        knots.push_back(y[i] * v(i));
        knots.push_back(y[i] * (v(i) - c));
    }
    std::sort(knots.begin(), knots.end());
    double lo = knots.front();
    double f_lo = balance(lo);
    if (f_lo <= 0.0) return clipped(lo);
    for (std::size_t k = 1; k < knots.size(); ++k) {
        const double hi = knots[k];
        const double f_hi = balance(hi);
        if (f_hi <= 0.0) {
            const double nu = f_lo == f_hi ? hi : lo + (hi - lo) * f_lo / (f_lo - f_hi);
            return clipped(nu);
        }
        lo = hi;
        f_lo = f_hi;
    }
    return clipped(knots.back());
}

inline double svm_dual_objective(const Eigen::MatrixXd& q, const Eigen::VectorXd& a) {
    return 0.5 * a.dot(q * a) - a.sum();
}

inline double svm_kkt_gap(const Eigen::MatrixXd& kernel, std::span<const int> y, const Eigen::VectorXd& a, double c);

// Exact solution of the dual with the coordinates of `a` near a bound fixed
// there and the rest free; empty when it leaves the box.
inline std::optional<Eigen::VectorXd> polish_dual(const Eigen::MatrixXd& q, std::span<const int> y, double c,
                                                  Eigen::VectorXd a, double snap = 1e-9) {
    const Eigen::Index n = q.rows();
    std::vector<Eigen::Index> free;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (a(i) > snap * c && a(i) < c * (1.0 - snap)) free.push_back(i);
        else a(i) = a(i) > 0.5 * c ? c : 0.0;
    }
    const auto f = static_cast<Eigen::Index>(free.size());
    double fixed_balance = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) fixed_balance += y[i] * a(i);
    if (f == 0) return std::abs(fixed_balance) <= 1e-12 * std::max(1.0, c) ? std::optional(a) : std::nullopt;
    Eigen::MatrixXd sys = Eigen::MatrixXd::Zero(f + 1, f + 1);
    Eigen::VectorXd rhs(f + 1);
    for (Eigen::Index r = 0; r < f; ++r) {
        const auto i = free[static_cast<std::size_t>(r)];
        double bounded = 0.0;
        for (Eigen::Index j = 0; j < n; ++j) bounded += q(i, j) * a(j);
        for (Eigen::Index k = 0; k < f; ++k) {
            const auto j = free[static_cast<std::size_t>(k)];
            sys(r, k) = q(i, j);
            bounded -= q(i, j) * a(j);
        }
        sys(r, f) = y[i];
        sys(f, r) = y[i];
        rhs(r) = 1.0 - bounded;
        fixed_balance -= y[i] * a(i);
    }
    rhs(f) = -fixed_balance;
    const Eigen::VectorXd sol = sys.fullPivLu().solve(rhs);
    if (!sol.allFinite()) return std::nullopt;
    for (Eigen::Index r = 0; r < f; ++r) {
        if (sol(r) < 0.0 || sol(r) > c) return std::nullopt;
        a(free[static_cast<std::size_t>(r)]) = sol(r);
    }
    return a;
}

// Accelerated projected gradient on the binary SVM dual
//   min 1/2 a^T Q a - e^T a  s.t.  0 <= a <= C,  y^T a = 0,
// finished by an active-set solve once the support pattern has settled.
inline Eigen::VectorXd svm_dual_projected_gradient(const Eigen::MatrixXd& kernel, std::span<const int> y, double c,
                                                   int max_iter = 500000, double tol = 1e-12) {
    const Eigen::Index n = kernel.rows();
    Eigen::MatrixXd q(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) q(i, j) = y[i] * y[j] * kernel(i, j);
    }
    const double lipschitz = std::max(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(q).eigenvalues().maxCoeff(), 1e-12);
    const double step = 1.0 / lipschitz;
    Eigen::VectorXd a = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd z = a;
    double t = 1.0;
    double prev = svm_dual_objective(q, a);
    for (int it = 0; it < max_iter; ++it) {
        const Eigen::VectorXd next = project_dual(z - step * (q * z - Eigen::VectorXd::Ones(n)), y, c);
        const double obj = svm_dual_objective(q, next);
        if (obj > prev) {
            if (z == a) break;  // a plain projected step no longer descends
            t = 1.0;
            z = a;
            continue;
        }
        const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
        const double change = (next - a).cwiseAbs().maxCoeff();
        z = next + ((t - 1.0) / t_next) * (next - a);
        a = next;
        t = t_next;
        prev = obj;
        if (change < tol) break;
        if (it % 100 == 99) {
            for (double snap : {1e-9, 1e-6, 1e-3}) {
                const auto p = polish_dual(q, y, c, a, snap);
                if (p && svm_dual_objective(q, *p) <= prev + 1e-12 && svm_kkt_gap(kernel, y, *p, c) < 1e-9) return *p;
            }
        }
    }
    const auto p = polish_dual(q, y, c, a);
    return p && svm_dual_objective(q, *p) <= prev + 1e-12 ? *p : a;
}

// Between-class variance of the split "bins <= t" vs "bins > t", from the
// textbook weights and means.
inline double between_class_variance(const std::array<long long, 256>& hist, int t) {
    double n0 = 0, n1 = 0, m0 = 0, m1 = 0;
    for (int b = 0; b < 256; ++b) {
        const auto c = static_cast<double>(hist[static_cast<std::size_t>(b)]);
        if (b <= t) {
            n0 += c;
            m0 += b * c;
        } else {
            n1 += c;
            m1 += b * c;
        }
    }
    if (n0 == 0 || n1 == 0) return -1.0;
    const double total = n0 + n1;
    const double w0 = n0 / total;
    const double w1 = n1 / total;
    const double d = m0 / n0 - m1 / n1;
    return w0 * w1 * d * d;
}

// Best split over all 255 bin boundaries; -1 when fewer than two bins are occupied.
inline int otsu_exhaustive(const camtrap::ImageGray& img, double* best_var = nullptr) {
    std::array<long long, 256> hist{};
    for (double v : img.data()) hist[static_cast<std::size_t>(camtrap::histogram_bin(v))]++;
    int best_t = -1;
    double best = -1.0;
    for (int t = 0; t < 255; ++t) {
        const double v = between_class_variance(hist, t);
        if (v > best) {
            best = v;
            best_t = t;
        }
    }
    if (best_var) *best_var = best;
    return best < 0 ? -1 : best_t;
}

// Tight boxes of 8-connected components by flood fill, sorted by (x, y, w, h).
inline std::vector<camtrap::BoundingBox> flood_fill_components(const camtrap::ImageGray& mask, double min_pixels) {
    const int w = mask.width();
    const int h = mask.height();
    std::vector<char> seen(static_cast<std::size_t>(w * h), 0);
    std::vector<camtrap::BoundingBox> out;
    for (int sy = 0; sy < h; ++sy) {
        for (int sx = 0; sx < w; ++sx) {
            if (mask(sx, sy) < 0.5 || seen[static_cast<std::size_t>(sy * w + sx)]) continue;
            int x0 = sx, x1 = sx, y0 = sy, y1 = sy;
            long long count = 0;
            std::vector<std::pair<int, int>> stack{{sx, sy}};
            seen[static_cast<std::size_t>(sy * w + sx)] = 1;
            while (!stack.empty()) {
                const auto [x, y] = stack.back();
                stack.pop_back();
                ++count;
                x0 = std::min(x0, x);
                x1 = std::max(x1, x);
                y0 = std::min(y0, y);
                y1 = std::max(y1, y);
                for (int dy = -1; dy <= 1; ++dy) {
                    for (int dx = -1; dx <= 1; ++dx) {
                        const int nx = x + dx, ny = y + dy;
                        if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
                        auto& s = seen[static_cast<std::size_t>(ny * w + nx)];
                        if (s || mask(nx, ny) < 0.5) continue;
                        s = 1;
                        stack.emplace_back(nx, ny);
                    }
                }
            }
            if (static_cast<double>(count) >= min_pixels) out.push_back({x0, y0, x1 - x0 + 1, y1 - y0 + 1});
        }
    }
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
        return std::tie(a.x, a.y, a.w, a.h) < std::tie(b.x, b.y, b.w, b.h);
    });
    return out;
}

// Largest violation of the lasso optimality conditions, with r_k the class-k
// residual and g = X^T r / N: |g_j| <= lambda where beta_j = 0, otherwise
// g_j = lambda * sign(beta_j).
inline double lasso_kkt_violation(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, const Eigen::MatrixXd& beta,
                                  const Eigen::VectorXd& b, double lambda) {
    const double n = static_cast<double>(x.rows());
    const Eigen::MatrixXd r = (y - x * beta).rowwise() - b.transpose();
    const Eigen::MatrixXd g = x.transpose() * r / n;
    double worst = 0.0;
    for (Eigen::Index k = 0; k < beta.cols(); ++k) {
        worst = std::max(worst, std::abs(r.col(k).mean()));  // intercept stationarity
        for (Eigen::Index j = 0; j < beta.rows(); ++j) {
            const double v = beta(j, k) == 0.0 ? std::max(0.0, std::abs(g(j, k)) - lambda)
                                               : std::abs(g(j, k) - lambda * (beta(j, k) > 0 ? 1.0 : -1.0));
            worst = std::max(worst, v);
        }
    }
    return worst;
}

// Maximal KKT violation of a binary SVM dual point, as m(a) - M(a) over the
// up/low index sets of the gradient G = Q a - e.
inline double svm_kkt_gap(const Eigen::MatrixXd& kernel, std::span<const int> y, const Eigen::VectorXd& a, double c) {
    const Eigen::Index n = kernel.rows();
    double up = -std::numeric_limits<double>::infinity();
    double low = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < n; ++i) {
        double g = -1.0;
        for (Eigen::Index j = 0; j < n; ++j) g += y[i] * y[j] * kernel(i, j) * a(j);
        const double v = -y[i] * g;
        const bool in_up = (y[i] > 0 && a(i) < c) || (y[i] < 0 && a(i) > 0);
        const bool in_low = (y[i] > 0 && a(i) > 0) || (y[i] < 0 && a(i) < c);
        if (in_up) up = std::max(up, v);
        if (in_low) low = std::min(low, v);
    }
    return up - low;
}

}  // namespace oracle
