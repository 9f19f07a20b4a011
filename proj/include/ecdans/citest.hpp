#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ecdans/error.hpp"
#include "ecdans/model.hpp"

namespace ecdans {

enum class TestKind { ParCorr, Hsic };

struct TestConfig {
    double alpha = 0.05;
    TestKind test_kind = TestKind::ParCorr;
    int hsic_permutations = 200;
    std::uint64_t rng_seed = 0;

    void validate() const {
        if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("alpha must lie in (0, 1)");
        if (hsic_permutations < 1) throw ValidationError("hsic_permutations must be positive");
        if (test_kind == TestKind::Hsic && hsic_permutations < 100)
            throw ValidationError("HSIC needs at least 100 permutations");
    }
};

inline constexpr double kCorrelationClamp = 1e-10;

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline Eigen::MatrixXd with_intercept(const Eigen::MatrixXd& Z) {
    Eigen::MatrixXd D(Z.rows(), Z.cols() + 1);
    D.col(0).setOnes();
    D.rightCols(Z.cols()) = Z;
    return D;
}

}  // namespace detail

/// Mixes a base seed with extra identifiers into a per-call stream seed.
inline std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> ids) {
    std::uint64_t s = detail::splitmix64(base);
    for (auto id : ids) s = detail::splitmix64(s ^ detail::splitmix64(id + 0x632be59bd9b4e019ULL));
    return s;
}

/// Correlation of the residuals of x and y after least squares on [1, Z].
/// Columns of Z are the conditioning variables. Not clamped.
inline double partial_correlation(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                                  const Eigen::MatrixXd& Z) {
    const Eigen::Index n = x.size();
    if (y.size() != n || (Z.cols() > 0 && Z.rows() != n))
        throw DimensionMismatch("partial_correlation: vectors differ in length");
    if (n <= Z.cols() + 2)
        throw InsufficientSample("partial_correlation: n=" + std::to_string(n) + " with " +
                                 std::to_string(Z.cols()) + " conditioning variables");

    Eigen::VectorXd rx, ry;
    if (Z.cols() == 0) {
        rx = x.array() - x.mean();
        ry = y.array() - y.mean();
    } else {
        const Eigen::MatrixXd D = detail::with_intercept(Z);
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(D);
        qr.setThreshold(1e-10);
        if (qr.rank() < D.cols())
            throw DegenerateConditioning("conditioning matrix has rank " + std::to_string(qr.rank()) +
                                         " < " + std::to_string(D.cols()));
        Eigen::MatrixXd xy(n, 2);
        xy.col(0) = x;
        xy.col(1) = y;
        const Eigen::MatrixXd resid = xy - D * qr.solve(xy);
        rx = resid.col(0);
        ry = resid.col(1);
    }
    const double sxx = rx.squaredNorm();
    const double syy = ry.squaredNorm();
    const double x_spread = (x.array() - x.mean()).matrix().squaredNorm();
    const double y_spread = (y.array() - y.mean()).matrix().squaredNorm();
    if (sxx <= 1e-20 * x_spread || syy <= 1e-20 * y_spread)
        throw DegenerateConditioning("residual variance vanishes after conditioning");
    return rx.dot(ry) / std::sqrt(sxx * syy);
}

inline double partial_correlation(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                                  std::span<const Eigen::VectorXd> Z) {
    Eigen::MatrixXd M(x.size(), static_cast<Eigen::Index>(Z.size()));
    for (std::size_t c = 0; c < Z.size(); ++c) {
        if (Z[c].size() != x.size()) throw DimensionMismatch("partial_correlation: vectors differ in length");
        M.col(static_cast<Eigen::Index>(c)) = Z[c];
    }
    return partial_correlation(x, y, M);
}

/// Partial correlation of columns a and b given columns z, from a matrix of
/// centered cross-products S = Xc' Xc. Equal to the least-squares residual
/// correlation on [1, Z] up to rounding, at O(k^3) per call.
inline double partial_correlation_from_cross_products(const Eigen::MatrixXd& S, Eigen::Index a, Eigen::Index b,
                                                      std::span<const Eigen::Index> z) {
    const auto k = static_cast<Eigen::Index>(z.size());
    std::vector<Eigen::Index> idx{a, b};
    idx.insert(idx.end(), z.begin(), z.end());
    const auto p = static_cast<Eigen::Index>(idx.size());
    Eigen::MatrixXd R(p, p);
    Eigen::VectorXd scale(p);
    for (Eigen::Index i = 0; i < p; ++i) {
        const double v = S(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(i)]);
        if (!(v > 0.0)) throw DegenerateConditioning("constant column in partial correlation");
        scale[i] = 1.0 / std::sqrt(v);
    }
    for (Eigen::Index i = 0; i < p; ++i)
        for (Eigen::Index j = 0; j < p; ++j)
            R(i, j) = S(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]) * scale[i] * scale[j];
    if (k == 0) return R(0, 1);

    // pivots of the correlation matrix below this mean near-collinear conditioning
    constexpr double kPivotTol = 1e-12;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(R.bottomRightCorner(k, k));
    if (ldlt.info() != Eigen::Success || ldlt.vectorD().minCoeff() < kPivotTol)
        throw DegenerateConditioning("conditioning set is (nearly) collinear");
    const Eigen::MatrixXd cross = R.topRightCorner(2, k);
    const Eigen::Matrix2d resid = R.topLeftCorner(2, 2) - cross * ldlt.solve(cross.transpose());
    if (resid(0, 0) <= kPivotTol || resid(1, 1) <= kPivotTol)
        throw DegenerateConditioning("residual variance vanishes after conditioning");
    return resid(0, 1) / std::sqrt(resid(0, 0) * resid(1, 1));
}

/// Fisher-z significance for a (partial) correlation over n samples with k
/// conditioning variables. r is clamped to [-1+1e-10, 1-1e-10] first.
inline CITestResult fisher_z(double r, int n, int k, double alpha) {
    const int dof = n - k - 3;
    if (dof <= 0)
        throw InsufficientSample("fisher_z: n - k - 3 = " + std::to_string(dof));
    if (std::isnan(r)) throw DegenerateConditioning("fisher_z: correlation is NaN");
    const double rc = std::clamp(r, -1.0 + kCorrelationClamp, 1.0 - kCorrelationClamp);
    CITestResult out;
    out.statistic = std::sqrt(static_cast<double>(dof)) * std::atanh(rc);
    out.p_value = std::clamp(std::erfc(std::abs(out.statistic) / std::sqrt(2.0)), 0.0, 1.0);
    out.effect_size = std::abs(rc);
    out.independent = out.p_value > alpha;
    return out;
}

/// Gaussian-kernel Gram matrix with the median pairwise distance as
/// bandwidth. Rows of X are samples.
inline Eigen::MatrixXd gaussian_gram(const Eigen::MatrixXd& X) {
    const Eigen::Index n = X.rows();
    Eigen::MatrixXd d2(n, n);
    std::vector<double> dists;
    dists.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
    for (Eigen::Index i = 0; i < n; ++i) {
        d2(i, i) = 0.0;
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const double v = (X.row(i) - X.row(j)).squaredNorm();
            d2(i, j) = d2(j, i) = v;
            dists.push_back(v);
        }
    }
    if (dists.empty()) throw DegenerateKernel("kernel needs at least two samples");
    auto mid = dists.begin() + static_cast<std::ptrdiff_t>(dists.size() / 2);
    std::nth_element(dists.begin(), mid, dists.end());
    const double median_sq = *mid;
    if (!(median_sq > 0.0)) throw DegenerateKernel("median pairwise distance is zero (constant input)");
    return (-d2.array() / (2.0 * median_sq)).exp().matrix();
}

/// HKH, the doubly centered Gram matrix.
inline Eigen::MatrixXd centered_gram(const Eigen::MatrixXd& X) {
    Eigen::MatrixXd K = gaussian_gram(X);
    const Eigen::VectorXd row_mean = K.rowwise().mean();
    const double grand = row_mean.mean();
    K = (K.colwise() - row_mean).rowwise() - row_mean.transpose();
    K.array() += grand;
    return K;
}

/// Biased HSIC estimate tr(KHLH) / n^2 between sample matrices (rows = samples).
inline double hsic_statistic(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y) {
    if (X.rows() != Y.rows()) throw DimensionMismatch("hsic: sample counts differ");
    const auto n = static_cast<double>(X.rows());
    return (centered_gram(X).array() * gaussian_gram(Y).array()).sum() / (n * n);
}

/// HSIC independence test with a permutation p-value (permuting y).
inline CITestResult hsic_test(const Eigen::VectorXd& x, const Eigen::VectorXd& y, const TestConfig& cfg) {
    const Eigen::Index n = x.size();
    if (y.size() != n) throw DimensionMismatch("hsic_test: vectors differ in length");
    if (n < 20) throw InsufficientSample("hsic_test needs n >= 20, got " + std::to_string(n));
    if (cfg.hsic_permutations < 1) throw ValidationError("hsic_permutations must be positive");

    const Eigen::MatrixXd K = centered_gram(x);
    const Eigen::MatrixXd L = gaussian_gram(y);
    const double nn = static_cast<double>(n) * static_cast<double>(n);
    const double stat = (K.array() * L.array()).sum() / nn;

    std::mt19937_64 rng(cfg.rng_seed);
    std::vector<Eigen::Index> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), Eigen::Index{0});
    int at_least = 0;
    for (int p = 0; p < cfg.hsic_permutations; ++p) {
        std::shuffle(perm.begin(), perm.end(), rng);
        double s = 0.0;
        for (Eigen::Index j = 0; j < n; ++j) {
            const Eigen::Index pj = perm[static_cast<std::size_t>(j)];
            for (Eigen::Index i = 0; i < n; ++i) s += K(i, j) * L(perm[static_cast<std::size_t>(i)], pj);
        }
        if (s / nn >= stat) ++at_least;
    }
    CITestResult out;
    out.statistic = stat;
    out.p_value = (1.0 + at_least) / (1.0 + cfg.hsic_permutations);
    out.effect_size = std::max(stat, 0.0);
    out.independent = out.p_value > cfg.alpha;
    return out;
}

/// Anything that answers "a independent of b given cond?" over window nodes.
/// Throwing DegenerateConditioning marks the test as non-informative.
template <class T>
concept IndependenceTester = requires(const T& t, NodeRef a, NodeRef b, std::span<const NodeRef> cond) {
    { t.test(a, b, cond) } -> std::convertible_to<CITestResult>;
};

/// Data-backed tester over the aligned lag window of a dataset. Thread-safe.
class CITester {
public:
    CITester(const Dataset& data, TestConfig cfg, int tau_max)
        : cfg_(cfg), tau_max_(tau_max), m_(data.m()), n_(effective_length(data.T(), tau_max)) {
        cfg_.validate();
        if (tau_max < 0) throw ValidationError("tau_max must be >= 0");
        if (n_ < 4) throw InsufficientSample("T=" + std::to_string(data.T()) + " too short for tau_max=" +
                                             std::to_string(tau_max));
        columns_.resize(n_, static_cast<Eigen::Index>(m_) * (tau_max + 1) + 1);
        for (int i = 0; i < m_; ++i)
            for (int lag = 0; lag <= tau_max; ++lag)
                columns_.col(column_of(NodeRef::variable(i, lag))) =
                    lagged_column(data, NodeRef::variable(i, lag), tau_max);
        columns_.col(columns_.cols() - 1) = lagged_column(data, NodeRef::time(), tau_max);
        const Eigen::MatrixXd centered = columns_.rowwise() - columns_.colwise().mean();
        cross_ = centered.transpose() * centered;
    }

    [[nodiscard]] const TestConfig& config() const noexcept { return cfg_; }
    [[nodiscard]] int tau_max() const noexcept { return tau_max_; }
    [[nodiscard]] int sample_size() const noexcept { return n_; }

    [[nodiscard]] Eigen::VectorXd column(NodeRef ref) const { return columns_.col(column_of(ref)); }

    /// Symmetric in (a, b): endpoints are put in NodeRef order before testing.
    [[nodiscard]] CITestResult test(NodeRef a, NodeRef b, std::span<const NodeRef> cond) const {
        if (a == b) throw ValidationError("ci_test: identical endpoints " + to_string(a));
        for (const auto& c : cond)
            if (c == a || c == b) throw ValidationError("ci_test: endpoint " + to_string(c) + " in conditioning set");
        if (b < a) std::swap(a, b);

        CITestResult out;
        if (cond.empty() && cfg_.test_kind == TestKind::Hsic) {
            TestConfig local = cfg_;
            local.rng_seed = derive_seed(cfg_.rng_seed, {node_id(a), node_id(b)});
            out = hsic_test(column(a), column(b), local);
        } else {
            if (n_ <= static_cast<int>(cond.size()) + 2)
                throw InsufficientSample("n=" + std::to_string(n_) + " with " + std::to_string(cond.size()) +
                                         " conditioning variables");
            std::vector<Eigen::Index> z;
            z.reserve(cond.size());
            for (const auto& c : cond) z.push_back(column_of(c));
            const double r = partial_correlation_from_cross_products(cross_, column_of(a), column_of(b), z);
            out = fisher_z(r, n_, static_cast<int>(cond.size()), cfg_.alpha);
        }
        out.cond_set.assign(cond.begin(), cond.end());
        return out;
    }

private:
    [[nodiscard]] Eigen::Index column_of(NodeRef ref) const {
        if (ref.surrogate) return columns_.cols() - 1;
        if (ref.var < 0 || ref.var >= m_) throw AlignmentError("variable " + std::to_string(ref.var) + " out of range");
        if (ref.lag < 0 || ref.lag > tau_max_)
            throw AlignmentError("lag " + std::to_string(ref.lag) + " exceeds tau_max " + std::to_string(tau_max_));
        return static_cast<Eigen::Index>(ref.var) * (tau_max_ + 1) + ref.lag;
    }
    [[nodiscard]] std::uint64_t node_id(NodeRef ref) const {
        return ref.surrogate ? ~std::uint64_t{0} : static_cast<std::uint64_t>(column_of(ref));
    }

    TestConfig cfg_;
    int tau_max_;
    int m_;
    int n_;
    Eigen::MatrixXd columns_;
    Eigen::MatrixXd cross_;
};

static_assert(IndependenceTester<CITester>);

/// One-shot convenience wrapper around CITester.
inline CITestResult ci_test(const Dataset& data, NodeRef a, NodeRef b, std::span<const NodeRef> cond,
                            const TestConfig& cfg, int tau_max) {
    return CITester(data, cfg, tau_max).test(a, b, cond);
}

}  // namespace ecdans
