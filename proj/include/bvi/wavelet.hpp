#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <istream>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

// Multiresolution wavelet analysis/synthesis on a dyadic grid over the unit
// interval (d=1) or unit square (d=2), with periodized orthonormal filter
// banks. Levels are indexed l = -1 (the single scaling coefficient),
// 0, 1, ..., j_max-1 (detail levels); level l holds c0 * 2^(l*d) coefficients
// with c0 = 2^d - 1. Grid samples live at cell centers (i+1/2)/n.

namespace bvi {

enum class WaveletFamily { haar, daubechies4 };

inline const char* family_name(WaveletFamily f) {
    return f == WaveletFamily::haar ? "haar" : "db4";
}

struct MultiresIndex {
    int level;       // -1 for the scaling coefficient
    long translate;  // flat index within the level's index set R_l
};

class WaveletBasis {
public:
    WaveletBasis(int dim, WaveletFamily family, int j_max)
        : dim_(dim), family_(family), j_max_(j_max) {
        if (dim != 1 && dim != 2) throw std::domain_error("WaveletBasis: dim must be 1 or 2");
        if (j_max < 1 || j_max > 24) throw std::domain_error("WaveletBasis: j_max out of range");
        n_ = std::size_t{1} << j_max;
        if (family == WaveletFamily::haar) {
            const double s = 1.0 / std::sqrt(2.0);
            lo_ = {s, s};
        } else {
            // Daubechies 4-vanishing-moment scaling filter (sum = sqrt(2)).
            lo_ = {0.23037781330885523,   0.7148465705525415,  0.6308807679295904,
                   -0.02798376941698385, -0.18703481171888114, 0.030841381835986965,
                   0.032883011666982945, -0.010597401784997278};
        }
        hi_.resize(lo_.size());
        for (std::size_t k = 0; k < lo_.size(); ++k)
            hi_[k] = ((k % 2) ? -1.0 : 1.0) * lo_[lo_.size() - 1 - k];
        offsets_.resize(static_cast<std::size_t>(j_max_) + 1);
        std::size_t off = 0;
        for (int l = -1; l < j_max_; ++l) {
            offsets_[static_cast<std::size_t>(l + 1)] = off;
            off += level_count(l);
        }
        total_ = off;
    }

    int dim() const { return dim_; }
    WaveletFamily family() const { return family_; }
    int j_max() const { return j_max_; }
    /// Declared regularity of the family (vanishing moments).
    int regularity() const { return family_ == WaveletFamily::haar ? 1 : 4; }
    std::size_t grid_size() const { return n_; }          // per axis
    std::size_t grid_points() const { return dim_ == 1 ? n_ : n_ * n_; }
    int max_detail_level() const { return j_max_ - 1; }
    std::size_t level_count(int l) const {
        if (l == -1) return 1;
        std::size_t per_axis = std::size_t{1} << l;
        return dim_ == 1 ? per_axis : 3 * per_axis * per_axis;
    }
    std::size_t level_offset(int l) const { return offsets_[static_cast<std::size_t>(l + 1)]; }
    std::size_t size() const { return total_; }

    std::size_t flat_index(MultiresIndex ix) const {
        check_index(ix);
        return level_offset(ix.level) + static_cast<std::size_t>(ix.translate);
    }
    MultiresIndex multires_index(std::size_t flat) const {
        for (int l = -1; l < j_max_; ++l)
            if (flat < level_offset(l) + level_count(l))
                return {l, static_cast<long>(flat - level_offset(l))};
        throw std::domain_error("WaveletBasis: flat index out of range");
    }

    /// Cell-center coordinate of grid sample i along one axis.
    double coordinate(std::size_t i) const {
        return (static_cast<double>(i) + 0.5) / static_cast<double>(n_);
    }

    bool operator==(const WaveletBasis& o) const {
        return dim_ == o.dim_ && family_ == o.family_ && j_max_ == o.j_max_;
    }

    // Transform kernels (used by analyze/synthesize below).
    void forward_1d(std::vector<double>& w) const {
        std::vector<double> buf(w.size());
        for (std::size_t m = w.size(); m >= 2; m /= 2) forward_stage(w.data(), 1, m, buf);
    }
    void inverse_1d(std::vector<double>& w) const {
        std::vector<double> buf(w.size());
        for (std::size_t m = 2; m <= w.size(); m *= 2) inverse_stage(w.data(), 1, m, buf);
    }
    void forward_2d(std::vector<double>& w) const {
        std::vector<double> buf(n_);
        for (std::size_t m = n_; m >= 2; m /= 2) {
            for (std::size_t row = 0; row < m; ++row) forward_stage(w.data() + row * n_, 1, m, buf);
            for (std::size_t col = 0; col < m; ++col) forward_stage(w.data() + col, n_, m, buf);
        }
    }
    void inverse_2d(std::vector<double>& w) const {
        std::vector<double> buf(n_);
        for (std::size_t m = 2; m <= n_; m *= 2) {
            for (std::size_t col = 0; col < m; ++col) inverse_stage(w.data() + col, n_, m, buf);
            for (std::size_t row = 0; row < m; ++row) inverse_stage(w.data() + row * n_, 1, m, buf);
        }
    }

private:
    void check_index(MultiresIndex ix) const {
        if (ix.level < -1 || ix.level >= j_max_)
            throw std::domain_error("WaveletBasis: level out of range");
        if (ix.translate < 0 || static_cast<std::size_t>(ix.translate) >= level_count(ix.level))
            throw std::domain_error("WaveletBasis: translate out of range");
    }

    // One periodized analysis stage on a strided view of length m:
    // first half <- approximation, second half <- detail.
    void forward_stage(double* w, std::size_t stride, std::size_t m,
                       std::vector<double>& buf) const {
        std::size_t half = m / 2;
        const std::size_t L = lo_.size();
        for (std::size_t i = 0; i < half; ++i) {
            double a = 0.0, d = 0.0;
            for (std::size_t k = 0; k < L; ++k) {
                double v = w[((2 * i + k) % m) * stride];
                a += lo_[k] * v;
                d += hi_[k] * v;
            }
            buf[i] = a;
            buf[half + i] = d;
        }
        for (std::size_t i = 0; i < m; ++i) w[i * stride] = buf[i];
    }

    void inverse_stage(double* w, std::size_t stride, std::size_t m,
                       std::vector<double>& buf) const {
        std::size_t half = m / 2;
        const std::size_t L = lo_.size();
        for (std::size_t i = 0; i < m; ++i) buf[i] = 0.0;
        for (std::size_t i = 0; i < half; ++i) {
            double a = w[i * stride];
            double d = w[(half + i) * stride];
            for (std::size_t k = 0; k < L; ++k)
                buf[(2 * i + k) % m] += lo_[k] * a + hi_[k] * d;
        }
        for (std::size_t i = 0; i < m; ++i) w[i * stride] = buf[i];
    }

    int dim_;
    WaveletFamily family_;
    int j_max_;
    std::size_t n_ = 0;
    std::size_t total_ = 0;
    std::vector<double> lo_, hi_;
    std::vector<std::size_t> offsets_;
};

/// Coefficient tree over a basis, stored flat in level-major order.
struct CoeffTree {
    WaveletBasis basis;
    std::vector<double> values;

    explicit CoeffTree(const WaveletBasis& b) : basis(b), values(b.size(), 0.0) {}

    double& at(MultiresIndex ix) { return values[basis.flat_index(ix)]; }
    double at(MultiresIndex ix) const { return values[basis.flat_index(ix)]; }
    std::size_t size() const { return values.size(); }

    void check_finite() const {
        for (double v : values)
            if (!std::isfinite(v)) throw std::runtime_error("CoeffTree: non-finite coefficient");
    }
};

namespace detail {

// In-place mapping between the Mallat subband layout of the work array and
// the level-major coefficient vector.
inline void gather_coeffs(const WaveletBasis& b, const std::vector<double>& w,
                          std::vector<double>& c) {
    const std::size_t n = b.grid_size();
    if (b.dim() == 1) {
        c[0] = w[0];
        for (int l = 0; l <= b.max_detail_level(); ++l) {
            std::size_t half = std::size_t{1} << l;
            std::size_t off = b.level_offset(l);
            for (std::size_t i = 0; i < half; ++i) c[off + i] = w[half + i];
        }
    } else {
        c[0] = w[0];
        for (int l = 0; l <= b.max_detail_level(); ++l) {
            std::size_t half = std::size_t{1} << l;
            std::size_t off = b.level_offset(l);
            for (std::size_t iy = 0; iy < half; ++iy)
                for (std::size_t ix = 0; ix < half; ++ix) {
                    c[off + 0 * half * half + iy * half + ix] = w[iy * n + (half + ix)];
                    c[off + 1 * half * half + iy * half + ix] = w[(half + iy) * n + ix];
                    c[off + 2 * half * half + iy * half + ix] = w[(half + iy) * n + (half + ix)];
                }
        }
    }
}

inline void scatter_coeffs(const WaveletBasis& b, const std::vector<double>& c,
                           std::vector<double>& w) {
    const std::size_t n = b.grid_size();
    if (b.dim() == 1) {
        w[0] = c[0];
        for (int l = 0; l <= b.max_detail_level(); ++l) {
            std::size_t half = std::size_t{1} << l;
            std::size_t off = b.level_offset(l);
            for (std::size_t i = 0; i < half; ++i) w[half + i] = c[off + i];
        }
    } else {
        w[0] = c[0];
        for (int l = 0; l <= b.max_detail_level(); ++l) {
            std::size_t half = std::size_t{1} << l;
            std::size_t off = b.level_offset(l);
            for (std::size_t iy = 0; iy < half; ++iy)
                for (std::size_t ix = 0; ix < half; ++ix) {
                    w[iy * n + (half + ix)] = c[off + 0 * half * half + iy * half + ix];
                    w[(half + iy) * n + ix] = c[off + 1 * half * half + iy * half + ix];
                    w[(half + iy) * n + (half + ix)] = c[off + 2 * half * half + iy * half + ix];
                }
        }
    }
}

} // namespace detail

/// Expand a grid function into wavelet coefficients. The transform is unitary
/// with respect to the normalized grid inner product <f,g> = (1/n^d) sum f g,
/// so Parseval holds against the grid L2 norm.
inline CoeffTree analyze(std::span<const double> grid, const WaveletBasis& basis) {
    if (grid.size() != basis.grid_points())
        throw std::invalid_argument("analyze: grid size does not match basis");
    std::vector<double> w(grid.begin(), grid.end());
    double scale = std::pow(static_cast<double>(basis.grid_size()),
                            -0.5 * static_cast<double>(basis.dim()));
    for (double& v : w) v *= scale;
    if (basis.dim() == 1) basis.forward_1d(w); else basis.forward_2d(w);
    CoeffTree tree(basis);
    detail::gather_coeffs(basis, w, tree.values);
    return tree;
}

/// Evaluate sum_lr c_lr psi_lr on the basis grid.
inline std::vector<double> synthesize(const CoeffTree& tree) {
    const WaveletBasis& basis = tree.basis;
    std::vector<double> w(basis.grid_points(), 0.0);
    detail::scatter_coeffs(basis, tree.values, w);
    if (basis.dim() == 1) basis.inverse_1d(w); else basis.inverse_2d(w);
    double scale = std::pow(static_cast<double>(basis.grid_size()),
                            0.5 * static_cast<double>(basis.dim()));
    for (double& v : w) v *= scale;
    return w;
}

/// Besov sequence norm (sum_lr 2^{p l (alpha + d/2 - d/p)} |c_lr|^p)^{1/p}.
/// Level -1 carries weight 1 (levels -1 and 0 coincide).
inline double besov_norm(const CoeffTree& tree, double alpha, double p) {
    if (p < 1.0) throw std::domain_error("besov_norm: p must be >= 1");
    if (alpha < 0.0) throw std::domain_error("besov_norm: alpha must be >= 0");
    const WaveletBasis& b = tree.basis;
    const double d = static_cast<double>(b.dim());
    double acc = 0.0;
    for (int l = -1; l <= b.max_detail_level(); ++l) {
        double lw = static_cast<double>(std::max(l, 0));
        double w = std::exp2(p * lw * (alpha + d / 2.0 - d / p));
        std::size_t off = b.level_offset(l), cnt = b.level_count(l);
        double s = 0.0;
        for (std::size_t i = 0; i < cnt; ++i) s += std::pow(std::fabs(tree.values[off + i]), p);
        acc += w * s;
    }
    return std::pow(acc, 1.0 / p);
}

/// Sequence surrogate for the dual Sobolev norm: sqrt(sum 2^{-2 l kappa} c^2).
inline double sobolev_dual_norm(const CoeffTree& tree, double kappa) {
    if (kappa < 0.0) throw std::domain_error("sobolev_dual_norm: kappa must be >= 0");
    const WaveletBasis& b = tree.basis;
    double acc = 0.0;
    for (int l = -1; l <= b.max_detail_level(); ++l) {
        double w = std::exp2(-2.0 * kappa * static_cast<double>(std::max(l, 0)));
        std::size_t off = b.level_offset(l), cnt = b.level_count(l);
        double s = 0.0;
        for (std::size_t i = 0; i < cnt; ++i) s += tree.values[off + i] * tree.values[off + i];
        acc += w * s;
    }
    return std::sqrt(acc);
}

/// Euclidean coefficient norm (= grid L2 norm of the synthesis, by Parseval).
inline double coeff_l2_norm(const CoeffTree& tree) {
    double s = 0.0;
    for (double v : tree.values) s += v * v;
    return std::sqrt(s);
}

/// Zero all coefficients above level J. Idempotent linear contraction.
inline CoeffTree project(const CoeffTree& tree, int J) {
    const WaveletBasis& b = tree.basis;
    if (J < -1 || J > b.j_max()) throw std::domain_error("project: J out of range");
    CoeffTree out = tree;
    for (int l = J + 1; l <= b.max_detail_level(); ++l) {
        std::size_t off = b.level_offset(l), cnt = b.level_count(l);
        for (std::size_t i = 0; i < cnt; ++i) out.values[off + i] = 0.0;
    }
    return out;
}

namespace detail {

inline std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace detail

/// Flat CSV serialization: columns (l, r, value), deterministic level-major order.
inline void write_coeff_csv(const CoeffTree& tree, std::ostream& os) {
    os << "l,r,value\n";
    const WaveletBasis& b = tree.basis;
    for (int l = -1; l <= b.max_detail_level(); ++l) {
        std::size_t off = b.level_offset(l), cnt = b.level_count(l);
        for (std::size_t r = 0; r < cnt; ++r)
            os << l << ',' << r << ',' << detail::fmt17(tree.values[off + r]) << '\n';
    }
}

inline CoeffTree read_coeff_csv(std::istream& is, const WaveletBasis& basis) {
    CoeffTree tree(basis);
    std::string line;
    if (!std::getline(is, line)) throw std::runtime_error("read_coeff_csv: empty input");
    std::size_t count = 0;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        int l = 0;
        long r = 0;
        double v = 0.0;
        if (std::sscanf(line.c_str(), "%d,%ld,%lf", &l, &r, &v) != 3)
            throw std::runtime_error("read_coeff_csv: malformed row: " + line);
        tree.at({l, r}) = v;
        ++count;
    }
    if (count != basis.size()) throw std::runtime_error("read_coeff_csv: row count mismatch");
    return tree;
}

} // namespace bvi
