#include "tangentkit/spectral.hpp"

#include "tangentkit/errors.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <mutex>
#include <numeric>

namespace tk::spectral {

namespace {

void require_psd(const Spectrum& s, const char* where) {
    if (s.size() == 0) throw DegenerateError(std::string(where) + ": empty spectrum");
    double scale = 0.0;
    for (double v : s.values()) scale = std::max(scale, std::abs(v));
    const double lowest = s.values().back();
    if (lowest < -1e-8 * scale) {
        throw ValidationError(std::string(where) + ": spectrum is not positive semi-definite (min " +
                              std::to_string(lowest) + ")");
    }
}

void check_symmetric(const Matrix& a) {
    if (a.rows() != a.cols()) {
        throw DimensionError("sym_eig: matrix is " + std::to_string(a.rows()) + "x" +
                             std::to_string(a.cols()) + ", expected square");
    }
    if (!a.allFinite()) throw ValidationError("sym_eig: non-finite entries");
    const double scale = a.cwiseAbs().maxCoeff();
    const double asym = (a - a.transpose()).cwiseAbs().maxCoeff();
    if (asym > 1e-10 * scale) {
        throw SymmetryError("sym_eig: matrix asymmetric (max |A - A^T| = " + std::to_string(asym) + ")");
    }
}

// FFTW's planner is not re-entrant.
std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}

}  // namespace

Spectrum::Spectrum(std::vector<double> values) : values_(std::move(values)) {
    for (double v : values_) {
        if (!std::isfinite(v)) throw ValidationError("Spectrum: non-finite eigenvalue");
    }
    if (!std::is_sorted(values_.begin(), values_.end(), std::greater<>())) {
        std::sort(values_.begin(), values_.end(), std::greater<>());
    }
}

Spectrum Spectrum::from_vector(const Vector& values) {
    return Spectrum(std::vector<double>(values.data(), values.data() + values.size()));
}

double Spectrum::trace() const { return std::accumulate(values_.begin(), values_.end(), 0.0); }

std::size_t Spectrum::numerical_rank() const {
    const double cut = kClampRelative * max();
    return static_cast<std::size_t>(
        std::count_if(values_.begin(), values_.end(), [cut](double v) { return v > cut && v > 0.0; }));
}

std::vector<double> Spectrum::clamped() const {
    const double cut = kClampRelative * max();
    std::vector<double> out(values_.size());
    std::transform(values_.begin(), values_.end(), out.begin(),
                   [cut](double v) { return (v > cut && v > 0.0) ? v : 0.0; });
    return out;
}

EigenSystem sym_eig(const Matrix& a) {
    check_symmetric(a);
    const Matrix sym = 0.5 * (a + a.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> solver(sym);
    if (solver.info() != Eigen::Success) throw Error("sym_eig: eigensolver did not converge");

    const Eigen::Index r = a.rows();
    EigenSystem out;
    std::vector<double> values(static_cast<std::size_t>(r));
    out.vectors.resize(r, r);
    // Eigen returns ascending order.
    for (Eigen::Index j = 0; j < r; ++j) {
        values[static_cast<std::size_t>(j)] = solver.eigenvalues()(r - 1 - j);
        out.vectors.col(j) = solver.eigenvectors().col(r - 1 - j);
    }
    out.spectrum = Spectrum(std::move(values));
    return out;
}

Spectrum sym_eigenvalues(const Matrix& a) {
    check_symmetric(a);
    const Matrix sym = 0.5 * (a + a.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> solver(sym, Eigen::EigenvaluesOnly);
    if (solver.info() != Eigen::Success) throw Error("sym_eigenvalues: eigensolver did not converge");
    return Spectrum::from_vector(solver.eigenvalues().reverse());
}

Svd svd(const Matrix& m) {
    if (!m.allFinite()) throw ValidationError("svd: non-finite entries");
    Eigen::BDCSVD<Matrix> solver(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    return Svd{solver.matrixU(), solver.singularValues(), solver.matrixV()};
}

double effective_rank(const Spectrum& s) {
    require_psd(s, "effective_rank");
    const auto mu = s.clamped();
    const double total = std::accumulate(mu.begin(), mu.end(), 0.0);
    if (!(total > 0.0)) throw DegenerateError("effective_rank: all-zero spectrum");
    double entropy = 0.0;
    for (double v : mu) {
        if (v <= 0.0) continue;  // 0 log 0 = 0
        const double p = v / total;
        entropy -= p * std::log(p);
    }
    return std::exp(entropy);
}

std::vector<double> trace_ratios(const Spectrum& s, std::span<const std::size_t> ks) {
    require_psd(s, "trace_ratios");
    const auto lam = s.clamped();
    const double total = std::accumulate(lam.begin(), lam.end(), 0.0);
    if (!(total > 0.0)) throw DegenerateError("trace_ratios: all-zero spectrum");

    std::vector<double> prefix(lam.size() + 1, 0.0);
    std::partial_sum(lam.begin(), lam.end(), prefix.begin() + 1);

    std::vector<double> out;
    out.reserve(ks.size());
    for (std::size_t k : ks) {
        if (k < 1 || k > lam.size()) {
            throw IndexError("trace_ratios: k=" + std::to_string(k) + " outside [1, " +
                             std::to_string(lam.size()) + "]");
        }
        out.push_back(k == lam.size() ? 1.0 : prefix[k] / total);
    }
    return out;
}

KernelMatrix center_kernel(const KernelMatrix& k) {
    // C K C computed as K - row means - column means + grand mean.
    const Matrix& a = k.entries;
    const Vector col_mean = a.colwise().mean().transpose();
    const Vector row_mean = a.rowwise().mean();
    const double grand = a.mean();
    KernelMatrix out{a, k.samples, k.classes};
    out.entries.colwise() -= row_mean;
    out.entries.rowwise() -= col_mean.transpose();
    out.entries.array() += grand;
    return out;
}

double cka(const KernelMatrix& k1, const KernelMatrix& k2) {
    if (k1.entries.rows() != k2.entries.rows() || k1.entries.cols() != k2.entries.cols()) {
        throw DimensionError("cka: kernels have different sizes");
    }
    const Matrix c1 = center_kernel(k1).entries;
    const Matrix c2 = center_kernel(k2).entries;
    const double n1 = c1.norm();
    const double n2 = c2.norm();
    if (n1 == 0.0 || n2 == 0.0) throw DegenerateError("cka: centered kernel is zero");
    // Tr[K_c K'_c] for symmetric matrices is the Frobenius inner product.
    const double v = c1.cwiseProduct(c2).sum() / (n1 * n2);
    return std::clamp(v, 0.0, 1.0);
}

double kernel_alignment(const KernelMatrix& k1, const KernelMatrix& k2) {
    if (k1.entries.rows() != k2.entries.rows() || k1.entries.cols() != k2.entries.cols()) {
        throw DimensionError("kernel_alignment: kernels have different sizes");
    }
    const double n1 = k1.entries.norm();
    const double n2 = k2.entries.norm();
    if (n1 == 0.0 || n2 == 0.0) throw DegenerateError("kernel_alignment: zero kernel");
    return k1.entries.cwiseProduct(k2.entries).sum() / (n1 * n2);
}

KernelMatrix label_kernel(std::span<const int> labels, std::size_t classes) {
    if (classes == 0) throw ValidationError("label_kernel: zero classes");
    const std::size_t n = labels.size();
    Matrix y = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(classes));
    for (std::size_t i = 0; i < n; ++i) {
        const int l = labels[i];
        if (classes == 1) {
            if (l != 1 && l != -1) {
                throw ValidationError("label_kernel: binary label " + std::to_string(l) + " at row " +
                                      std::to_string(i) + " is not +-1");
            }
            y(static_cast<Eigen::Index>(i), 0) = l;
        } else {
            if (l < 0 || static_cast<std::size_t>(l) >= classes) {
                throw ValidationError("label_kernel: class index " + std::to_string(l) + " at row " +
                                      std::to_string(i) + " outside [0, " + std::to_string(classes) + ")");
            }
            y(static_cast<Eigen::Index>(i), l) = 1.0;
        }
    }
    return label_kernel(y);
}

KernelMatrix label_kernel(const Matrix& y) {
    const Eigen::Index n = y.rows();
    const Eigen::Index c = y.cols();
    if (c > 1) {
        for (Eigen::Index i = 0; i < n; ++i) {
            const auto row = y.row(i);
            const bool binary = ((row.array() == 0.0) || (row.array() == 1.0)).all();
            if (!binary || row.sum() != 1.0) {
                throw ValidationError("label_kernel: row " + std::to_string(i) + " is not one-hot");
            }
        }
    }
    // Sample-major concatenation: entry (i, y) lands at i*c + y.
    Vector flat(n * c);
    for (Eigen::Index i = 0; i < n; ++i) flat.segment(i * c, c) = y.row(i).transpose();
    return KernelMatrix{flat * flat.transpose(), static_cast<std::size_t>(n), static_cast<std::size_t>(c)};
}

Vector dft_magnitudes(const Vector& v) {
    const int n = static_cast<int>(v.size());
    if (n < 2) throw DimensionError("dft_magnitudes: need at least 2 samples");
    const int bins = n / 2 + 1;

    std::vector<double> in(v.data(), v.data() + n);
    auto* out = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * static_cast<std::size_t>(bins)));
    fftw_plan plan;
    {
        std::lock_guard lock(fftw_planner_mutex());
        plan = fftw_plan_dft_r2c_1d(n, in.data(), out, FFTW_ESTIMATE);
    }
    fftw_execute(plan);
    Vector mags(bins);
    for (int k = 0; k < bins; ++k) mags(k) = std::hypot(out[k][0], out[k][1]);
    {
        std::lock_guard lock(fftw_planner_mutex());
        fftw_destroy_plan(plan);
    }
    fftw_free(out);
    return mags;
}

std::size_t dominant_frequency(const Vector& v) {
    const Vector mags = dft_magnitudes(v);
    Eigen::Index best = 0;
    mags.maxCoeff(&best);
    return static_cast<std::size_t>(best);
}

}  // namespace tk::spectral
