#pragma once

#include <complex>
#include <cstddef>
#include <mutex>
#include <vector>

#include <fftw3.h>

#include "homodyne/errors.hpp"

namespace homodyne {

namespace detail {
// FFTW plan creation/destruction is not thread-safe; execution on distinct
// arrays is.
inline std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}
}  // namespace detail

/// Forward real FFT, n real samples -> n/2+1 complex bins (unnormalized).
inline std::vector<std::complex<double>> rfft(const std::vector<double>& in) {
    if (in.empty()) throw DomainError("rfft: empty input");
    const std::size_t n = in.size();
    std::vector<double> buf(in);
    std::vector<std::complex<double>> out(n / 2 + 1);
    fftw_plan plan;
    {
        std::lock_guard<std::mutex> lock(detail::fftw_planner_mutex());
        plan = fftw_plan_dft_r2c_1d(static_cast<int>(n), buf.data(),
                                    reinterpret_cast<fftw_complex*>(out.data()),
                                    FFTW_ESTIMATE);
    }
    fftw_execute(plan);
    {
        std::lock_guard<std::mutex> lock(detail::fftw_planner_mutex());
        fftw_destroy_plan(plan);
    }
    return out;
}

/// Inverse of rfft, normalized so irfft(rfft(x)) == x.
inline std::vector<double> irfft(const std::vector<std::complex<double>>& in,
                                 std::size_t n) {
    if (in.size() != n / 2 + 1) throw DomainError("irfft: bin count mismatch");
    std::vector<std::complex<double>> buf(in);
    std::vector<double> out(n);
    fftw_plan plan;
    {
        std::lock_guard<std::mutex> lock(detail::fftw_planner_mutex());
        plan = fftw_plan_dft_c2r_1d(static_cast<int>(n),
                                    reinterpret_cast<fftw_complex*>(buf.data()),
                                    out.data(), FFTW_ESTIMATE);
    }
    fftw_execute(plan);
    {
        std::lock_guard<std::mutex> lock(detail::fftw_planner_mutex());
        fftw_destroy_plan(plan);
    }
    const double scale = 1.0 / static_cast<double>(n);
    for (double& v : out) v *= scale;
    return out;
}

/// Reusable r2c plan for repeated same-length transforms (Welch segments).
class RfftPlan {
public:
    explicit RfftPlan(std::size_t n) : n_(n), in_(n), out_(n / 2 + 1) {
        std::lock_guard<std::mutex> lock(detail::fftw_planner_mutex());
        plan_ = fftw_plan_dft_r2c_1d(static_cast<int>(n), in_.data(),
                                     reinterpret_cast<fftw_complex*>(out_.data()),
                                     FFTW_ESTIMATE);
    }
    ~RfftPlan() {
        std::lock_guard<std::mutex> lock(detail::fftw_planner_mutex());
        fftw_destroy_plan(plan_);
    }
    RfftPlan(const RfftPlan&) = delete;
    RfftPlan& operator=(const RfftPlan&) = delete;

    std::size_t size() const { return n_; }
    std::size_t bins() const { return n_ / 2 + 1; }
    double* input() { return in_.data(); }

    const std::vector<std::complex<double>>& execute() {
        fftw_execute(plan_);
        return out_;
    }

private:
    std::size_t n_;
    std::vector<double> in_;
    std::vector<std::complex<double>> out_;
    fftw_plan plan_;
};

}  // namespace homodyne
