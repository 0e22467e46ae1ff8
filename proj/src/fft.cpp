#include "catm/fft.hpp"

#include <fftw3.h>

#include <mutex>

#include "catm/error.hpp"

namespace catm {

namespace {

std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

fftw_plan make_plan(int n, int howmany, int sign) {
    fftw_complex* in = fftw_alloc_complex(static_cast<size_t>(n) * howmany);
    fftw_complex* out = fftw_alloc_complex(static_cast<size_t>(n) * howmany);
    int dims[1] = {n};
    fftw_plan p = fftw_plan_many_dft(1, dims, howmany, in, nullptr, howmany, 1, out, nullptr,
                                     howmany, 1, sign, FFTW_ESTIMATE | FFTW_UNALIGNED);
    fftw_free(in);
    fftw_free(out);
    return p;
}

}  // namespace

StridedFft::StridedFft(int n, int howmany) : n_(n), howmany_(howmany) {
    if (n <= 0 || howmany <= 0) throw Error("fft", "transform length and batch must be positive");
    std::lock_guard<std::mutex> lock(planner_mutex());
    plan_forward_ = make_plan(n, howmany, FFTW_FORWARD);
    plan_backward_ = make_plan(n, howmany, FFTW_BACKWARD);
    if (!plan_forward_ || !plan_backward_) throw Error("fft", "plan creation failed");
}

StridedFft::~StridedFft() {
    std::lock_guard<std::mutex> lock(planner_mutex());
    fftw_destroy_plan(static_cast<fftw_plan>(plan_forward_));
    fftw_destroy_plan(static_cast<fftw_plan>(plan_backward_));
}

void StridedFft::forward(const std::complex<double>* in, std::complex<double>* out) const {
    fftw_execute_dft(static_cast<fftw_plan>(plan_forward_),
                     reinterpret_cast<fftw_complex*>(const_cast<std::complex<double>*>(in)),
                     reinterpret_cast<fftw_complex*>(out));
}

void StridedFft::backward(const std::complex<double>* in, std::complex<double>* out) const {
    fftw_execute_dft(static_cast<fftw_plan>(plan_backward_),
                     reinterpret_cast<fftw_complex*>(const_cast<std::complex<double>*>(in)),
                     reinterpret_cast<fftw_complex*>(out));
}

}  // namespace catm
