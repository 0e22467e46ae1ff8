#pragma once

#include <complex>
#include <memory>

namespace catm {

// Batched 1-D complex DFT over `howmany` interleaved sequences of length n.
// Element k of sequence j sits at offset j + k * howmany (stride = howmany, dist = 1).
// forward:  out_m = sum_k in_k exp(-2 pi i m k / n)
// backward: out_m = sum_k in_k exp(+2 pi i m k / n)
// Both are unnormalized. Execution is thread safe; in and out must not alias.
class StridedFft {
public:
    StridedFft(int n, int howmany);
    ~StridedFft();
    StridedFft(const StridedFft&) = delete;
    StridedFft& operator=(const StridedFft&) = delete;

    int length() const { return n_; }
    int batch() const { return howmany_; }

    void forward(const std::complex<double>* in, std::complex<double>* out) const;
    void backward(const std::complex<double>* in, std::complex<double>* out) const;

private:
    int n_;
    int howmany_;
    void* plan_forward_;
    void* plan_backward_;
};

}  // namespace catm
