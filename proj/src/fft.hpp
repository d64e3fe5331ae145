#pragma once

#include <complex>
#include <cstddef>

namespace ffinet::fftk {

// In-place unnormalized DFT of length n:
//   forward:  X_k = sum_n x_n * exp(-2*pi*i*k*n/N)
//   inverse:  X_k = sum_n x_n * exp(+2*pi*i*k*n/N)   (no 1/N scaling)
// Any n >= 1; power-of-two lengths use iterative radix-2, everything else
// goes through Bluestein's chirp-z transform.
void fft(std::complex<double>* x, long n, bool inverse);

}  // namespace ffinet::fftk
