#include "fft.hpp"

#include <cmath>
#include <unordered_map>
#include <vector>

namespace ffinet::fftk {

namespace {

using cd = std::complex<double>;

bool is_pow2(long n) { return n > 0 && (n & (n - 1)) == 0; }

long next_pow2(long n) {
  long p = 1;
  while (p < n) p <<= 1;
  return p;
}

// Forward twiddles for a power-of-two length: w[k] = exp(-2*pi*i*k/n), k < n/2.
const std::vector<cd>& pow2_twiddles(long n) {
  thread_local std::unordered_map<long, std::vector<cd>> cache;
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  std::vector<cd> tw(static_cast<size_t>(n / 2));
  for (long k = 0; k < n / 2; ++k) {
    double a = -2.0 * M_PI * static_cast<double>(k) / static_cast<double>(n);
    tw[static_cast<size_t>(k)] = cd(std::cos(a), std::sin(a));
  }
  return cache.emplace(n, std::move(tw)).first->second;
}

void fft_pow2(cd* x, long n, bool inverse) {
  if (n <= 1) return;
  // bit-reversal permutation
  for (long i = 1, j = 0; i < n; ++i) {
    long bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(x[i], x[j]);
  }
  const auto& tw = pow2_twiddles(n);
  for (long len = 2; len <= n; len <<= 1) {
    long step = n / len;
    for (long i = 0; i < n; i += len) {
      for (long k = 0; k < len / 2; ++k) {
        cd w = tw[static_cast<size_t>(k * step)];
        if (inverse) w = std::conj(w);
        cd u = x[i + k];
        cd v = x[i + k + len / 2] * w;
        x[i + k] = u + v;
        x[i + k + len / 2] = u - v;
      }
    }
  }
}

struct BluesteinPlan {
  long n = 0;
  long m = 0;                // pow2 convolution length >= 2n-1
  std::vector<cd> chirp;     // w[k] = exp(-i*pi*k^2/n), k < n
  std::vector<cd> bhat;      // FFT of the zero-padded conjugate chirp kernel
};

const BluesteinPlan& bluestein_plan(long n) {
  thread_local std::unordered_map<long, BluesteinPlan> cache;
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  BluesteinPlan plan;
  plan.n = n;
  plan.m = next_pow2(2 * n - 1);
  plan.chirp.resize(static_cast<size_t>(n));
  for (long k = 0; k < n; ++k) {
    // k^2 mod 2n keeps the trig argument small; exp(-i*pi*k^2/n) has period 2n in k^2
    long e = static_cast<long>((static_cast<long long>(k) * k) % (2 * n));
    double a = -M_PI * static_cast<double>(e) / static_cast<double>(n);
    plan.chirp[static_cast<size_t>(k)] = cd(std::cos(a), std::sin(a));
  }
  std::vector<cd> b(static_cast<size_t>(plan.m), cd(0.0, 0.0));
  b[0] = std::conj(plan.chirp[0]);
  for (long k = 1; k < n; ++k) {
    cd v = std::conj(plan.chirp[static_cast<size_t>(k)]);
    b[static_cast<size_t>(k)] = v;
    b[static_cast<size_t>(plan.m - k)] = v;
  }
  fft_pow2(b.data(), plan.m, false);
  plan.bhat = std::move(b);
  return cache.emplace(n, std::move(plan)).first->second;
}

void fft_bluestein(cd* x, long n) {
  const BluesteinPlan& plan = bluestein_plan(n);
  std::vector<cd> a(static_cast<size_t>(plan.m), cd(0.0, 0.0));
  for (long k = 0; k < n; ++k) a[static_cast<size_t>(k)] = x[k] * plan.chirp[static_cast<size_t>(k)];
  fft_pow2(a.data(), plan.m, false);
  for (long k = 0; k < plan.m; ++k) a[static_cast<size_t>(k)] *= plan.bhat[static_cast<size_t>(k)];
  fft_pow2(a.data(), plan.m, true);
  double inv_m = 1.0 / static_cast<double>(plan.m);
  for (long k = 0; k < n; ++k) x[k] = a[static_cast<size_t>(k)] * inv_m * plan.chirp[static_cast<size_t>(k)];
}

}  // namespace

void fft(cd* x, long n, bool inverse) {
  if (n <= 1) return;
  if (is_pow2(n)) {
    fft_pow2(x, n, inverse);
    return;
  }
  if (inverse) {
    // unnormalized inverse via conjugation: ifft(x) = conj(fft(conj(x)))
    for (long i = 0; i < n; ++i) x[i] = std::conj(x[i]);
    fft_bluestein(x, n);
    for (long i = 0; i < n; ++i) x[i] = std::conj(x[i]);
  } else {
    fft_bluestein(x, n);
  }
}

}  // namespace ffinet::fftk
