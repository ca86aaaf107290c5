#include "coretherm/fft.hpp"

#include <cmath>
#include <cstddef>

namespace coretherm {

namespace {

constexpr double kTwoPi = 6.2831853071795864769252867665590;

using CVec = std::vector<std::complex<double>>;

void fft_radix2(CVec& a) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = -kTwoPi / static_cast<double>(len);
    const std::complex<double> wl(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (std::size_t j = 0; j < len / 2; ++j) {
        const auto u = a[i + j];
        const auto v = a[i + j + len / 2] * w;
        a[i + j] = u + v;
        a[i + j + len / 2] = u - v;
        w *= wl;
      }
    }
  }
}

std::size_t smallest_factor(std::size_t n) {
  if (n % 2 == 0) return 2;
  for (std::size_t f = 3; f * f <= n; f += 2)
    if (n % f == 0) return f;
  return n;
}

CVec fft_general(const CVec& x) {
  const std::size_t n = x.size();
  if (n == 1) return x;
  const std::size_t r = smallest_factor(n);
  if (r == n) {
    // Prime length: naive DFT.
    CVec out(n);
    for (std::size_t k = 0; k < n; ++k) {
      std::complex<double> acc(0.0, 0.0);
      for (std::size_t t = 0; t < n; ++t) {
        const double ang = -kTwoPi * static_cast<double>(k * t % n) /
                           static_cast<double>(n);
        acc += x[t] * std::complex<double>(std::cos(ang), std::sin(ang));
      }
      out[k] = acc;
    }
    return out;
  }
  const std::size_t m = n / r;
  std::vector<CVec> sub(r);
  for (std::size_t s = 0; s < r; ++s) {
    sub[s].resize(m);
    for (std::size_t i = 0; i < m; ++i) sub[s][i] = x[i * r + s];
    sub[s] = fft_general(sub[s]);
  }
  CVec out(n);
  for (std::size_t k = 0; k < n; ++k) {
    std::complex<double> acc(0.0, 0.0);
    for (std::size_t s = 0; s < r; ++s) {
      const double ang = -kTwoPi * static_cast<double>(s) *
                         static_cast<double>(k) / static_cast<double>(n);
      acc += std::complex<double>(std::cos(ang), std::sin(ang)) * sub[s][k % m];
    }
    out[k] = acc;
  }
  return out;
}

}  // namespace

std::vector<std::complex<double>> dft(const std::vector<double>& x) {
  CVec a(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) a[i] = {x[i], 0.0};
  if (!a.empty() && (a.size() & (a.size() - 1)) == 0) {
    fft_radix2(a);
    return a;
  }
  return fft_general(a);
}

}  // namespace coretherm
