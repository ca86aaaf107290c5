#pragma once

#include <complex>
#include <vector>

namespace coretherm {

// Forward DFT, unscaled: X_k = sum_t x_t exp(-2 pi i k t / N).
// Radix-2 iterative fast path for power-of-two lengths, recursive
// mixed-radix Cooley-Tukey otherwise (prime factors fall back to a naive
// sub-DFT, so smooth lengths stay O(N log N)).
std::vector<std::complex<double>> dft(const std::vector<double>& x);

}  // namespace coretherm
