#pragma once

#include <complex>
#include <span>
#include <vector>

namespace launderscope::detail {

using Complex = std::complex<double>;

/// Unnormalized 2-D DFT of a row-major real plane.
std::vector<Complex> fft2d(std::span<const double> plane, int width, int height);

/// Unnormalized inverse 2-D DFT (no 1/(W*H) factor), in place.
void ifft2d(std::vector<Complex>& data, int width, int height);

}  // namespace launderscope::detail
