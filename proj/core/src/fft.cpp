#include "fft.hpp"

#include <map>
#include <mutex>
#include <tuple>

#include <fftw3.h>

namespace launderscope::detail {

namespace {

// Planning is not thread-safe in FFTW; execution of an existing plan on
// fresh arrays is. Plans are built once per shape and never destroyed.
fftw_plan plan_for(int width, int height, int sign) {
  static std::mutex mutex;
  static std::map<std::tuple<int, int, int>, fftw_plan> cache;
  std::lock_guard lock(mutex);
  const auto key = std::make_tuple(width, height, sign);
  if (auto it = cache.find(key); it != cache.end()) return it->second;
  std::vector<Complex> scratch(static_cast<std::size_t>(width) * height);
  auto* buf = reinterpret_cast<fftw_complex*>(scratch.data());
  // FFTW_UNALIGNED keeps the chosen codelets independent of buffer
  // alignment, so results are bit-identical wherever the data lives.
  fftw_plan plan = fftw_plan_dft_2d(height, width, buf, buf, sign,
                                    FFTW_ESTIMATE | FFTW_UNALIGNED);
  cache.emplace(key, plan);
  return plan;
}

}  // namespace

std::vector<Complex> fft2d(std::span<const double> plane, int width,
                           int height) {
  std::vector<Complex> data(plane.begin(), plane.end());
  auto* buf = reinterpret_cast<fftw_complex*>(data.data());
  fftw_execute_dft(plan_for(width, height, FFTW_FORWARD), buf, buf);
  return data;
}

void ifft2d(std::vector<Complex>& data, int width, int height) {
  auto* buf = reinterpret_cast<fftw_complex*>(data.data());
  fftw_execute_dft(plan_for(width, height, FFTW_BACKWARD), buf, buf);
}

}  // namespace launderscope::detail
