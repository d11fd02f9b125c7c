#include "turbrec/fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <stdexcept>
#include <tuple>

namespace turb::fft {

namespace {

std::mutex g_plan_mutex;
std::map<std::tuple<int, int, int>, fftw_plan> g_plans;

// FFTW_UNALIGNED lets one cached plan serve any caller buffer via the
// new-array execute interface; FFTW_ESTIMATE keeps planning deterministic.
fftw_plan plan_for(int h, int w, int sign) {
  std::lock_guard<std::mutex> lock(g_plan_mutex);
  auto key = std::make_tuple(h, w, sign);
  auto it = g_plans.find(key);
  if (it != g_plans.end()) return it->second;
  std::vector<std::complex<double>> scratch(static_cast<size_t>(h) * w);
  fftw_plan p = fftw_plan_dft_2d(h, w, reinterpret_cast<fftw_complex*>(scratch.data()),
                                 reinterpret_cast<fftw_complex*>(scratch.data()), sign,
                                 FFTW_ESTIMATE | FFTW_UNALIGNED);
  if (!p) throw std::runtime_error("fftw planning failed");
  g_plans.emplace(key, p);
  return p;
}

}  // namespace

void fft2(std::vector<std::complex<double>>& data, int h, int w, bool inverse) {
  if (h <= 0 || w <= 0 || data.size() != static_cast<size_t>(h) * static_cast<size_t>(w))
    throw std::invalid_argument("fft2 buffer does not match h*w");
  const int sign = inverse ? FFTW_BACKWARD : FFTW_FORWARD;
  fftw_plan p = plan_for(h, w, sign);
  fftw_execute_dft(p, reinterpret_cast<fftw_complex*>(data.data()),
                   reinterpret_cast<fftw_complex*>(data.data()));
  if (inverse) {
    const double scale = 1.0 / (static_cast<double>(h) * static_cast<double>(w));
    for (auto& v : data) v *= scale;
  }
}

}  // namespace turb::fft
