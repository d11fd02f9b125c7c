#pragma once

#include <complex>
#include <vector>

namespace turb::fft {

// 2-D DFT of a row-major h-by-w complex array, in place. The inverse
// transform is normalized by 1/(h*w). Thread-safe; plans are cached per
// shape behind a mutex.
void fft2(std::vector<std::complex<double>>& data, int h, int w, bool inverse);

}  // namespace turb::fft
