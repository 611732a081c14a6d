#pragma once

#include "emf/types.hpp"

#include <array>
#include <string_view>
#include <vector>

// Moving-window spectral transforms: each channel of a trial is cut into
// fixed-length windows (defaults: 50 samples advancing by 5, i.e. 45
// samples of overlap), every window is Fourier transformed with no taper, and
// the band power is the mean squared magnitude over the DFT bins falling
// inside a wave band. Differentiation of the resulting band-power series is
// the first-difference preprocessing step applied before spatial filtering.
namespace emf::dsp {

enum class BandId { Delta, Theta, Alpha, Beta, Smr, All };

inline constexpr int kBandCount = 6;

struct WaveBand {
  BandId id;
  std::string_view name;
  double lo_hz;
  double hi_hz;
};

// The six bands in fixed catalog order: delta [1,3], theta [4,7],
// alpha [8,13], beta [14,30], smr [13,15], all [1,30].
const std::array<WaveBand, kBandCount>& band_catalog();

const WaveBand& band(BandId id);
std::string_view to_token(BandId id);
BandId band_from_token(std::string_view token);

struct WindowParams {
  int length = 50;
  int step = 5;
};

// floor((T - length)/step) + 1; too-short error when T < length.
int window_count(int n_samples, const WindowParams& params);

// One-sided squared-magnitude spectrum |X_k|^2, k = 0 .. floor(W/2), of a
// single rectangular window.
Vector power_spectrum(VectorRef window_samples);

// DFT bin indices k with lo <= k*fs/W <= hi (edge tolerance 1e-9).
// Empty-band error when no bin falls inside; longer windows give finer bins.
std::vector<int> band_bins(const WaveBand& band, double fs, int window_length);

struct BandPowerSeries {
  BandId band = BandId::All;
  Matrix power;  // channels x windows, nonnegative
};

// samples is channels x time.
BandPowerSeries band_power(MatrixRef samples, double fs, const WaveBand& band,
                           const WindowParams& params = {});

// All requested bands from one pass over the spectrogram.
std::vector<BandPowerSeries> band_power_all(MatrixRef samples, double fs,
                                            const std::vector<WaveBand>& bands,
                                            const WindowParams& params = {});

// First difference along windows: out(c, t) = power(c, t+1) - power(c, t).
// Output has one column fewer and may be negative.
Matrix differentiate(MatrixRef power);

}  // namespace emf::dsp
