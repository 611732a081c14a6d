#include "emf/dsp.hpp"

#include "doctest.h"
#include "emf/rng.hpp"
#include "oracles.hpp"

#include <cmath>

using namespace emf;
using namespace emf::dsp;

namespace {

Matrix sinusoid_trial(double freq_hz, double fs, int channels, int n_samples) {
  Matrix samples(channels, n_samples);
  for (int c = 0; c < channels; ++c) {
    for (int t = 0; t < n_samples; ++t) {
      samples(c, t) = std::sin(2.0 * M_PI * freq_hz * t / fs);
    }
  }
  return samples;
}

}  // namespace

TEST_SUITE("dsp") {

TEST_CASE("band catalog") {
  const auto& catalog = band_catalog();
  REQUIRE(catalog.size() == 6);
  CHECK(catalog[0].name == "delta");
  CHECK(catalog[0].lo_hz == 1.0);
  CHECK(catalog[0].hi_hz == 3.0);
  CHECK(catalog[1].name == "theta");
  CHECK(catalog[2].name == "alpha");
  CHECK(catalog[3].name == "beta");
  CHECK(catalog[3].lo_hz == 14.0);
  CHECK(catalog[3].hi_hz == 30.0);
  CHECK(catalog[4].name == "smr");
  CHECK(catalog[4].lo_hz == 13.0);
  CHECK(catalog[4].hi_hz == 15.0);
  CHECK(catalog[5].name == "all");
  CHECK(catalog[5].lo_hz == 1.0);
  CHECK(catalog[5].hi_hz == 30.0);

  // SMR straddles the alpha upper edge and the beta lower edge.
  CHECK(catalog[4].lo_hz <= catalog[2].hi_hz);
  CHECK(catalog[4].hi_hz >= catalog[3].lo_hz);

  for (const WaveBand& b : catalog) {
    CHECK(band_from_token(b.name) == b.id);
    CHECK(to_token(b.id) == b.name);
  }
  CHECK_THROWS_AS(band_from_token("gamma"), Error);
}

TEST_CASE("window framing formula") {
  const WindowParams params{50, 5};
  CHECK(window_count(50, params) == 1);
  CHECK(window_count(55, params) == 2);
  for (int t = 50; t <= 500; ++t) {
    CHECK(window_count(t, params) == (t - 50) / 5 + 1);
  }
  CHECK_THROWS_AS(window_count(49, params), Error);
}

TEST_CASE("pure tone concentrates in its band") {
  // 250-sample windows at fs=250 give 1 Hz bins, so every catalog band
  // contains bins. 10 Hz lies inside alpha only.
  const double fs = 250.0;
  const WindowParams params{250, 5};
  const Matrix samples = sinusoid_trial(10.0, fs, 1, 1000);

  std::vector<WaveBand> bands(band_catalog().begin(), band_catalog().end());
  const auto series = band_power_all(samples, fs, bands, params);
  const int n_windows = window_count(1000, params);
  REQUIRE(series[2].power.cols() == n_windows);

  const auto& alpha = series[2].power;
  for (std::size_t bi : {0u, 1u, 3u, 4u}) {  // delta, theta, beta, smr
    for (int w = 0; w < n_windows; ++w) {
      CHECK(alpha(0, w) >= 10.0 * series[bi].power(0, w));
    }
  }
  CHECK(alpha.minCoeff() > 0.0);
}

TEST_CASE("zero signal has zero power") {
  const Matrix samples = Matrix::Zero(2, 120);
  const auto series = band_power(samples, 250.0, band(BandId::All));
  CHECK(series.power.rows() == 2);
  CHECK(series.power.cols() == window_count(120, {}));
  CHECK(series.power.maxCoeff() == 0.0);
  CHECK(series.power.minCoeff() == 0.0);
}

TEST_CASE("empty band reports an error") {
  // At fs=250 with 50-point windows the bins sit at multiples of 5 Hz,
  // and delta [1, 3] contains none of them.
  const Matrix samples = Matrix::Zero(2, 100);
  CHECK_THROWS_AS(band_power(samples, 250.0, band(BandId::Delta)), Error);
  try {
    band_power(samples, 250.0, band(BandId::Delta));
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::EmptyBand);
  }
  // A longer window resolves it.
  const Matrix longer = Matrix::Zero(2, 300);
  CHECK_NOTHROW(band_power(longer, 250.0, band(BandId::Delta), {250, 5}));
}

TEST_CASE("inclusive band edges") {
  // At fs=100, W=50: bins every 2 Hz. smr [13, 15] must include the 14 Hz
  // bin; beta [14, 30] includes both edges exactly.
  const auto smr_bins = band_bins(band(BandId::Smr), 100.0, 50);
  CHECK(smr_bins == std::vector<int>{7});
  const auto beta_bins = band_bins(band(BandId::Beta), 100.0, 50);
  CHECK(beta_bins.front() == 7);   // 14 Hz
  CHECK(beta_bins.back() == 15);   // 30 Hz
}

TEST_CASE("parseval identity for one window") {
  Rng rng(101);
  for (int w_len : {50, 51, 128}) {
    Vector window(w_len);
    for (int i = 0; i < w_len; ++i) window[i] = rng.normal();

    const Vector spectrum = power_spectrum(window);
    double two_sided = spectrum[0];
    const int half = w_len / 2;
    for (int k = 1; k < half; ++k) two_sided += 2.0 * spectrum[k];
    if (w_len % 2 == 0) two_sided += spectrum[half];
    else two_sided += 2.0 * spectrum[half];

    CHECK(oracle::near(two_sided / w_len, window.squaredNorm(), 1e-9 * w_len));
  }
}

TEST_CASE("dc offset does not move band power") {
  Rng rng(103);
  Matrix samples(2, 200);
  for (int c = 0; c < 2; ++c) {
    for (int t = 0; t < 200; ++t) samples(c, t) = rng.normal();
  }
  const Matrix shifted = samples.array() + 3.7;
  for (const WaveBand& b : band_catalog()) {
    if (b.id == BandId::Delta) continue;  // empty at these params
    const auto base = band_power(samples, 250.0, b);
    const auto offs = band_power(shifted, 250.0, b);
    CHECK((base.power - offs.power).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("differentiation") {
  // Linear ramp in every channel becomes a constant.
  Matrix ramp(2, 10);
  for (int t = 0; t < 10; ++t) {
    ramp(0, t) = 0.25 * t + 3.0;
    ramp(1, t) = -1.5 * t + 0.5;
  }
  const Matrix d = differentiate(ramp);
  REQUIRE(d.cols() == 9);
  for (int t = 0; t < 9; ++t) {
    CHECK(d(0, t) == doctest::Approx(0.25).epsilon(1e-13));
    CHECK(d(1, t) == doctest::Approx(-1.5).epsilon(1e-13));
  }

  CHECK(differentiate(Matrix::Constant(3, 7, 2.5)).cwiseAbs().maxCoeff() == 0.0);

  CHECK_THROWS_AS(differentiate(Matrix::Zero(2, 1)), Error);

  // Linearity on random inputs.
  Rng rng(107);
  for (int trial = 0; trial < 50; ++trial) {
    Matrix x(3, 12), y(3, 12);
    for (int c = 0; c < 3; ++c) {
      for (int t = 0; t < 12; ++t) {
        x(c, t) = rng.normal();
        y(c, t) = rng.normal();
      }
    }
    const double a = rng.uniform(-2.0, 2.0);
    const double b = rng.uniform(-2.0, 2.0);
    const Matrix lhs = differentiate(a * x + b * y);
    const Matrix rhs = a * differentiate(x) + b * differentiate(y);
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-12);
  }
}

}  // TEST_SUITE
