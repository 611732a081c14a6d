#include "emf/dsp.hpp"

#include <cmath>
#include <string>

namespace emf::dsp {

namespace {

constexpr double kEdgeTol = 1e-9;

// Real/imag DFT basis restricted to the requested bins; column k of each
// matrix holds cos/sin(2*pi*bin_k*n/W) over sample index n.
struct DftBasis {
  Matrix cos_part;  // W x bins
  Matrix sin_part;
};

DftBasis make_basis(int window_length, const std::vector<int>& bins) {
  DftBasis basis;
  basis.cos_part.resize(window_length, static_cast<Eigen::Index>(bins.size()));
  basis.sin_part.resize(window_length, static_cast<Eigen::Index>(bins.size()));
  for (std::size_t j = 0; j < bins.size(); ++j) {
    const double omega = 2.0 * M_PI * bins[j] / window_length;
    for (int n = 0; n < window_length; ++n) {
      basis.cos_part(n, static_cast<Eigen::Index>(j)) = std::cos(omega * n);
      basis.sin_part(n, static_cast<Eigen::Index>(j)) = std::sin(omega * n);
    }
  }
  return basis;
}

// windows x W matrix of overlapping segments of one channel.
Matrix gather_segments(VectorRef channel, const WindowParams& params,
                       int n_windows) {
  Matrix segments(n_windows, params.length);
  for (int w = 0; w < n_windows; ++w) {
    segments.row(w) = channel.segment(w * params.step, params.length);
  }
  return segments;
}

// windows x bins squared magnitudes for one channel.
Matrix channel_bin_power(const Matrix& segments, const DftBasis& basis) {
  const Matrix re = segments * basis.cos_part;
  const Matrix im = segments * basis.sin_part;
  return re.array().square() + im.array().square();
}

void validate_params(const WindowParams& params) {
  if (params.length < 2 || params.step < 1) {
    raise(ErrorCode::InvalidValue,
          "window params need length >= 2 and step >= 1");
  }
}

}  // namespace

const std::array<WaveBand, kBandCount>& band_catalog() {
  static const std::array<WaveBand, kBandCount> catalog = {{
      {BandId::Delta, "delta", 1.0, 3.0},
      {BandId::Theta, "theta", 4.0, 7.0},
      {BandId::Alpha, "alpha", 8.0, 13.0},
      {BandId::Beta, "beta", 14.0, 30.0},
      {BandId::Smr, "smr", 13.0, 15.0},
      {BandId::All, "all", 1.0, 30.0},
  }};
  return catalog;
}

const WaveBand& band(BandId id) {
  return band_catalog()[static_cast<std::size_t>(id)];
}

std::string_view to_token(BandId id) { return band(id).name; }

BandId band_from_token(std::string_view token) {
  for (const WaveBand& b : band_catalog()) {
    if (b.name == token) return b.id;
  }
  raise(ErrorCode::InvalidValue,
        "unknown wave band token '" + std::string(token) + "'");
}

int window_count(int n_samples, const WindowParams& params) {
  validate_params(params);
  if (n_samples < params.length) {
    raise(ErrorCode::TooShort,
          "trial of " + std::to_string(n_samples) +
              " samples is shorter than the window length " +
              std::to_string(params.length));
  }
  return (n_samples - params.length) / params.step + 1;
}

Vector power_spectrum(VectorRef window_samples) {
  const int w = static_cast<int>(window_samples.size());
  if (w < 2) raise(ErrorCode::TooShort, "window needs at least 2 samples");
  std::vector<int> bins(static_cast<std::size_t>(w / 2) + 1);
  for (std::size_t k = 0; k < bins.size(); ++k) bins[k] = static_cast<int>(k);
  const DftBasis basis = make_basis(w, bins);
  Matrix segment(1, w);
  segment.row(0) = window_samples;
  return channel_bin_power(segment, basis).row(0);
}

std::vector<int> band_bins(const WaveBand& wave_band, double fs,
                           int window_length) {
  if (fs <= 0.0) raise(ErrorCode::InvalidValue, "sampling rate must be positive");
  std::vector<int> bins;
  for (int k = 0; k <= window_length / 2; ++k) {
    const double freq = k * fs / window_length;
    if (freq >= wave_band.lo_hz - kEdgeTol && freq <= wave_band.hi_hz + kEdgeTol) {
      bins.push_back(k);
    }
  }
  if (bins.empty()) {
    raise(ErrorCode::EmptyBand,
          "no DFT bin falls inside band '" + std::string(wave_band.name) +
              "' [" + std::to_string(wave_band.lo_hz) + ", " +
              std::to_string(wave_band.hi_hz) + "] Hz at fs=" +
              std::to_string(fs) + " with window " +
              std::to_string(window_length) +
              "; increase the window length for finer bins");
  }
  return bins;
}

BandPowerSeries band_power(MatrixRef samples, double fs, const WaveBand& wave_band,
                           const WindowParams& params) {
  std::vector<WaveBand> one{wave_band};
  return std::move(band_power_all(samples, fs, one, params).front());
}

std::vector<BandPowerSeries> band_power_all(MatrixRef samples, double fs,
                                            const std::vector<WaveBand>& bands,
                                            const WindowParams& params) {
  validate_params(params);
  const int channels = static_cast<int>(samples.rows());
  const int n_samples = static_cast<int>(samples.cols());
  if (channels < 1) raise(ErrorCode::InvalidValue, "need at least one channel");
  const int n_windows = window_count(n_samples, params);

  // Union of the bands' bins, computed once; each band then averages its own
  // column subset.
  std::vector<std::vector<int>> per_band_bins;
  per_band_bins.reserve(bands.size());
  std::vector<int> union_bins;
  for (const WaveBand& b : bands) {
    per_band_bins.push_back(band_bins(b, fs, params.length));
    for (int k : per_band_bins.back()) union_bins.push_back(k);
  }
  std::sort(union_bins.begin(), union_bins.end());
  union_bins.erase(std::unique(union_bins.begin(), union_bins.end()),
                   union_bins.end());
  std::vector<int> bin_column(static_cast<std::size_t>(params.length / 2) + 1, -1);
  for (std::size_t j = 0; j < union_bins.size(); ++j) {
    bin_column[static_cast<std::size_t>(union_bins[j])] = static_cast<int>(j);
  }

  const DftBasis basis = make_basis(params.length, union_bins);

  std::vector<BandPowerSeries> out(bands.size());
  for (std::size_t bi = 0; bi < bands.size(); ++bi) {
    out[bi].band = bands[bi].id;
    out[bi].power.resize(channels, n_windows);
  }

  for (int c = 0; c < channels; ++c) {
    const Matrix segments = gather_segments(samples.row(c), params, n_windows);
    const Matrix bin_power = channel_bin_power(segments, basis);
    for (std::size_t bi = 0; bi < bands.size(); ++bi) {
      const auto& bins = per_band_bins[bi];
      for (int w = 0; w < n_windows; ++w) {
        double acc = 0.0;
        for (int k : bins) acc += bin_power(w, bin_column[static_cast<std::size_t>(k)]);
        out[bi].power(c, w) = acc / static_cast<double>(bins.size());
      }
    }
  }
  return out;
}

Matrix differentiate(MatrixRef power) {
  const Eigen::Index windows = power.cols();
  if (windows < 2) {
    raise(ErrorCode::TooShort,
          "differentiation needs at least 2 windows, got " +
              std::to_string(windows));
  }
  return power.rightCols(windows - 1) - power.leftCols(windows - 1);
}

}  // namespace emf::dsp
