#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace msds {

struct TrajectoryFrame {
  double thumb_x = 0.0, thumb_y = 0.0;
  double index_x = 0.0, index_y = 0.0;
  bool valid = true;
};

/// Per-frame thumb-tip / index-fingertip track from a fixed-rate camera.
struct Trajectory {
  double fps = 30.0;
  std::vector<TrajectoryFrame> frames;
};

enum class TapMethod { peak_count, spectral };

inline std::string to_string(TapMethod m) {
  return m == TapMethod::peak_count ? "peak_count" : "spectral";
}

struct TapReport {
  double frequency_hz = 0.0;
  int num_taps = 0;
  std::vector<double> distance_signal;
  TapMethod method = TapMethod::peak_count;
  std::vector<size_t> peak_indices;
};

/// Per-frame Euclidean distance between the two fingertips. Invalid frames
/// are filled by linear interpolation between the neighboring valid frames;
/// leading/trailing invalid frames copy the nearest valid value. Requires at
/// least two valid frames.
std::vector<double> distance_signal(const Trajectory& traj);

/// Local maxima with topographic prominence >= min_prominence, thinned so no
/// two survivors are closer than min_separation samples (taller peaks win).
std::vector<size_t> find_peaks(const std::vector<double>& signal,
                               double min_prominence, int min_separation);

/// Frequency of the dominant nonzero bin of the mean-removed DFT magnitude.
double dominant_frequency(const std::vector<double>& signal, double fps);

/// Tapping frequency of a distance signal. peak_count counts local maxima
/// with prominence >= 25% of the signal range and >= 0.15 s separation;
/// spectral uses the dominant DFT bin. A constant signal reports 0 Hz.
TapReport tapping_frequency(const std::vector<double>& signal, double fps,
                            TapMethod method = TapMethod::peak_count,
                            double prominence_fraction = 0.25,
                            double min_separation_s = 0.15);

/// Parses CSV with header frame,thumb_x,thumb_y,index_x,index_y,valid.
Trajectory read_trajectory_csv(const std::filesystem::path& path, double fps);

std::string tap_report_csv(const std::vector<TapReport>& reports, double fps);

}  // namespace msds
