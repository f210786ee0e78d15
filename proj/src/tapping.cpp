#include "msds/tapping.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace msds {

std::vector<double> distance_signal(const Trajectory& traj) {
  if (traj.fps <= 0.0) {
    throw std::invalid_argument("distance_signal: fps must be positive");
  }
  const size_t n = traj.frames.size();
  std::vector<double> out(n, 0.0);
  std::vector<bool> known(n, false);
  size_t num_valid = 0;
  for (size_t i = 0; i < n; ++i) {
    const TrajectoryFrame& f = traj.frames[i];
    if (!f.valid) continue;
    const double dx = f.thumb_x - f.index_x;
    const double dy = f.thumb_y - f.index_y;
    out[i] = std::sqrt(dx * dx + dy * dy);
    known[i] = true;
    ++num_valid;
  }
  if (num_valid < 2) {
    throw std::invalid_argument("distance_signal: fewer than 2 valid frames");
  }

  // Linear gap fill; boundary gaps copy the nearest valid value.
  size_t prev = n;
  for (size_t i = 0; i < n; ++i) {
    if (!known[i]) continue;
    if (prev == n) {
      for (size_t j = 0; j < i; ++j) out[j] = out[i];
    } else if (i > prev + 1) {
      const double step = (out[i] - out[prev]) / static_cast<double>(i - prev);
      for (size_t j = prev + 1; j < i; ++j) {
        out[j] = out[prev] + step * static_cast<double>(j - prev);
      }
    }
    prev = i;
  }
  for (size_t j = prev + 1; j < n; ++j) out[j] = out[prev];
  return out;
}

namespace {

struct Candidate {
  size_t index;
  double height;
  double prominence;
};

std::vector<Candidate> local_maxima(const std::vector<double>& s) {
  std::vector<Candidate> out;
  const size_t n = s.size();
  size_t i = 1;
  while (i + 1 < n) {
    if (s[i] > s[i - 1]) {
      size_t j = i;
      while (j + 1 < n && s[j + 1] == s[i]) ++j;  // plateau
      if (j + 1 < n && s[j + 1] < s[i]) {
        out.push_back({(i + j) / 2, s[i], 0.0});
      }
      i = j + 1;
    } else {
      ++i;
    }
  }
  return out;
}

double side_base(const std::vector<double>& s, size_t peak, int direction) {
  // Minimum between the peak and the next sample higher than it (or the end).
  double base = s[peak];
  std::ptrdiff_t i = static_cast<std::ptrdiff_t>(peak) + direction;
  while (i >= 0 && i < static_cast<std::ptrdiff_t>(s.size()) &&
         s[static_cast<size_t>(i)] <= s[peak]) {
    base = std::min(base, s[static_cast<size_t>(i)]);
    i += direction;
  }
  return base;
}

}  // namespace

std::vector<size_t> find_peaks(const std::vector<double>& signal,
                               double min_prominence, int min_separation) {
  std::vector<Candidate> cands = local_maxima(signal);
  std::vector<Candidate> kept;
  for (auto& c : cands) {
    const double left = side_base(signal, c.index, -1);
    const double right = side_base(signal, c.index, +1);
    c.prominence = c.height - std::max(left, right);
    if (c.prominence >= min_prominence) kept.push_back(c);
  }
  // Tallest-first suppression within min_separation.
  std::stable_sort(kept.begin(), kept.end(), [](const Candidate& a, const Candidate& b) {
    if (a.height != b.height) return a.height > b.height;
    return a.index < b.index;
  });
  std::vector<size_t> accepted;
  for (const auto& c : kept) {
    bool ok = true;
    for (size_t a : accepted) {
      const std::ptrdiff_t d = static_cast<std::ptrdiff_t>(c.index) - static_cast<std::ptrdiff_t>(a);
      if (std::abs(d) < min_separation) {
        ok = false;
        break;
      }
    }
    if (ok) accepted.push_back(c.index);
  }
  std::sort(accepted.begin(), accepted.end());
  return accepted;
}

double dominant_frequency(const std::vector<double>& signal, double fps) {
  const size_t n = signal.size();
  if (n < 2) return 0.0;
  double mean = 0.0;
  for (double v : signal) mean += v;
  mean /= static_cast<double>(n);

  double best_mag = 0.0;
  size_t best_bin = 0;
  for (size_t bin = 1; bin <= n / 2; ++bin) {
    double re = 0.0, im = 0.0;
    const double w = 2.0 * M_PI * static_cast<double>(bin) / static_cast<double>(n);
    for (size_t i = 0; i < n; ++i) {
      const double v = signal[i] - mean;
      re += v * std::cos(w * static_cast<double>(i));
      im -= v * std::sin(w * static_cast<double>(i));
    }
    const double mag = re * re + im * im;
    if (mag > best_mag) {
      best_mag = mag;
      best_bin = bin;
    }
  }
  if (best_bin == 0 || best_mag <= 0.0) return 0.0;
  return static_cast<double>(best_bin) * fps / static_cast<double>(n);
}

TapReport tapping_frequency(const std::vector<double>& signal, double fps,
                            TapMethod method, double prominence_fraction,
                            double min_separation_s) {
  if (fps <= 0.0) throw std::invalid_argument("tapping_frequency: fps must be positive");
  if (static_cast<double>(signal.size()) < fps) {
    throw std::invalid_argument("tapping_frequency: need at least 1 second of signal");
  }
  TapReport report;
  report.method = method;
  report.distance_signal = signal;

  const auto [mn, mx] = std::minmax_element(signal.begin(), signal.end());
  const double range = *mx - *mn;
  if (range > 0.0) {
    const int min_sep = std::max(1, static_cast<int>(std::ceil(min_separation_s * fps)));
    report.peak_indices = find_peaks(signal, prominence_fraction * range, min_sep);
  }
  report.num_taps = static_cast<int>(report.peak_indices.size());

  const double duration = static_cast<double>(signal.size()) / fps;
  if (method == TapMethod::peak_count) {
    report.frequency_hz = static_cast<double>(report.num_taps) / duration;
  } else {
    report.frequency_hz = range > 0.0 ? dominant_frequency(signal, fps) : 0.0;
  }
  return report;
}

Trajectory read_trajectory_csv(const std::filesystem::path& path, double fps) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open trajectory CSV: " + path.string());
  Trajectory traj;
  traj.fps = fps;
  std::string line;
  size_t line_no = 0;
  bool saw_header = false;
  while (std::getline(f, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (!saw_header) {
      if (line.find("thumb_x") == std::string::npos) {
        throw std::runtime_error(path.string() +
                                 ": missing header frame,thumb_x,thumb_y,index_x,index_y,valid");
      }
      saw_header = true;
      continue;
    }
    std::istringstream ss(line);
    std::string field;
    double vals[5];
    long frame_idx = 0;
    bool ok = true;
    for (int i = 0; i < 6 && ok; ++i) {
      if (!std::getline(ss, field, ',')) {
        ok = false;
        break;
      }
      try {
        if (i == 0) {
          frame_idx = std::stol(field);
          (void)frame_idx;
        } else {
          vals[i - 1] = std::stod(field);
        }
      } catch (const std::exception&) {
        ok = false;
      }
    }
    if (!ok) {
      throw std::runtime_error(path.string() + ": malformed CSV row " +
                               std::to_string(line_no));
    }
    TrajectoryFrame fr;
    fr.thumb_x = vals[0];
    fr.thumb_y = vals[1];
    fr.index_x = vals[2];
    fr.index_y = vals[3];
    fr.valid = vals[4] != 0.0;
    traj.frames.push_back(fr);
  }
  if (!saw_header) {
    throw std::runtime_error(path.string() + ": empty trajectory CSV");
  }
  return traj;
}

std::string tap_report_csv(const std::vector<TapReport>& reports, double fps) {
  std::string out = "method,frequency_hz,num_taps,duration_s\n";
  char buf[160];
  for (const auto& r : reports) {
    const double duration = static_cast<double>(r.distance_signal.size()) / fps;
    std::snprintf(buf, sizeof(buf), "%s,%.6g,%d,%.6g\n", to_string(r.method).c_str(),
                  r.frequency_hz, r.num_taps, duration);
    out += buf;
  }
  return out;
}

}  // namespace msds
