#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace utalfa::scenario {

struct Cn0Segment {
  double t_start = 0;
  double t_end = 0;
  double start_dbhz = 0;
  double end_dbhz = 0;
};

/// Piecewise-linear C/N0 profile shared by all satellites.
class Cn0Schedule {
 public:
  Cn0Schedule() = default;

  explicit Cn0Schedule(std::vector<Cn0Segment> segments) : segments_(std::move(segments)) {
    if (segments_.empty()) throw std::invalid_argument("C/N0 schedule: no segments");
    for (std::size_t i = 0; i < segments_.size(); ++i) {
      const auto& s = segments_[i];
      if (!(s.t_end > s.t_start)) throw std::invalid_argument("C/N0 schedule: empty segment");
      if (i > 0 && std::abs(s.t_start - segments_[i - 1].t_end) > 1e-9) {
        throw std::invalid_argument("C/N0 schedule: segments must be contiguous");
      }
    }
  }

  /// Holds `initial` until `ramp_start`, ramps linearly to `target` by
  /// `ramp_end`, then holds `target` until `duration`.
  static Cn0Schedule staged(double initial, double target, double ramp_start, double ramp_end,
                            double duration) {
    std::vector<Cn0Segment> seg;
    if (ramp_start > 0) seg.push_back({0, ramp_start, initial, initial});
    seg.push_back({ramp_start, ramp_end, initial, target});
    if (duration > ramp_end) seg.push_back({ramp_end, duration, target, target});
    return Cn0Schedule(std::move(seg));
  }

  static Cn0Schedule constant(double dbhz, double duration) {
    return Cn0Schedule({{0, duration, dbhz, dbhz}});
  }

  double t_begin() const { return segments_.front().t_start; }
  double t_end() const { return segments_.back().t_end; }
  const std::vector<Cn0Segment>& segments() const { return segments_; }

  double max_dbhz() const {
    double m = -1e9;
    for (const auto& s : segments_) m = std::max({m, s.start_dbhz, s.end_dbhz});
    return m;
  }

 private:
  std::vector<Cn0Segment> segments_;
};

inline double cn0_at(const Cn0Schedule& schedule, double t) {
  const auto& segs = schedule.segments();
  if (segs.empty() || t < schedule.t_begin() - 1e-12 || t > schedule.t_end() + 1e-12) {
    throw std::out_of_range("cn0_at: t outside the schedule");
  }
  for (const auto& s : segs) {
    if (t <= s.t_end + 1e-12) {
      const double x = std::clamp((t - s.t_start) / (s.t_end - s.t_start), 0.0, 1.0);
      return s.start_dbhz + x * (s.end_dbhz - s.start_dbhz);
    }
  }
  return segs.back().end_dbhz;
}

}  // namespace utalfa::scenario
