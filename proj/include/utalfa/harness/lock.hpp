#pragma once

#include <limits>
#include <optional>

#include "utalfa/harness/config.hpp"

namespace utalfa::harness {

/// Declares lock when C/N0 exceeds its threshold and the mean phase-lock
/// indicator over the window exceeds its threshold. The state changes at most
/// once per `min_interval`; without a full window the previous state holds.
class LockDetector {
 public:
  explicit LockDetector(LockConfig cfg = {}, bool initially_locked = true)
      : cfg_(cfg), locked_(initially_locked) {}

  bool update(std::optional<double> cn0_dbhz, std::optional<double> mean_pli, double t) {
    if (!cn0_dbhz) return locked_;
    // Without a full PLI window only the C/N0 test can drop lock.
    const bool want = *cn0_dbhz > cfg_.cn0_threshold && (mean_pli ? *mean_pli > cfg_.pli_threshold : locked_);
    if (want != locked_ && t - last_change_ >= cfg_.min_interval) {
      locked_ = want;
      last_change_ = t;
      ++changes_;
    }
    return locked_;
  }

  bool locked() const { return locked_; }
  int changes() const { return changes_; }
  double last_change() const { return last_change_; }

 private:
  LockConfig cfg_;
  bool locked_;
  double last_change_ = -std::numeric_limits<double>::infinity();
  int changes_ = 0;
};

}  // namespace utalfa::harness
