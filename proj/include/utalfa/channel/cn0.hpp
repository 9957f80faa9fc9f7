#pragma once

#include <cmath>
#include <cstddef>
#include <deque>
#include <optional>

namespace utalfa::channel {

/// Coherent sums of M consecutive prompts that lie inside one data bit.
struct PromptBlock {
  double nbp = 0;  // narrowband power (sum I)^2 + (sum Q)^2
  double wbp = 0;  // wideband power sum(I^2 + Q^2)
  double nbd = 0;  // (sum I)^2 - (sum Q)^2

  double pli() const { return nbp > 0 ? nbd / nbp : 0.0; }
};

/// Narrowband/wideband power-ratio C/N0 estimator over bit-aligned blocks of
/// M prompts, smoothed over a sliding window of whole blocks.
class Cn0Estimator {
 public:
  Cn0Estimator(double t_prompt = 1e-3, int m = 20, std::size_t window_blocks = 50)
      : T_(t_prompt), M_(m), window_(window_blocks) {}

  /// Feeds one prompt. `bit_start` marks the first prompt of a data bit; a
  /// partial block is discarded there. Returns true when a block completes.
  bool push(double ip, double qp, bool bit_start) {
    if (bit_start) reset_block();
    si_ += ip;
    sq_ += qp;
    sw_ += ip * ip + qp * qp;
    if (++n_ < M_) return false;
    PromptBlock b{si_ * si_ + sq_ * sq_, sw_, si_ * si_ - sq_ * sq_};
    blocks_.push_back(b);
    if (blocks_.size() > window_) blocks_.pop_front();
    reset_block();
    return true;
  }

  std::size_t blocks() const { return blocks_.size(); }
  const std::deque<PromptBlock>& history() const { return blocks_; }

  /// dB-Hz, or nullopt before the first complete block. Values at or below
  /// the noise floor are reported as `floor_dbhz`.
  std::optional<double> estimate(double floor_dbhz = 0.0) const {
    if (blocks_.empty()) return std::nullopt;
    double nbp = 0, wbp = 0;
    for (const auto& b : blocks_) {
      nbp += b.nbp;
      wbp += b.wbp;
    }
    if (!(wbp > 0)) return floor_dbhz;
    const double mu = nbp / wbp;
    const double m = static_cast<double>(M_);
    if (mu <= 1.0) return floor_dbhz;
    if (mu >= m) return 99.0;
    const double v = 10.0 * std::log10((mu - 1.0) / (T_ * (m - mu)));
    return v > floor_dbhz ? v : floor_dbhz;
  }

  /// Mean phase-lock indicator over the most recent `n` blocks.
  std::optional<double> mean_pli(std::size_t n) const {
    if (blocks_.size() < n || n == 0) return std::nullopt;
    double s = 0;
    for (std::size_t k = blocks_.size() - n; k < blocks_.size(); ++k) s += blocks_[k].pli();
    return s / static_cast<double>(n);
  }

  int block_length() const { return M_; }

 private:
  void reset_block() {
    si_ = sq_ = sw_ = 0;
    n_ = 0;
  }

  double T_;
  int M_;
  std::size_t window_;
  std::deque<PromptBlock> blocks_;
  double si_ = 0, sq_ = 0, sw_ = 0;
  int n_ = 0;
};

/// Batch form over a prompt history that starts on a bit boundary.
template <class Prompts>
std::optional<double> estimate_cn0(const Prompts& prompts, double t_prompt = 1e-3, int m = 20) {
  Cn0Estimator est(t_prompt, m, static_cast<std::size_t>(-1));
  for (std::size_t k = 0; k < prompts.size(); ++k) {
    est.push(prompts[k].real(), prompts[k].imag(), k % static_cast<std::size_t>(m) == 0);
  }
  return est.estimate();
}

}  // namespace utalfa::channel
