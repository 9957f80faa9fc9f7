#include <gtest/gtest.h>

#include <bitset>
#include <numeric>

#include "utalfa/channel/cn0.hpp"
#include "utalfa/channel/correlator.hpp"
#include "utalfa/signal/prn.hpp"
#include "utalfa/signal/synth.hpp"
#include "utalfa/signal/truth.hpp"

using namespace utalfa;
using namespace utalfa::signal;

namespace {

// Phase-selector form of the generator: G2 output is the XOR of two G2
// stages instead of a delayed copy of stage 10.
std::array<int, 1023> tap_pair_code(int prn) {
  static const int taps[32][2] = {{2, 6}, {3, 7}, {4, 8}, {5, 9}, {1, 9}, {2, 10}, {1, 8}, {2, 9},
                                  {3, 10}, {2, 3}, {3, 4}, {5, 6}, {6, 7}, {7, 8}, {8, 9}, {9, 10},
                                  {1, 4}, {2, 5}, {3, 6}, {4, 7}, {5, 8}, {6, 9}, {1, 3}, {4, 6},
                                  {5, 7}, {6, 8}, {7, 9}, {8, 10}, {1, 6}, {2, 7}, {3, 8}, {4, 9}};
  int g1[11], g2[11];
  for (int i = 1; i <= 10; ++i) g1[i] = g2[i] = 1;
  std::array<int, 1023> out{};
  for (int k = 0; k < 1023; ++k) {
    const int b = g1[10] ^ g2[taps[prn - 1][0]] ^ g2[taps[prn - 1][1]];
    out[k] = b;
    const int f1 = g1[3] ^ g1[10];
    const int f2 = g2[2] ^ g2[3] ^ g2[6] ^ g2[8] ^ g2[9] ^ g2[10];
    for (int i = 10; i > 1; --i) {
      g1[i] = g1[i - 1];
      g2[i] = g2[i - 1];
    }
    g1[1] = f1;
    g2[1] = f2;
  }
  return out;
}

// First ten chips of each PRN in octal, logic levels, first chip is the MSB.
constexpr int kFirstTenOctal[32] = {01440, 01620, 01710, 01744, 01133, 01455, 01131, 01454,
                                    01626, 01504, 01642, 01750, 01764, 01772, 01775, 01776,
                                    01156, 01467, 01633, 01715, 01746, 01763, 01063, 01706,
                                    01743, 01761, 01770, 01774, 01127, 01453, 01625, 01712};

scenario::TrajectoryState static_user(double t) {
  scenario::TrajectoryState s;
  s.t = t;
  s.p_u = scenario::llh_to_ecef({0.7, 0.1, 100});
  return s;
}

scenario::SatelliteTruth overhead_sat(int prn, bool frozen = true) {
  scenario::SatelliteTruth s;
  s.prn = prn;
  s.frozen = frozen;
  s.orbit = scenario::orbit_through_look_angle(static_user(0).p_u, 0.5, 1.0, 26'560'000.0, 55 * kPi / 180);
  return s;
}

channel::ChannelNcoState aligned_nco(const SignalTruth& truth, std::size_t i, double t, loops::ControlParams& theta) {
  const auto s = truth.evaluate(i, t);
  channel::ChannelNcoState n;
  n.t_rx = t;
  n.set_code_phase(s.code_chips);
  n.set_carrier_phase(s.phi);
  theta.f_pll = s.fd;
  theta.f_dll = kChipRate * s.fd / kL1Frequency;
  return n;
}

}  // namespace

TEST(Prn, MatchesPhaseSelectorGenerator) {
  for (int prn = 1; prn <= 32; ++prn) {
    const auto ref = tap_pair_code(prn);
    const auto& code = prn_code(prn);
    for (int k = 0; k < 1023; ++k) ASSERT_EQ(code[k], ref[k] ? -1 : 1) << prn << " chip " << k;
  }
}

TEST(Prn, FirstTenChipsOctalTable) {
  for (int prn = 1; prn <= 32; ++prn) {
    const auto& code = prn_code(prn);
    int v = 0;
    for (int k = 0; k < 10; ++k) v = (v << 1) | (code[k] < 0 ? 1 : 0);
    EXPECT_EQ(v, kFirstTenOctal[prn - 1]) << "PRN " << prn;
  }
}

TEST(Prn, AutoAndCrossCorrelation) {
  for (int a = 1; a <= 32; ++a) {
    const auto& ca = prn_code(a);
    EXPECT_EQ(std::accumulate(ca.begin(), ca.end(), 0), -1) << a;  // balanced: one extra -1
    int zero = 0;
    for (int k = 0; k < 1023; ++k) zero += ca[k] * ca[k];
    EXPECT_EQ(zero, 1023);
    for (int b = a + 1; b <= 32; ++b) {
      const auto& cb = prn_code(b);
      for (int lag = 0; lag < 1023; ++lag) {
        int c = 0;
        for (int k = 0; k < 1023; ++k) c += ca[k] * cb[(k + lag) % 1023];
        ASSERT_TRUE(c == -65 || c == -1 || c == 63) << a << "," << b << " lag " << lag << " -> " << c;
      }
    }
  }
}

TEST(Prn, OutOfRangeRejected) {
  EXPECT_THROW(prn_code(0), std::out_of_range);
  EXPECT_THROW(prn_code(33), std::out_of_range);
}

TEST(SignalTruth, StaticGeometryHasZeroDoppler) {
  SignalTruth truth(static_user, {overhead_sat(3)}, scenario::Cn0Schedule::constant(45, 10), {});
  for (double t : {0.0, 1.0, 5.5}) EXPECT_NEAR(truth.evaluate(0, t).fd, 0.0, 1e-12);
}

TEST(SignalTruth, RadialAndClockDoppler) {
  scenario::SatPva sat;
  sat.p = Vec3(0, 0, 2.0e7);
  sat.v = Vec3(0, 0, 100.0);
  const navfilter::ReceiverKinematics rx{Vec3(0, 0, 6.4e6)};
  const double hz_per_mps = 1575.42e6 / 299792458.0;
  EXPECT_NEAR(std::abs(navfilter::doppler_predict(rx, sat)), 100.0 * hz_per_mps, 1e-9);
  // receding satellite -> negative Doppler
  EXPECT_LT(navfilter::doppler_predict(rx, sat), 0.0);

  scenario::SatPva still;
  still.p = Vec3(0, 0, 2.0e7);
  navfilter::ReceiverKinematics clk{Vec3(0, 0, 6.4e6)};
  clk.clk_d = 1.0;
  EXPECT_NEAR(navfilter::doppler_predict(clk, still), -hz_per_mps, 1e-12);
}

TEST(SignalTruth, PhaseRateAndCodeRateConsistent) {
  scenario::FigureEightParams p;
  p.center = {0.7, 0.1, 100};
  p.n_loops = 1;
  p.dwell = 1;
  const scenario::FigureEight f(p);
  SignalTruth truth = signal_truth_from_scenario(f, {overhead_sat(5, false)}, scenario::Cn0Schedule::constant(45, 60),
                                                 {30.0, 2.0, 0.0});
  const double h = 1e-3;
  for (double t = 2.0; t < 30.0; t += 1.37) {
    const auto m = truth.evaluate(0, t - h), c = truth.evaluate(0, t), q = truth.evaluate(0, t + h);
    EXPECT_NEAR((q.phi - m.phi) / (2 * h), c.fd, 1e-3) << t;
    const double code_rate = (q.code_chips - m.code_chips) / (2 * h);
    EXPECT_NEAR(code_rate / (kChipRate * (1 + c.fd / kL1Frequency)), 1.0, 1e-9) << t;
    EXPECT_NEAR((q.fd - m.fd) / (2 * h), c.fd_dot, 1e-3) << t;
  }
}

TEST(Synth, NoiseOnlyVariance) {
  SignalTruth truth(static_user, {}, scenario::Cn0Schedule::constant(45, 10), {});
  SynthOptions opt;
  opt.noise_sigma = 2.0;
  opt.quantize = false;
  opt.agc_scale = 1.0;
  const SignalSynthesizer syn(truth, opt);
  const auto blk = syn.synthesize(0, 1'000'000, 3);
  double si = 0, sq = 0;
  for (const auto& x : blk.samples) {
    si += double(x.real()) * x.real();
    sq += double(x.imag()) * x.imag();
  }
  EXPECT_NEAR(si / blk.samples.size() / 4.0, 1.0, 0.05);
  EXPECT_NEAR(sq / blk.samples.size() / 4.0, 1.0, 0.05);
}

TEST(Synth, QuantizedSamplesAreEightBit) {
  SignalTruth truth(static_user, {overhead_sat(1)}, scenario::Cn0Schedule::constant(50, 10), {});
  const SignalSynthesizer syn(truth, {});
  const auto blk = syn.synthesize_block(0.001, 0.002, 9);
  EXPECT_EQ(blk.samples.size(), 8000u);
  for (const auto& x : blk.samples) {
    EXPECT_EQ(x.real(), std::round(x.real()));
    EXPECT_GE(x.real(), -128.f);
    EXPECT_LE(x.real(), 127.f);
    EXPECT_GE(x.imag(), -128.f);
    EXPECT_LE(x.imag(), 127.f);
  }
  EXPECT_THROW(syn.synthesize_block(0.0, 1.1e-7, 1), std::invalid_argument);
}

TEST(Synth, Deterministic) {
  SignalTruth truth(static_user, {overhead_sat(1), overhead_sat(7)}, scenario::Cn0Schedule::constant(45, 10), {});
  const SignalSynthesizer syn(truth, {});
  const auto a = syn.synthesize(4000, 4000, 42), b = syn.synthesize(4000, 4000, 42);
  EXPECT_TRUE(std::equal(a.samples.begin(), a.samples.end(), b.samples.begin()));
  const auto c = syn.synthesize(4000, 4000, 43);
  EXPECT_FALSE(std::equal(a.samples.begin(), a.samples.end(), c.samples.begin()));
}

TEST(Synth, AlignedReplicaGivesFullPromptPower) {
  SignalTruth truth(static_user, {overhead_sat(4)}, scenario::Cn0Schedule::constant(45, 10), {});
  SynthOptions opt;
  opt.noise = false;
  opt.quantize = false;
  opt.agc_scale = 1.0;
  const SignalSynthesizer syn(truth, opt);
  const double t0 = 0.25;
  const auto blk = syn.synthesize_block(t0, 1e-3, 1);
  loops::ControlParams theta;
  const auto nco = aligned_nco(truth, 0, t0, theta);
  const auto c = channel::correlate(blk, nco, theta, 4, 0.5, blk.samples.size());
  const double A = amplitude_for_cn0(45, 1.0, opt.fs);
  const double N = blk.samples.size();
  EXPECT_NEAR(c.prompt_power() / std::pow(A * N, 2), 1.0, 1e-4);
}

TEST(Synth, Cn0EstimateClosesAt45) {
  SignalTruth truth(static_user, {overhead_sat(9)}, scenario::Cn0Schedule::constant(45, 10), {});
  const SignalSynthesizer syn(truth, {});
  channel::Cn0Estimator est;
  loops::ControlParams theta;
  // start on a bit boundary of the received code
  const double chips0 = truth.evaluate(0, 0.1).code_chips;
  const double next_bit = std::ceil(chips0 / kChipsPerBit) * kChipsPerBit;
  double t = 0.1 + (next_bit - chips0) / kChipRate;
  t = std::ceil(t * syn.options().fs) / syn.options().fs;
  for (int k = 0; k < 1000; ++k) {
    auto nco = aligned_nco(truth, 0, t, theta);
    const auto blk = syn.synthesize(std::llround(t * 4e6), 4000, 77);
    const auto c = channel::correlate(blk, nco, theta, 9, 0.5, 4000);
    est.push(c.IP, c.QP, k % 20 == 0);
    t += 1e-3;
  }
  ASSERT_TRUE(est.estimate().has_value());
  EXPECT_NEAR(*est.estimate(), 45.0, 1.5);
}

TEST(Synth, QuantizationChangesCorrelationsLittle) {
  SignalTruth truth(static_user, {overhead_sat(2), overhead_sat(11)}, scenario::Cn0Schedule::constant(40, 10), {});
  SynthOptions q;
  SynthOptions u;
  u.quantize = false;
  const SignalSynthesizer sq(truth, q), su(truth, u);
  double num = 0, den = 0;
  loops::ControlParams theta;
  for (int k = 0; k < 50; ++k) {
    const double t = 0.2 + k * 1e-3;
    const auto nco = aligned_nco(truth, 0, t, theta);
    const auto bq = sq.synthesize(std::llround(t * 4e6), 4000, 5);
    const auto bu = su.synthesize(std::llround(t * 4e6), 4000, 5);
    const auto cq = channel::correlate(bq, nco, theta, 2, 0.5, 4000);
    const auto cu = channel::correlate(bu, nco, theta, 2, 0.5, 4000);
    num += std::pow(cq.IP - cu.IP, 2) + std::pow(cq.QP - cu.QP, 2);
    den += cu.prompt_power();
  }
  EXPECT_LT(std::sqrt(num / den), 0.01);
}
