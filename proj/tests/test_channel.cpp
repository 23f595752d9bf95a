#include <gtest/gtest.h>

#include "dosattack/channel.hpp"

using namespace dosattack;

TEST(SafeInterval, ClampsToProbabilityRange) {
  const auto a = safe_interval(0.05, 0.1);
  EXPECT_DOUBLE_EQ(a.lo, 0.0);
  EXPECT_NEAR(a.hi, 0.15, 1e-15);
  const auto b = safe_interval(0.95, 0.1);
  EXPECT_DOUBLE_EQ(b.hi, 1.0);
  const auto c = safe_interval(0.7, 0.0);
  EXPECT_EQ(c.lo, c.hi);
}

TEST(Monitor, EstimateIsRunningMean) {
  auto st = MonitorState::empty(2);
  EXPECT_FALSE(st.estimate().has_value());
  st = update_monitor(st, (VectorXd(2) << 1, 0).finished());
  st = update_monitor(st, (VectorXd(2) << 1, 1).finished());
  st = update_monitor(st, (VectorXd(2) << 0, 0).finished());
  const VectorXd est = *st.estimate();
  EXPECT_DOUBLE_EQ(est(0), 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(est(1), 1.0 / 3.0);
}

TEST(Region, BoundaryIsInside) {
  const VectorXd nominal = VectorXd::Constant(1, 0.7);
  const VectorXd eps = VectorXd::Constant(1, 0.1);
  EXPECT_TRUE(in_safe_region(VectorXd::Constant(1, 0.8), nominal, eps));
  EXPECT_TRUE(in_safe_region(VectorXd::Constant(1, 0.6), nominal, eps));
  EXPECT_FALSE(in_safe_region(VectorXd::Constant(1, 0.81), nominal, eps));
  EXPECT_FALSE(in_safe_region(VectorXd::Constant(1, 0.59), nominal, eps));
}

TEST(Region, AnyChannelOutsideTriggers) {
  VectorXd nominal(2), eps(2), est(2);
  nominal << 0.7, 0.01;
  eps << 0.1, 0.1;
  est << 0.7, 0.2;
  EXPECT_FALSE(in_safe_region(est, nominal, eps));
  est << 0.75, 0.0;
  EXPECT_TRUE(in_safe_region(est, nominal, eps));
}

TEST(Losses, UniformThresholding) {
  VectorXd means(3), uni(3);
  means << 0.0, 0.5, 1.0;
  uni << 0.0, 0.49, 0.999;
  EXPECT_EQ(losses_from_uniforms(means, uni), (VectorXd(3) << 0, 1, 1).finished());
}

TEST(Losses, EmpiricalRateConcentrates) {
  auto rng = make_stream(5, 0, StreamTag::Losses);
  const VectorXd means = VectorXd::Constant(1, 0.7);
  double sum = 0.0;
  const int k = 1000;
  for (int i = 0; i < k; ++i) sum += sample_losses(means, rng)(0);
  // Hoeffding at margin 0.05 and k = 1000 bounds the miss probability by 0.013.
  EXPECT_NEAR(sum / k, 0.7, 0.05);
}

TEST(Hoeffding, ClosedForm) {
  EXPECT_NEAR(hoeffding_bound(1000, 0.1), 2.0 * std::exp(-20.0), 1e-20);
  EXPECT_DOUBLE_EQ(hoeffding_bound(0, 0.1), 2.0);
}

TEST(ChannelSpec, Validation) {
  ChannelSpec c{VectorXd::Constant(2, 0.7), true};
  EXPECT_NO_THROW(c.validate());
  c.means(1) = 0.5;
  EXPECT_THROW(c.validate(), Error);
  c.shared = false;
  EXPECT_NO_THROW(c.validate());
  c.means(0) = 1.0;
  EXPECT_THROW(c.validate(), Error);
  DetectionSpec d{VectorXd::Constant(2, 0.5), VectorXd::Constant(1, 0.1)};
  EXPECT_THROW(d.validate(), Error);
}
