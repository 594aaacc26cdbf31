#include "fdia/attack.hpp"

#include "fdia/rng.hpp"

#include <gtest/gtest.h>

#include <set>

using namespace fdia;

TEST(ApplyMask, FirstCasePassesRawChoice) {
  WindowRecord rec;
  const MaskResult r = apply_mask(rec, AdversaryAction{3, -1, false});
  EXPECT_EQ(r.effective_bus, 3);
  EXPECT_EQ(r.record.recorded_bus, 3);
  EXPECT_TRUE(r.record.attacked_any_step);
}

TEST(ApplyMask, FirstCaseIgnoresMute) {
  // Naming a bus commits and attacks even with the mute flag raised.
  WindowRecord rec;
  const MaskResult r = apply_mask(rec, AdversaryAction{3, -1, true});
  EXPECT_EQ(r.effective_bus, 3);
  EXPECT_EQ(r.record.recorded_bus, 3);
}

TEST(ApplyMask, EmptyRecordStaysEmptyWithoutChoice) {
  WindowRecord rec;
  const MaskResult r = apply_mask(rec, AdversaryAction{kNoAttack, 0, false});
  EXPECT_EQ(r.effective_bus, kNoAttack);
  EXPECT_EQ(r.record.recorded_bus, kNoAttack);
  EXPECT_FALSE(r.record.attacked_any_step);
}

TEST(ApplyMask, CommittedRecordOverridesChoice) {
  WindowRecord rec{5, true, 0};
  const MaskResult r = apply_mask(rec, AdversaryAction{2, -1, false});
  EXPECT_EQ(r.effective_bus, 5);
  EXPECT_EQ(r.record.recorded_bus, 5);
}

TEST(ApplyMask, MuteSuspendsCommittedAttack) {
  WindowRecord rec{5, true, 0};
  const MaskResult r = apply_mask(rec, AdversaryAction{2, -1, true});
  EXPECT_EQ(r.effective_bus, kNoAttack);
  EXPECT_EQ(r.record.recorded_bus, 5);
}

TEST(EffectiveDroop, NoAttackIsExactCopy) {
  const Vec k_ref = Vec::LinSpaced(10, 0.8, 1.2);
  const Vec k = effective_droop(k_ref, kNoAttack, -1.0);
  EXPECT_TRUE(k == k_ref);
}

TEST(EffectiveDroop, SingleSubstitution) {
  const Vec k_ref = Vec::LinSpaced(10, 0.8, 1.2);
  const Vec k = effective_droop(k_ref, 2, -1.0);
  int changed = 0;
  for (int i = 0; i < 10; ++i) {
    if (k[i] != k_ref[i]) ++changed;
  }
  EXPECT_EQ(changed, 1);
  EXPECT_DOUBLE_EQ(k[2], -1.0);
}

TEST(EffectiveDroop, OutOfRangeBusThrows) {
  const Vec k_ref = Vec::Ones(4);
  EXPECT_THROW(effective_droop(k_ref, 4, 0.0), std::invalid_argument);
}

TEST(WindowLabel, AttackedWindowNamesBus) {
  EXPECT_EQ(window_label(WindowRecord{4, true, 0}), 4);
}

TEST(WindowLabel, CleanWindowIsNoAttack) {
  EXPECT_EQ(window_label(WindowRecord{kNoAttack, false, 0}), kNoAttack);
  // A recorded bus with no attacked step labels as no-attack.
  EXPECT_EQ(window_label(WindowRecord{4, false, 0}), kNoAttack);
}

TEST(WindowLabel, MutePatternEnumeration) {
  // All 2^6 mute patterns over a 6-step window with the bus named at every
  // step: the label is the bus iff at least one step attacked effectively.
  for (int pattern = 0; pattern < 64; ++pattern) {
    WindowRecord rec;
    bool any_effective = false;
    for (int step = 0; step < 6; ++step) {
      const bool mute = ((pattern >> step) & 1) != 0;
      const MaskResult r = apply_mask(rec, AdversaryAction{4, -1, mute});
      any_effective = any_effective || r.effective_bus != kNoAttack;
      rec = r.record;
    }
    const int label = window_label(rec);
    EXPECT_EQ(label, any_effective ? 4 : kNoAttack);
    // Naming the bus at the first step always commits and attacks once.
    EXPECT_TRUE(any_effective);
  }
  // Delayed choice: mute-only prefixes keep the window clean until a bus is
  // named, so a window can also end with no attack at all.
  WindowRecord rec;
  for (int step = 0; step < 6; ++step) {
    rec = apply_mask(rec, AdversaryAction{kNoAttack, -1, true}).record;
  }
  EXPECT_EQ(window_label(rec), kNoAttack);
}

TEST(DetectionTimes, PaperSchedule) {
  const auto times = detection_times(500, 6);
  ASSERT_EQ(times.size(), 83u);
  EXPECT_EQ(times.front(), 6);
  EXPECT_EQ(times.back(), 498);
  for (std::size_t i = 0; i < times.size(); ++i) {
    EXPECT_EQ(times[i], static_cast<int>(6 * (i + 1)));
  }
}

TEST(DetectionTimes, Boundaries) {
  EXPECT_EQ(detection_times(12, 6), (std::vector<int>{6}));
  EXPECT_TRUE(detection_times(6, 6).empty());
  EXPECT_THROW(detection_times(10, 1), std::invalid_argument);
  EXPECT_THROW(detection_times(4, 6), std::invalid_argument);
}

TEST(AttackProperties, OneBusPerWindowAndSparseDroop) {
  // Random action sequences across windows: at most one distinct attacked
  // bus per window and || k_ref - k' ||_0 <= 1 at every step.
  Rng rng(123);
  const int n_buses = 10;
  const Vec k_ref = Vec::LinSpaced(n_buses, 0.8, 1.2);
  const int windows = 20000;
  const int window_len = 6;
  for (int w = 0; w < windows; ++w) {
    WindowRecord rec;
    std::set<int> attacked;
    for (int step = 0; step < window_len; ++step) {
      const AdversaryAction a{static_cast<int>(rng.uniform_int(n_buses + 1)) - 1,
                              static_cast<int>(rng.uniform_int(3)) - 1,
                              rng.uniform_int(2) == 1};
      const MaskResult r = apply_mask(rec, a);
      rec = r.record;
      if (r.effective_bus != kNoAttack) attacked.insert(r.effective_bus);
      const Vec droop = effective_droop(k_ref, r.effective_bus,
                                        static_cast<double>(a.droop_value));
      int changed = 0;
      for (int i = 0; i < n_buses; ++i) {
        if (droop[i] != k_ref[i]) ++changed;
      }
      EXPECT_LE(changed, 1);
    }
    EXPECT_LE(attacked.size(), 1u);
  }
}

TEST(AttackProperties, ApplyMaskIsPure) {
  Rng rng(45);
  for (int trial = 0; trial < 1000; ++trial) {
    WindowRecord rec{static_cast<int>(rng.uniform_int(11)) - 1,
                     rng.uniform_int(2) == 1, 0};
    if (rec.recorded_bus == kNoAttack) rec.attacked_any_step = false;
    const AdversaryAction a{static_cast<int>(rng.uniform_int(11)) - 1,
                            static_cast<int>(rng.uniform_int(3)) - 1,
                            rng.uniform_int(2) == 1};
    const MaskResult r1 = apply_mask(rec, a);
    const MaskResult r2 = apply_mask(rec, a);
    EXPECT_EQ(r1.effective_bus, r2.effective_bus);
    EXPECT_EQ(r1.record.recorded_bus, r2.record.recorded_bus);
    EXPECT_EQ(r1.record.attacked_any_step, r2.record.attacked_any_step);
  }
}
