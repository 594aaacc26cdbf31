#pragma once

#include "fdia/common.hpp"

#include <vector>

namespace fdia {

// Raw adversary action: bus to attack (kNoAttack for none), replacement
// droop coefficient in {-1, 0, 1}, and the mute flag.
struct AdversaryAction {
  int bus = kNoAttack;
  int droop_value = 0;
  bool mute = false;
};

// Per-detection-window bookkeeping. The recorded bus changes at most once
// per window, from kNoAttack to a concrete index, and resets at episode
// start and after each detection event.
struct WindowRecord {
  int recorded_bus = kNoAttack;
  bool attacked_any_step = false;
  int window_start = 0;
};

struct MaskResult {
  int effective_bus;  // bus attacked this step, kNoAttack for none
  WindowRecord record;
};

// One-bus-per-window post-processing mask. While the record is empty the
// raw bus choice passes through (mute ignored); once a bus is recorded the
// attack sticks to it and the mute flag suspends it step by step.
MaskResult apply_mask(const WindowRecord& record, const AdversaryAction& action);

// k' equals k_ref except k'[effective_bus] = droop_value when a bus is
// attacked; ||k_ref - k'||_0 <= 1 always.
Vec effective_droop(const Eigen::Ref<const Vec>& droop_ref, int effective_bus,
                    double droop_value);

// Window label at a detection time, before the record resets: the recorded
// bus if any step of the window carried an effective attack, else kNoAttack.
// Only the owning environment calls this, at detection times.
int window_label(const WindowRecord& record);

// {d, 2d, ...} intersected with [0, T-1].
std::vector<int> detection_times(int steps, int window);

}  // namespace fdia
