#include "fdia/attack.hpp"

namespace fdia {

MaskResult apply_mask(const WindowRecord& record, const AdversaryAction& action) {
  MaskResult out{kNoAttack, record};
  if (record.recorded_bus == kNoAttack) {
    out.effective_bus = action.bus;
    if (action.bus != kNoAttack) out.record.recorded_bus = action.bus;
  } else if (!action.mute) {
    out.effective_bus = record.recorded_bus;
  } else {
    out.effective_bus = kNoAttack;
  }
  out.record.attacked_any_step =
      out.record.attacked_any_step || out.effective_bus != kNoAttack;
  return out;
}

Vec effective_droop(const Eigen::Ref<const Vec>& droop_ref, int effective_bus,
                    double droop_value) {
  Vec droop = droop_ref;
  if (effective_bus != kNoAttack) {
    if (effective_bus < 0 || effective_bus >= droop_ref.size()) {
      throw std::invalid_argument("effective_droop: bus index out of range");
    }
    droop[effective_bus] = droop_value;
  }
  return droop;
}

int window_label(const WindowRecord& record) {
  return record.attacked_any_step ? record.recorded_bus : kNoAttack;
}

std::vector<int> detection_times(int steps, int window) {
  if (window < 2) throw std::invalid_argument("detection_times: window must be >= 2");
  if (steps < window) throw std::invalid_argument("detection_times: steps must be >= window");
  std::vector<int> times;
  for (int t = window; t <= steps - 1; t += window) times.push_back(t);
  return times;
}

}  // namespace fdia
