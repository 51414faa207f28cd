#pragma once

// Seeded generator of recordings that mimic a 5-finger capacitive controller:
// raised-cosine bend/release pulses on the active fingers, per-user gain,
// offset and timing variation, and random low-amplitude wander for None.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "capgest/dataset_io.hpp"
#include "capgest/signal.hpp"

namespace capgest::synth {

/// Pulse on one channel, in normalized units relative to the resting level.
struct ChannelPulse {
  std::size_t channel = 0;
  double amplitude = 0.0;   // (0, 1]
  double duration_ms = 0.0;
  double onset_ms = 0.0;    // offset from gesture start
  double release = 0.5;     // fraction of the pulse spent releasing; smaller = sharper
};

struct GestureTemplate {
  GestureLabel label = GestureLabel::None;
  std::vector<ChannelPulse> pulses;

  double span_ms() const;
};

/// Built-in templates for the 4 dynamic gestures.
const GestureTemplate& gesture_template(GestureLabel label);

struct UserProfile {
  std::string user_id;
  std::array<double, kChannels> baseline_raw{};  // fully-open raw reading
  std::array<double, kChannels> gain{};          // raw units per unit of press
  std::array<double, kChannels> rest_level{};    // normalized resting grip
  double amplitude_scale = 1.0;                  // habitual strength
  double tempo = 1.0;                            // habitual speed (duration multiplier)
  double sigma_amp = 0.0;                        // relative per-gesture amplitude jitter
  double sigma_time_ms = 0.0;                    // per-gesture duration jitter
  double sigma_noise = 0.0;                      // additive noise, raw units

  std::array<ChannelRange, kChannels> calibration() const;
  friend bool operator==(const UserProfile&, const UserProfile&) = default;
};

UserProfile gen_profile(std::uint64_t seed, std::string user_id = "u00");

/// One recording containing at most one gesture (None yields no mark).
Recording gen_recording(const UserProfile& profile, GestureLabel label, std::uint64_t seed);

struct GenConfig {
  std::size_t n_users = 15;
  std::size_t gestures_per_user_per_class = 70;
  /// None recordings per user, as a multiple of gestures_per_user_per_class.
  double none_ratio = 1.0;
  std::uint64_t seed = 2023;
};

RecordingSet gen_dataset(const GenConfig& config);

/// User ids are u01..uNN; the last two are the conventional pinned hold users.
std::string user_name(std::size_t index);

}  // namespace capgest::synth
