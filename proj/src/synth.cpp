#include "capgest/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "capgest/error.hpp"

namespace capgest::synth {

namespace {

constexpr std::size_t kThumb = 0, kIndex = 1, kMiddle = 2;
constexpr double kFrameMs = 1000.0 / kNominalRateHz;

std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream = 0, std::uint64_t sub = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(sub), 0x9e3779b9u};
  return std::mt19937_64(seq);
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

int uniform_int(std::mt19937_64& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

double normal(std::mt19937_64& rng, double sigma) {
  if (sigma <= 0.0) return 0.0;
  return std::normal_distribution<double>(0.0, sigma)(rng);
}

// Single-lobe raised cosine on [0, 1]: rise over (1 - release), fall over release.
double pulse_shape(double u, double release) {
  if (u <= 0.0 || u >= 1.0) return 0.0;
  const double rise = 1.0 - release;
  if (u < rise) return 0.5 * (1.0 - std::cos(std::numbers::pi * u / rise));
  return 0.5 * (1.0 + std::cos(std::numbers::pi * (u - rise) / release));
}

std::size_t eligible_offset(std::size_t mark_len) { return (2 * mark_len + 2) / 3; }

}  // namespace

double GestureTemplate::span_ms() const {
  double span = 0.0;
  for (const auto& p : pulses) span = std::max(span, p.onset_ms + p.duration_ms);
  return span;
}

const GestureTemplate& gesture_template(GestureLabel label) {
  static const std::array<GestureTemplate, 4> templates = {{
      {GestureLabel::IndexBend, {{kIndex, 0.80, 500.0, 0.0, 0.50}}},
      {GestureLabel::Shoot, {{kIndex, 0.65, 500.0, 0.0, 0.50}, {kMiddle, 0.65, 475.0, 25.0, 0.50}}},
      {GestureLabel::FlickIndex, {{kIndex, 0.55, 300.0, 0.0, 0.30}}},
      {GestureLabel::FlickMiddle, {{kMiddle, 0.60, 300.0, 0.0, 0.30}}},
  }};
  if (label == GestureLabel::None) throw Error(ErrorKind::ParamOutOfRange, "None has no gesture template");
  return templates[static_cast<std::size_t>(label_index(label))];
}

std::array<ChannelRange, kChannels> UserProfile::calibration() const {
  std::array<ChannelRange, kChannels> ranges{};
  for (std::size_t c = 0; c < kChannels; ++c) {
    const double open = baseline_raw[c] - gain[c] * rest_level[c];
    ranges[c] = {open, open + gain[c]};
  }
  return ranges;
}

UserProfile gen_profile(std::uint64_t seed, std::string user_id) {
  auto rng = make_rng(seed, 1);
  UserProfile p;
  p.user_id = std::move(user_id);
  for (std::size_t c = 0; c < kChannels; ++c) {
    p.gain[c] = uniform(rng, 300.0, 700.0);
    p.rest_level[c] = uniform(rng, 0.04, 0.14);
    p.baseline_raw[c] = uniform(rng, 150.0, 350.0) + p.gain[c] * p.rest_level[c];
  }
  // Thumb rests on the trackpad area, slightly more pressed.
  p.rest_level[kThumb] += 0.05;
  p.baseline_raw[kThumb] += p.gain[kThumb] * 0.05;
  p.amplitude_scale = uniform(rng, 0.88, 1.12);
  p.tempo = uniform(rng, 0.90, 1.10);
  p.sigma_amp = uniform(rng, 0.03, 0.07);
  p.sigma_time_ms = uniform(rng, 15.0, 35.0);
  p.sigma_noise = uniform(rng, 1.0, 3.0);
  return p;
}

namespace {

Recording blank_recording(const UserProfile& profile, std::size_t frames) {
  Recording r;
  r.user_id = profile.user_id;
  r.sample_rate_hz = kNominalRateHz;
  for (std::size_t c = 0; c < kChannels; ++c) r.channels[c].assign(frames, profile.baseline_raw[c]);
  return r;
}

void add_noise(Recording& r, const UserProfile& profile, std::mt19937_64& rng) {
  if (profile.sigma_noise <= 0.0) return;
  for (auto& trace : r.channels)
    for (double& v : trace) v += normal(rng, profile.sigma_noise);
}

// Adds gain * amplitude * shape to one channel; amplitude is capped so the
// trace stays within the calibrated press range.
void add_pulse(Recording& r, const UserProfile& profile, std::size_t channel, double start_ms, double duration_ms,
               double amplitude, double release) {
  amplitude = std::min(amplitude, 1.0 - profile.rest_level[channel]);
  for (std::size_t f = 0; f < r.frames(); ++f) {
    const double u = (static_cast<double>(f) * kFrameMs - start_ms) / duration_ms;
    r.channels[channel][f] += profile.gain[channel] * amplitude * pulse_shape(u, release);
  }
}

Recording gen_none(const UserProfile& profile, std::mt19937_64& rng) {
  const auto frames = static_cast<std::size_t>(uniform_int(rng, 22, 30));
  Recording r = blank_recording(profile, frames);
  // Random hand movement: a couple of weak, slow excursions on random fingers.
  const int bumps = uniform_int(rng, 1, 3);
  for (int b = 0; b < bumps; ++b) {
    const auto channel = static_cast<std::size_t>(uniform_int(rng, 0, kChannels - 1));
    const double duration = uniform(rng, 250.0, 900.0);
    const double start = uniform(rng, -duration / 2, static_cast<double>(frames) * kFrameMs - duration / 2);
    add_pulse(r, profile, channel, start, duration, uniform(rng, 0.05, 0.25), uniform(rng, 0.3, 0.7));
  }
  add_noise(r, profile, rng);
  return r;
}

}  // namespace

Recording gen_recording(const UserProfile& profile, GestureLabel label, std::uint64_t seed) {
  auto rng = make_rng(seed, 2);
  if (label == GestureLabel::None) return gen_none(profile, rng);

  const auto& tmpl = gesture_template(label);
  const double stretch =
      std::max(0.5, profile.tempo + normal(rng, profile.sigma_time_ms) / tmpl.span_ms());
  const double amp_factor = profile.amplitude_scale * std::max(0.5, 1.0 + normal(rng, profile.sigma_amp));

  // Frame the clip so the first window ends near the start of the final third
  // of the gesture, with a short tail after the release.
  const double span_ms = tmpl.span_ms() * stretch;
  const auto mark_frames = std::max<std::size_t>(3, static_cast<std::size_t>(std::ceil(span_ms / kFrameMs)));
  const std::size_t first_eligible = eligible_offset(mark_frames - 1);
  const int lead_base = static_cast<int>(kWindowFrames - 1) - static_cast<int>(first_eligible);
  const auto lead = static_cast<std::size_t>(std::max(0, lead_base + uniform_int(rng, -1, 2)));
  const auto tail = static_cast<std::size_t>(uniform_int(rng, 0, 2));
  const std::size_t frames = std::max(kWindowFrames, lead + mark_frames + tail);

  Recording r = blank_recording(profile, frames);
  const double start_ms = static_cast<double>(lead) * kFrameMs;
  for (const auto& p : tmpl.pulses)
    add_pulse(r, profile, p.channel, start_ms + p.onset_ms * stretch, p.duration_ms * stretch,
              p.amplitude * amp_factor, p.release);
  r.marks.push_back({lead, lead + mark_frames - 1, label});
  add_noise(r, profile, rng);
  return r;
}

std::string user_name(std::size_t index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "u%02zu", index + 1);
  return buf;
}

RecordingSet gen_dataset(const GenConfig& config) {
  RecordingSet set;
  const auto none_count =
      static_cast<std::size_t>(std::llround(config.none_ratio * static_cast<double>(config.gestures_per_user_per_class)));
  for (std::size_t u = 0; u < config.n_users; ++u) {
    const auto profile = gen_profile(config.seed * 1000003ULL + u, user_name(u));
    const auto ranges = profile.calibration();
    for (std::size_t c = 0; c < kChannels; ++c) set.calibration.set(profile.user_id, c, ranges[c]);

    std::uint64_t k = 0;
    for (auto label : kAllLabels) {
      const std::size_t n = label == GestureLabel::None ? none_count : config.gestures_per_user_per_class;
      for (std::size_t i = 0; i < n; ++i) {
        const std::uint64_t seed = (config.seed << 20) ^ (static_cast<std::uint64_t>(u) << 40) ^ (k++);
        set.recordings.push_back(gen_recording(profile, label, seed));
      }
    }
  }
  return set;
}

}  // namespace capgest::synth
