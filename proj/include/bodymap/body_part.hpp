#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>

namespace bodymap {

/// Fine-grained body-part vocabulary. The order is the canonical label order
/// used for language-model indices, CSV columns and back-projection rows.
enum class BodyPart : std::uint8_t {
  torso,
  upper_arm,
  forearm,
  palm,
  little_finger,
  ring_finger,
  middle_finger,
  index_finger,
  thumb,
};

inline constexpr std::size_t kBodyPartCount = 9;

inline constexpr std::array<BodyPart, kBodyPartCount> kAllBodyParts = {
    BodyPart::torso,         BodyPart::upper_arm,    BodyPart::forearm,
    BodyPart::palm,          BodyPart::little_finger, BodyPart::ring_finger,
    BodyPart::middle_finger, BodyPart::index_finger, BodyPart::thumb,
};

constexpr std::size_t index_of(BodyPart p) { return static_cast<std::size_t>(p); }

/// Throws std::out_of_range for i >= kBodyPartCount.
BodyPart body_part_at(std::size_t i);

/// Human-readable name ("upper arm").
std::string_view display_name(BodyPart p);

/// Single-token name used in data files ("upper_arm").
std::string_view token(BodyPart p);

/// Short key used in CSV column names ("upperarm", "little").
std::string_view csv_key(BodyPart p);

/// Accepts the file token, the display name or the CSV key.
/// Throws std::invalid_argument on anything else.
BodyPart parse_body_part(std::string_view text);

constexpr bool is_fingertip(BodyPart p) { return index_of(p) >= index_of(BodyPart::little_finger); }

}  // namespace bodymap
