#include "bodymap/body_part.hpp"

#include <stdexcept>

namespace bodymap {
namespace {

struct Names {
  std::string_view display;
  std::string_view token;
  std::string_view csv;
};

constexpr std::array<Names, kBodyPartCount> kNames = {{
    {"torso", "torso", "torso"},
    {"upper arm", "upper_arm", "upperarm"},
    {"forearm", "forearm", "forearm"},
    {"palm", "palm", "palm"},
    {"little finger", "little_finger", "little"},
    {"ring finger", "ring_finger", "ring"},
    {"middle finger", "middle_finger", "middle"},
    {"index finger", "index_finger", "index"},
    {"thumb", "thumb", "thumb"},
}};

}  // namespace

BodyPart body_part_at(std::size_t i) {
  if (i >= kBodyPartCount) {
    throw std::out_of_range("body part index " + std::to_string(i) + " out of range");
  }
  return kAllBodyParts[i];
}

std::string_view display_name(BodyPart p) { return kNames[index_of(p)].display; }
std::string_view token(BodyPart p) { return kNames[index_of(p)].token; }
std::string_view csv_key(BodyPart p) { return kNames[index_of(p)].csv; }

BodyPart parse_body_part(std::string_view text) {
  for (std::size_t i = 0; i < kBodyPartCount; ++i) {
    const auto& n = kNames[i];
    if (text == n.token || text == n.display || text == n.csv) return kAllBodyParts[i];
  }
  throw std::invalid_argument("unknown body part '" + std::string(text) + "'");
}

}  // namespace bodymap
