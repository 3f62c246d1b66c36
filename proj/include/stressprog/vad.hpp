#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>

namespace stressprog {

// Binary valence / arousal / dominance triple. Each field is 0 or 1.
class VadCode {
 public:
  constexpr VadCode() = default;
  constexpr VadCode(int valence, int arousal, int dominance)
      : valence_(check(valence)), arousal_(check(arousal)), dominance_(check(dominance)) {}

  constexpr int valence() const { return valence_; }
  constexpr int arousal() const { return arousal_; }
  constexpr int dominance() const { return dominance_; }

  // Dimension accessor in (valence, arousal, dominance) order.
  constexpr int operator[](std::size_t i) const {
    return i == 0 ? valence_ : (i == 1 ? arousal_ : dominance_);
  }

  constexpr auto operator<=>(const VadCode&) const = default;

  // "v,a,d", e.g. "0,1,0".
  std::string to_string() const;

  // Decodes a 3-bit index (valence is the most significant bit).
  static constexpr VadCode from_index(int bits) {
    return VadCode((bits >> 2) & 1, (bits >> 1) & 1, bits & 1);
  }
  constexpr int index() const { return valence_ * 4 + arousal_ * 2 + dominance_; }

 private:
  static constexpr std::uint8_t check(int bit) {
    if (bit != 0 && bit != 1) throw std::invalid_argument("VadCode fields must be 0 or 1");
    return static_cast<std::uint8_t>(bit);
  }

  std::uint8_t valence_ = 0;
  std::uint8_t arousal_ = 0;
  std::uint8_t dominance_ = 0;
};

std::ostream& operator<<(std::ostream& os, const VadCode& code);

// Canonical stress encoding (0,1,0). Identical to the Fear encoding.
inline constexpr VadCode kStressCode{0, 1, 0};
// Alignment placeholder at the head of every context sequence.
inline constexpr VadCode kDefaultContext{0, 0, 0};

enum class Emotion { Happiness, Sadness, Anger, Fear, Disgust, Neutral };

inline constexpr std::array<Emotion, 6> kAllEmotions = {
    Emotion::Happiness, Emotion::Sadness, Emotion::Anger,
    Emotion::Fear,      Emotion::Disgust, Emotion::Neutral};

constexpr VadCode encode_emotion(Emotion e) {
  switch (e) {
    case Emotion::Happiness: return {1, 1, 1};
    case Emotion::Sadness: return {0, 0, 0};
    case Emotion::Anger: return {0, 1, 1};
    case Emotion::Fear: return {0, 1, 0};
    case Emotion::Disgust: return {0, 1, 1};
    case Emotion::Neutral: return {0, 0, 0};
  }
  return {0, 0, 0};
}

std::string_view emotion_name(Emotion e);

constexpr int hamming_distance(const VadCode& a, const VadCode& b) {
  return (a.valence() != b.valence()) + (a.arousal() != b.arousal()) +
         (a.dominance() != b.dominance());
}

constexpr bool is_stress(const VadCode& c) { return c == kStressCode; }

// Accepts "v,a,d", an emotion name (case-insensitive, common adjective forms
// such as "happy" or "angry" included) or "stress".
VadCode parse_label(std::string_view text);

}  // namespace stressprog
