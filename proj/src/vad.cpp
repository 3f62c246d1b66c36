#include "stressprog/vad.hpp"

#include <algorithm>
#include <cctype>
#include <stdexcept>
#include <string>
#include <utility>

#include "stressprog/errors.hpp"

namespace stressprog {

std::string VadCode::to_string() const {
  std::string out;
  out += static_cast<char>('0' + valence_);
  out += ',';
  out += static_cast<char>('0' + arousal_);
  out += ',';
  out += static_cast<char>('0' + dominance_);
  return out;
}

std::ostream& operator<<(std::ostream& os, const VadCode& code) {
  return os << '(' << code.to_string() << ')';
}

std::string_view emotion_name(Emotion e) {
  switch (e) {
    case Emotion::Happiness: return "Happiness";
    case Emotion::Sadness: return "Sadness";
    case Emotion::Anger: return "Anger";
    case Emotion::Fear: return "Fear";
    case Emotion::Disgust: return "Disgust";
    case Emotion::Neutral: return "Neutral";
  }
  return "?";
}

namespace {

std::string trim_lower(std::string_view text) {
  auto begin = text.find_first_not_of(" \t\r\n");
  auto end = text.find_last_not_of(" \t\r\n");
  std::string out;
  if (begin == std::string_view::npos) return out;
  for (char ch : text.substr(begin, end - begin + 1)) {
    out += static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  }
  return out;
}

}  // namespace

VadCode parse_label(std::string_view text) {
  const std::string key = trim_lower(text);
  if (key.size() == 5 && key[1] == ',' && key[3] == ',') {
    auto bit = [&](char ch) {
      if (ch != '0' && ch != '1') throw DataError("bad VAD code '" + std::string(text) + "'");
      return ch - '0';
    };
    return VadCode(bit(key[0]), bit(key[2]), bit(key[4]));
  }
  static const std::pair<const char*, Emotion> kNames[] = {
      {"happiness", Emotion::Happiness}, {"happy", Emotion::Happiness},
      {"sadness", Emotion::Sadness},     {"sad", Emotion::Sadness},
      {"anger", Emotion::Anger},         {"angry", Emotion::Anger},
      {"fear", Emotion::Fear},           {"fearful", Emotion::Fear},
      {"disgust", Emotion::Disgust},     {"disgusted", Emotion::Disgust},
      {"neutral", Emotion::Neutral},
  };
  for (const auto& [name, emotion] : kNames) {
    if (key == name) return encode_emotion(emotion);
  }
  if (key == "stress" || key == "stressed") return kStressCode;
  throw DataError("unknown label '" + std::string(text) + "'");
}

}  // namespace stressprog
