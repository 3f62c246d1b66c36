#include "stressprog/segmentation.hpp"

#include <cmath>
#include <stdexcept>

namespace stressprog {
namespace {

std::size_t to_samples(double seconds, int sample_rate) {
  if (!(seconds > 0.0)) throw std::invalid_argument("window and hop lengths must be positive");
  return static_cast<std::size_t>(std::llround(seconds * sample_rate));
}

}  // namespace

std::size_t SegmentWindow::start_sample(int rate) const {
  return static_cast<std::size_t>(std::llround(start_s * rate));
}

std::size_t window_count(std::size_t num_samples, int sample_rate, const WindowSpec& spec) {
  const std::size_t window = to_samples(spec.window_s, sample_rate);
  const std::size_t hop = to_samples(spec.hop_s, sample_rate);
  if (num_samples < window) return 0;
  return (num_samples - window) / hop + 1;
}

std::vector<SegmentWindow> segment(std::size_t num_samples, int sample_rate,
                                   const std::string& clip_ref, const WindowSpec& spec) {
  const std::size_t count = window_count(num_samples, sample_rate, spec);
  if (count == 0) {
    throw std::invalid_argument("clip '" + clip_ref + "' is shorter than one " +
                                std::to_string(spec.window_s) + " s window");
  }
  const std::size_t hop = to_samples(spec.hop_s, sample_rate);
  const std::size_t window = to_samples(spec.window_s, sample_rate);
  std::vector<SegmentWindow> out(count);
  for (std::size_t k = 0; k < count; ++k) {
    out[k].index = k;
    out[k].start_s = static_cast<double>(k * hop) / sample_rate;
    out[k].end_s = static_cast<double>(k * hop + window) / sample_rate;
    out[k].clip_ref = clip_ref;
  }
  return out;
}

std::vector<SegmentWindow> segment(const AudioClip& clip, const WindowSpec& spec) {
  return segment(clip.samples.size(), clip.sample_rate, clip.utterance_id, spec);
}

void check_spans(std::span<const LabelSpan> spans) {
  for (std::size_t i = 0; i < spans.size(); ++i) {
    if (!(spans[i].end_s > spans[i].start_s)) {
      throw std::invalid_argument("label span " + std::to_string(i) + " is empty or reversed");
    }
    if (i > 0 && spans[i].start_s < spans[i - 1].end_s) {
      throw std::invalid_argument("label spans overlap or are unsorted at span " + std::to_string(i));
    }
  }
}

std::vector<SegmentWindow> align_labels(std::vector<SegmentWindow> windows,
                                        std::span<const LabelSpan> spans) {
  check_spans(spans);
  for (auto& w : windows) {
    const double mid = 0.5 * (w.start_s + w.end_s);
    w.label.reset();
    for (const auto& s : spans) {
      if (mid >= s.start_s && mid < s.end_s) {
        w.label = s.label;
        break;
      }
    }
  }
  return windows;
}

AugmentedClip concat_augment(std::span<const AudioClip> clips, std::span<const VadCode> codes,
                             double gap_s) {
  if (clips.size() < 2) throw std::invalid_argument("concatenation needs at least two clips");
  if (codes.size() != clips.size()) throw std::invalid_argument("one label per clip is required");
  if (gap_s < 0.0) throw std::invalid_argument("gap must be >= 0");
  const AudioClip& first = clips.front();
  AugmentedClip out;
  out.clip.sample_rate = first.sample_rate;
  out.clip.speaker_id = first.speaker_id;
  out.clip.text_id = first.text_id;
  out.clip.utterance_id = first.utterance_id;
  const auto gap = static_cast<std::size_t>(std::llround(gap_s * first.sample_rate));
  for (std::size_t i = 0; i < clips.size(); ++i) {
    const AudioClip& c = clips[i];
    if (c.speaker_id != first.speaker_id) {
      throw std::invalid_argument("speaker mismatch: '" + c.speaker_id + "' vs '" + first.speaker_id + "'");
    }
    if (c.text_id != first.text_id) {
      throw std::invalid_argument("text mismatch: '" + c.text_id + "' vs '" + first.text_id + "'");
    }
    if (c.sample_rate != first.sample_rate) throw std::invalid_argument("sample rate mismatch");
    if (i > 0) {
      out.clip.utterance_id += "+" + c.utterance_id;
      out.clip.samples.insert(out.clip.samples.end(), gap, 0.0f);
    }
    const double start = static_cast<double>(out.clip.samples.size()) / first.sample_rate;
    out.clip.samples.insert(out.clip.samples.end(), c.samples.begin(), c.samples.end());
    const double end = static_cast<double>(out.clip.samples.size()) / first.sample_rate;
    out.spans.push_back({start, end, codes[i]});
  }
  out.label = codes.back();
  return out;
}

AugmentedClip concat_augment(std::span<const AudioClip> clips, std::span<const Emotion> emotions,
                             double gap_s) {
  std::vector<VadCode> codes;
  codes.reserve(emotions.size());
  for (Emotion e : emotions) codes.push_back(encode_emotion(e));
  return concat_augment(clips, codes, gap_s);
}

}  // namespace stressprog
