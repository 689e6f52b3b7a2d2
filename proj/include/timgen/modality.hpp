#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string_view>

namespace timgen {

enum class ModalityKind { Text = 0, Image = 1, Video = 2, Audio = 3 };

inline constexpr std::size_t kModalityCount = 4;
inline constexpr std::array<ModalityKind, kModalityCount> kAllModalities = {
    ModalityKind::Text, ModalityKind::Image, ModalityKind::Video, ModalityKind::Audio};

using ModalityDims = std::array<std::size_t, kModalityCount>;

constexpr std::size_t index_of(ModalityKind kind) { return static_cast<std::size_t>(kind); }

/// Wire names: text, img, video, audio.
std::string_view modality_name(ModalityKind kind);
std::optional<ModalityKind> parse_modality(std::string_view name);

}  // namespace timgen
