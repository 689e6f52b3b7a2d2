#include "timgen/modality.hpp"

namespace timgen {

std::string_view modality_name(ModalityKind kind) {
  switch (kind) {
    case ModalityKind::Text: return "text";
    case ModalityKind::Image: return "img";
    case ModalityKind::Video: return "video";
    case ModalityKind::Audio: return "audio";
  }
  return "?";
}

std::optional<ModalityKind> parse_modality(std::string_view name) {
  for (auto kind : kAllModalities)
    if (modality_name(kind) == name) return kind;
  return std::nullopt;
}

}  // namespace timgen
