#include "timgen/labels.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "timgen/errors.hpp"

namespace timgen {

void LabelWeights::validate() const {
  const std::array<double, 8> all = {ecommerce.click, ecommerce.cart,  ecommerce.purchase,
                                     ecommerce.comment, video.completion, video.like,
                                     video.comment,     video.share};
  for (double w : all)
    if (!(w > 0.0) || !std::isfinite(w)) throw InvalidArgument("label weights must be positive");
}

double ecommerce_score(const EngagementSignals& s, const LabelWeights& w) {
  const auto& e = w.ecommerce;
  return e.click * (s.clicked ? 1.0 : 0.0) + e.cart * (s.carted ? 1.0 : 0.0) +
         e.purchase * (s.purchased ? 1.0 : 0.0) + e.comment * (s.commented ? 1.0 : 0.0);
}

double completion_ratio(const EngagementSignals& s) {
  if (!(s.length_seconds > 0.0)) throw InvalidArgument("video length must be positive");
  return std::clamp(s.watch_seconds / s.length_seconds, 0.0, 1.0);
}

double video_score(const EngagementSignals& s, const LabelWeights& w) {
  const auto& v = w.video;
  return v.completion * completion_ratio(s) + v.like * (s.liked ? 1.0 : 0.0) +
         v.comment * (s.commented ? 1.0 : 0.0) + v.share * (s.shared ? 1.0 : 0.0);
}

double movie_score_validate(std::int64_t rating) {
  if (rating < 1 || rating > 10) {
    throw ValidationError("movie rating " + std::to_string(rating) + " outside 1..10");
  }
  return static_cast<double>(rating);
}

std::vector<double> one_hot_class(std::int64_t c, std::size_t k) {
  if (c < 0 || static_cast<std::size_t>(c) >= k) {
    throw ValidationError("class " + std::to_string(c) + " outside 0.." + std::to_string(k) + "-1");
  }
  std::vector<double> v(k, 0.0);
  v[static_cast<std::size_t>(c)] = 1.0;
  return v;
}

}  // namespace timgen
