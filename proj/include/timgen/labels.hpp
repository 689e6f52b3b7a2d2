#pragma once

#include <cstdint>
#include <vector>

namespace timgen {

struct EngagementSignals {
  bool clicked = false;
  bool carted = false;
  bool purchased = false;
  bool commented = false;
  bool liked = false;
  bool shared = false;
  double watch_seconds = 0.0;
  double length_seconds = 1.0;
};

struct EcommerceWeights {
  double click = 1.0;
  double cart = 2.0;
  double purchase = 3.0;
  double comment = 2.0;
};

struct VideoWeights {
  double completion = 3.0;
  double like = 1.0;
  double comment = 1.0;
  double share = 1.0;
};

struct LabelWeights {
  EcommerceWeights ecommerce;
  VideoWeights video;

  /// Throws InvalidArgument unless every weight is a positive finite number.
  void validate() const;
};

/// click * I_click + cart * I_cart + purchase * I_purchase + comment * I_comment
double ecommerce_score(const EngagementSignals& s, const LabelWeights& w);

/// watch / length, clamped to [0, 1]. Throws InvalidArgument when length <= 0.
double completion_ratio(const EngagementSignals& s);

/// completion * ratio + like * I_like + comment * I_comment + share * I_share
double video_score(const EngagementSignals& s, const LabelWeights& w);

/// Accepts integer ratings 1..10. Throws ValidationError otherwise.
double movie_score_validate(std::int64_t rating);

/// Basis vector e_c of length k. Throws ValidationError unless 0 <= c < k.
std::vector<double> one_hot_class(std::int64_t c, std::size_t k);

}  // namespace timgen
