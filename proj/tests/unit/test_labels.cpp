#include "helpers.hpp"
#include "timgen/errors.hpp"
#include "timgen/labels.hpp"

using namespace timgen;

namespace {

EngagementSignals ecommerce(bool click, bool cart, bool purchase, bool comment) {
  EngagementSignals s;
  s.clicked = click;
  s.carted = cart;
  s.purchased = purchase;
  s.commented = comment;
  return s;
}

LabelWeights ecommerce_weights(double a, double b, double g, double d) {
  LabelWeights w;
  w.ecommerce = {a, b, g, d};
  return w;
}

LabelWeights video_weights(double completion, double like, double comment, double share) {
  LabelWeights w;
  w.video = {completion, like, comment, share};
  return w;
}

}  // namespace

TEST_CASE("ecommerce score") {
  const auto unit = ecommerce_weights(1, 1, 1, 1);
  CHECK(ecommerce_score(ecommerce(false, false, false, false), unit) == 0.0);
  CHECK(ecommerce_score(ecommerce(true, true, true, true), unit) == 4.0);
  CHECK(ecommerce_score(ecommerce(true, false, true, true), ecommerce_weights(1, 2, 3, 5)) == 9.0);
}

TEST_CASE("video score") {
  EngagementSignals s;
  s.length_seconds = 120.0;
  s.watch_seconds = 120.0;
  CHECK(video_score(s, video_weights(1, 0, 0, 0)) == 1.0);
  s.watch_seconds = 0.0;
  CHECK(video_score(s, video_weights(1, 0, 0, 0)) == 0.0);
  s.watch_seconds = 60.0;
  s.liked = true;
  CHECK(video_score(s, video_weights(2, 1, 1, 1)) == 2.0);
  s.watch_seconds = 500.0;
  CHECK(completion_ratio(s) == 1.0);
  s.length_seconds = 0.0;
  CHECK_THROWS_AS(completion_ratio(s), InvalidArgument);
}

TEST_CASE("movie ratings and one-hot classes") {
  CHECK(movie_score_validate(10) == 10.0);
  CHECK(movie_score_validate(1) == 1.0);
  CHECK_THROWS_AS(movie_score_validate(0), ValidationError);
  CHECK_THROWS_AS(movie_score_validate(11), ValidationError);
  CHECK(one_hot_class(2, 4) == std::vector<double>{0, 0, 1, 0});
  CHECK(one_hot_class(0, 1) == std::vector<double>{1});
  CHECK_THROWS_AS(one_hot_class(4, 4), ValidationError);
  CHECK_THROWS_AS(one_hot_class(-1, 4), ValidationError);
}

TEST_CASE("weight validation") {
  CHECK_THROWS_AS(ecommerce_weights(1, 0, 1, 1).validate(), InvalidArgument);
  CHECK_THROWS_AS(video_weights(1, 1, -1, 1).validate(), InvalidArgument);
  CHECK_NOTHROW(LabelWeights{}.validate());
}
