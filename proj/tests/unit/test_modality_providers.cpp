#include <cmath>
#include <set>

#include "helpers.hpp"
#include "timgen/errors.hpp"
#include "timgen/modality_providers.hpp"

using namespace timgen;

namespace {
const ModalityDims kDims = {8, 6, 4, 5};
}

TEST_CASE("mock provider is deterministic and unit norm") {
  const auto p = mock_provider(42, kDims);
  const auto a = p->lookup("item1", ModalityKind::Text);
  REQUIRE(a.has_value());
  CHECK(a == p->lookup("item1", ModalityKind::Text));
  CHECK(a != p->lookup("item1", ModalityKind::Image));
  CHECK(a != mock_provider(43, kDims)->lookup("item1", ModalityKind::Text));
  for (auto kind : kAllModalities) {
    const auto v = *p->lookup("x", kind);
    CHECK(v.size() == kDims[index_of(kind)]);
    double n = 0.0;
    for (double e : v) n += e * e;
    CHECK(std::abs(std::sqrt(n) - 1.0) < 1e-12);
  }
}

TEST_CASE("mock provider separates distinct items") {
  const auto p = mock_provider(7, kDims);
  std::set<std::vector<double>> seen;
  for (int i = 0; i < 1000; ++i) seen.insert(*p->lookup("item" + std::to_string(i), ModalityKind::Audio));
  CHECK(seen.size() == 1000);
}

TEST_CASE("table provider") {
  TableProvider table(kDims);
  table.insert("a", ModalityKind::Image, {1, 2, 3, 4, 5, 6});
  CHECK(table.lookup("a", ModalityKind::Image) == std::vector<double>{1, 2, 3, 4, 5, 6});
  CHECK(!table.lookup("a", ModalityKind::Text).has_value());
  CHECK(!table.lookup("b", ModalityKind::Image).has_value());
  CHECK_THROWS_AS(table.insert("a", ModalityKind::Text, {1.0}), InvalidArgument);
}

TEST_CASE("embedding table file round-trip and errors") {
  const auto dir = test::temp_dir("providers");
  TableProvider table(kDims);
  table.insert("a", ModalityKind::Text, {0.1, -0.2, 1e-300, 3.0, 4.5, 0.0, -7.25, 1.0 / 3.0});
  table.insert("b", ModalityKind::Audio, {1, 2, 3, 4, 5});
  write_embedding_table(table, dir / "t.tsv");
  const auto back = file_provider(dir / "t.tsv", kDims);
  CHECK(back->rows() == table.rows());

  test::write_file(dir / "bad.tsv", "a\ttext\t0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8\nb\timg\t1,2\n");
  try {
    file_provider(dir / "bad.tsv", kDims);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }
  test::write_file(dir / "kind.tsv", "a\tsmell\t1\n");
  CHECK_THROWS_AS(file_provider(dir / "kind.tsv", kDims), ParseError);
  test::write_file(dir / "num.tsv", "a\taudio\t1,2,x,4,5\n");
  CHECK_THROWS_AS(file_provider(dir / "num.tsv", kDims), ParseError);
}

TEST_CASE("fnv1a reference values") {
  CHECK(fnv1a("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(fnv1a("foobar") == 0x85944171f73967e8ULL);
}
