// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The tcnimu Authors

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "support/lara_subjects.hpp"
#include "tcnimu/attributes.hpp"
#include "tcnimu/error.hpp"

using namespace tcnimu;
using tcnimu::testing::lara_subjects;

namespace {

AttributeTable table_of(std::initializer_list<std::pair<int, std::vector<int>>> rows) {
  AttributeTable t;
  for (const auto &[id, bits] : rows)
    t.rows.push_back({id, bits});
  return t;
}

} // namespace

TEST_CASE("LARa A1 table reproduces the recording-protocol rows") {
  const auto a1 = AttributeSchema::preset("lara_a1");
  CHECK(a1.bits() == 4);
  const std::map<int, std::vector<int>> expected = {
      {7, {1, 0, 0, 1}},  {8, {0, 1, 0, 0}},  {9, {1, 0, 1, 1}},  {10, {1, 1, 1, 1}},
      {11, {0, 1, 0, 1}}, {12, {0, 0, 0, 0}}, {13, {0, 0, 0, 0}}, {14, {1, 1, 1, 1}},
  };
  const auto table = build_table(lara_subjects(), a1);
  REQUIRE(table.rows.size() == 8);
  for (const auto &r : table.rows)
    CHECK(r.bits == expected.at(r.subject_id));
  CHECK(table.row(10).bits == table.row(14).bits);
  std::vector<int> order;
  for (const auto &r : table.rows)
    order.push_back(r.subject_id);
  CHECK(order == std::vector<int>{7, 8, 9, 10, 11, 12, 13, 14});
}

TEST_CASE("LARa A2 has ten bits and subjects 12/13 collide") {
  const auto a2 = AttributeSchema::preset("lara_a2");
  CHECK(a2.bits() == 10);
  SubjectMeta tall{1, "F", 20, 50, 163, "R"};
  const auto bits = encode_subject(tall, a2);
  CHECK(std::vector<int>(bits.begin() + 7, bits.end()) == std::vector<int>{1, 0, 0});
  const auto table = build_table(lara_subjects(), a2);
  CHECK(table.row(12).bits == table.row(13).bits);
  CHECK(table.row(10).bits != table.row(14).bits);
  for (const auto &r : table.rows) {
    // one-hot blocks after the gender bit
    CHECK(r.bits[1] + r.bits[2] + r.bits[3] == 1);
    CHECK(r.bits[4] + r.bits[5] + r.bits[6] == 1);
    CHECK(r.bits[7] + r.bits[8] + r.bits[9] == 1);
  }
  CHECK(a2.bit_names()[8] == "height(170,180]");
}

TEST_CASE("boundary values fall on the low side") {
  const auto a1 = AttributeSchema::preset("lara_a1");
  CHECK(encode_subject({1, "F", 40, 70, 170, "R"}, a1) == std::vector<int>{0, 0, 0, 0});
  CHECK(encode_subject({1, "F", 40.5, 70.1, 170.01, "R"}, a1) == std::vector<int>{0, 1, 1, 1});
  const auto a2 = AttributeSchema::preset("lara_a2");
  CHECK(encode_subject({1, "M", 30, 80, 180, "R"}, a2) ==
        std::vector<int>{1, 1, 0, 0, 0, 1, 0, 0, 1, 0});
}

TEST_CASE("PAMAP2 preset carries handedness") {
  const auto p = AttributeSchema::preset("pamap2");
  CHECK(p.bits() == 11);
  CHECK(encode_subject({101, "M", 27, 83, 182, "L"}, p) ==
        std::vector<int>{1, 0, 0, 1, 0, 0, 0, 1, 0, 1, 0});
}

TEST_CASE("encode errors") {
  const auto a1 = AttributeSchema::preset("lara_a1");
  CHECK_THROWS_AS(encode_subject({1, "X", 30, 60, 160, "R"}, a1), DataError);
  AttributeSchema ranged = a1;
  ranged.attributes[1].range = std::pair{16.0, 80.0};
  CHECK_NOTHROW(encode_subject({1, "F", 80, 60, 160, "R"}, ranged));
  CHECK_THROWS_AS(encode_subject({1, "F", 81, 60, 160, "R"}, ranged), DataError);
  CHECK_THROWS_AS(AttributeSchema::preset("nope"), SchemaError);
}

TEST_CASE("schema validation and JSON round trip") {
  auto doc = AttributeSchema::preset("lara_a2").to_json();
  CHECK(AttributeSchema::from_json(doc, "rt").to_json() == doc);
  auto bad = doc;
  bad["attributes"][1]["bounds"] = {40, 30};
  CHECK_THROWS_AS(AttributeSchema::from_json(bad, "bad"), SchemaError);
  bad = doc;
  bad["attributes"][1]["source"] = "shoe_size";
  CHECK_THROWS_AS(AttributeSchema::from_json(bad, "bad"), ConfigError);
  bad = doc;
  bad["attributes"].push_back(doc["attributes"][1]);
  CHECK_THROWS_AS(AttributeSchema::from_json(bad, "bad"), SchemaError);
}

TEST_CASE("build_table rejects schemas without variation") {
  AttributeSchema s = AttributeSchema::preset("lara_a1");
  s.attributes.push_back({Biometric::handedness, {}, {{"L", 0}, {"R", 1}}, false, {}});
  CHECK_THROWS_AS(build_table(lara_subjects(), s), SchemaError);
  CHECK(build_table({}, s).empty());
  CHECK(build_table({lara_subjects()[0]}, s).rows.size() == 1);
  auto dup = lara_subjects();
  dup.push_back(dup[0]);
  CHECK_THROWS_AS(build_table(dup, AttributeSchema::preset("lara_a1")), DataError);
}

TEST_CASE("cosine similarity examples") {
  const std::vector<int> A{1, 0, 1, 0};
  CHECK(cosine_similarity(std::vector<double>{1, 0, 1, 0}, A) == doctest::Approx(1.0));
  CHECK(cosine_similarity(std::vector<double>{1, 0}, std::vector<int>{0, 1}) == 0.0);
  // oracle: 1.7 / (sqrt(1.5) * sqrt(2))
  const double expect = 1.7 / std::sqrt(1.5 * 2.0);
  const double got = cosine_similarity(std::vector<double>{0.9, 0.1, 0.8, 0.2}, A);
  CHECK(got == doctest::Approx(expect).epsilon(1e-12));
  // 0.98150 to four places; the 0.9811 sometimes quoted for this pair is a slip
  CHECK(std::abs(got - 0.9815) < 1e-4);
  CHECK_THROWS_AS(cosine_similarity(std::vector<double>{0, 0}, std::vector<int>{1, 0}), NumericError);
  CHECK_THROWS_AS(cosine_similarity(std::vector<double>{1, 0}, std::vector<int>{0, 0}), NumericError);
  CHECK_THROWS_AS(cosine_similarity(std::vector<double>{1}, std::vector<int>{0, 1}), ConfigError);
}

TEST_CASE("PRM similarity examples") {
  const double got = prm_similarity(std::vector<double>{0.9, 0.1}, std::vector<int>{1, 0});
  CHECK(got == doctest::Approx(2.0 * std::log(0.9)).epsilon(1e-12));
  CHECK(std::abs(got - (-0.2107)) < 1e-4);
  // uninformative prediction scores every row the same
  for (int code = 0; code < 8; ++code) {
    const std::vector<int> A{code & 1, (code >> 1) & 1, (code >> 2) & 1};
    CHECK(prm_similarity(std::vector<double>{0.5, 0.5, 0.5}, A) ==
          doctest::Approx(3.0 * std::log(0.5)));
  }
  // a equal to A (after clamp) is the likelihood peak
  const std::vector<int> A{1, 0, 1};
  const std::vector<double> a{1.0, 0.0, 1.0};
  const double peak = prm_similarity(a, A);
  CHECK(peak == doctest::Approx(3.0 * std::log1p(-kPrmClamp)));
  for (int code = 0; code < 8; ++code) {
    const std::vector<int> B{code & 1, (code >> 1) & 1, (code >> 2) & 1};
    if (B != A)
      CHECK(prm_similarity(a, B) < peak);
  }
}

TEST_CASE("PRM is monotone in each coordinate") {
  const std::vector<int> A{1, 0};
  double prev_up = -INFINITY, prev_down = INFINITY;
  for (double p = 0.01; p < 1.0; p += 0.01) {
    const double up = prm_similarity(std::vector<double>{p, 0.3}, A);
    const double down = prm_similarity(std::vector<double>{0.3, p}, A);
    CHECK(up > prev_up);
    CHECK(down < prev_down);
    prev_up = up;
    prev_down = down;
  }
}

TEST_CASE("nna_identify examples") {
  const auto two = table_of({{1, {1, 0}}, {2, {0, 1}}});
  const auto id = nna_identify(std::vector<double>{0.9, 0.2}, two, Metric::cosine);
  CHECK(id.subjects == std::vector<int>{1});

  const auto lara = build_table(lara_subjects(), AttributeSchema::preset("lara_a1"));
  for (Metric m : {Metric::cosine, Metric::prm})
    CHECK(nna_identify(std::vector<double>{1, 1, 1, 1}, lara, m).subjects ==
          std::vector<int>{10, 14});
  CHECK(nna_identify(std::vector<double>{0.1, 0.2, 0.1, 0.05}, lara, Metric::prm).subjects ==
        std::vector<int>{12, 13});

  const auto single = table_of({{5, {0, 1, 1}}});
  CHECK(nna_identify(std::vector<double>{0.3, 0.01, 0.9}, single, Metric::cosine).subjects ==
        std::vector<int>{5});
  CHECK(nna_identify(std::vector<double>{0.3, 0.01, 0.9}, single, Metric::prm).subjects ==
        std::vector<int>{5});
  CHECK_THROWS_AS(nna_identify(std::vector<double>{1.0}, AttributeTable{}, Metric::prm), DataError);
}

TEST_CASE("nna_identify equals brute force over the full grid") {
  // every 4-bit row, twice, with shuffled ids
  AttributeTable table;
  for (int code = 0; code < 16; ++code)
    for (int dup = 0; dup < 2; ++dup)
      table.rows.push_back({100 - (code * 2 + dup) * 3,
                            {code & 1, (code >> 1) & 1, (code >> 2) & 1, (code >> 3) & 1}});
  const double levels[] = {0.1, 0.5, 0.9};
  std::size_t checked = 0;
  for (int g = 0; g < 81; ++g) {
    std::vector<double> a(4);
    int r = g;
    for (int i = 0; i < 4; ++i, r /= 3)
      a[i] = levels[r % 3];
    for (Metric m : {Metric::cosine, Metric::prm}) {
      // independent scoring: cosine via explicit norms, PRM via raw probabilities
      std::vector<double> score;
      for (const auto &row : table.rows) {
        double s = 0.0;
        if (m == Metric::cosine) {
          double dot = 0, na = 0, nb = 0;
          for (int i = 0; i < 4; ++i) {
            dot += a[i] * row.bits[i];
            na += a[i] * a[i];
            nb += row.bits[i];
          }
          s = nb == 0 ? 0.0 : dot / std::sqrt(na * nb);
        } else {
          double lik = 1.0;
          for (int i = 0; i < 4; ++i)
            lik *= row.bits[i] ? a[i] : 1.0 - a[i];
          s = std::log(lik);
        }
        score.push_back(s);
      }
      const double best = *std::max_element(score.begin(), score.end());
      std::vector<int> expect;
      for (std::size_t k = 0; k < score.size(); ++k)
        if (std::abs(score[k] - best) <= 1e-12 * std::max(1.0, std::abs(best)))
          expect.push_back(table.rows[k].subject_id);
      std::sort(expect.begin(), expect.end());
      const auto got = nna_identify(a, table, m);
      CHECK(got.subjects == expect);
      CHECK(got.score == doctest::Approx(best).epsilon(1e-12));
      ++checked;
    }
  }
  CHECK(checked == 162);
}

TEST_CASE("argmax invariances") {
  const auto lara = build_table(lara_subjects(), AttributeSchema::preset("lara_a1"));
  const std::vector<std::vector<double>> queries = {
      {0.8, 0.3, 0.6, 0.9}, {0.2, 0.7, 0.1, 0.4}, {0.55, 0.45, 0.5, 0.6}};
  const std::vector<std::size_t> perm{2, 0, 3, 1};
  AttributeTable permuted = lara;
  for (auto &r : permuted.rows) {
    std::vector<int> b(4);
    for (std::size_t i = 0; i < 4; ++i)
      b[i] = r.bits[perm[i]];
    r.bits = b;
  }
  for (const auto &a : queries) {
    std::vector<double> scaled = a;
    for (double &v : scaled)
      v *= 7.5;
    CHECK(nna_identify(a, lara, Metric::cosine).subjects ==
          nna_identify(scaled, lara, Metric::cosine).subjects);
    std::vector<double> pa(4);
    for (std::size_t i = 0; i < 4; ++i)
      pa[i] = a[perm[i]];
    CHECK(nna_identify(a, lara, Metric::prm).subjects ==
          nna_identify(pa, permuted, Metric::prm).subjects);
    const double c = cosine_similarity(a, lara.row(7).bits);
    CHECK(c >= 0.0);
    CHECK(c <= 1.0);
  }
}
