#include <gtest/gtest.h>

#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "qdf/data/io.hpp"
#include "qdf/data/record.hpp"
#include "qdf/data/synthetic.hpp"
#include "qdf/data/transforms.hpp"
#include "qdf/errors.hpp"

namespace {

using namespace qdf;

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("qdf_data_test_" + name);
}

GeneratorParams small_params(std::size_t count) {
  GeneratorParams p;
  p.count = count;
  p.grid = 11;
  return p;
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);)
    if (!line.empty()) lines.push_back(line);
  return lines;
}

TEST(IndicatorNames, CanonicalListShape) {
  const auto& names = canonical_indicator_names();
  ASSERT_EQ(names.size(), 141u);
  EXPECT_EQ(names.front(), "ind_000");
  EXPECT_EQ(names.back(), "ind_140");
  EXPECT_EQ(indicator_index("ind_077"), 77u);
  EXPECT_THROW(indicator_index("ind_141"), ValidationError);
  const auto& sel = default_chart_selection();
  ASSERT_EQ(sel.size(), 76u);
  EXPECT_EQ(sel.front(), "ind_065");
  EXPECT_EQ(sel.back(), "ind_140");
}

TEST(IndicatorNames, ShippedFilesMatchEmbeddedLists) {
  const std::filesystem::path root = QDF_SOURCE_DIR;
  EXPECT_EQ(read_lines(root / "data/indicators.txt"), canonical_indicator_names());
  EXPECT_EQ(read_lines(root / "data/chart_selection.txt"), default_chart_selection());
}

TEST(Validation, RejectsBadRecords) {
  const RawRecord good = synthesize_dataset(small_params(1), 3).records[0];
  EXPECT_NO_THROW(validate_record(good));

  auto expect_invalid = [](RawRecord r, const std::string& needle) {
    try {
      validate_record(r);
      FAIL() << "expected ValidationError mentioning " << needle;
    } catch (const ValidationError& e) {
      EXPECT_NE(std::string(e.what()).find(needle), std::string::npos) << e.what();
    }
  };
  RawRecord r = good;
  r.q.pop_back();
  expect_invalid(r, "q");
  r = good;
  r.npsip[2] = r.npsip[1];
  expect_invalid(r, "npsip");
  r = good;
  r.indicators[5].clear();
  expect_invalid(r, "ind_005");
  r = good;
  r.indicators[7][0] = std::nan("");
  expect_invalid(r, "ind_007");
  r = good;
  r.npsip.back() = 0.9;
  expect_invalid(r, "npsip");
}

TEST(Validation, DuplicateIdsRejected) {
  Dataset ds = synthesize_dataset(small_params(2), 1);
  ds.records[1].id = ds.records[0].id;
  EXPECT_THROW(validate_dataset(ds), ValidationError);
}

TEST(JsonLines, RoundTripFiftyRecords) {
  const Dataset ds = synthesize_dataset(small_params(50), 11);
  const auto path = temp_path("roundtrip.jsonl");
  save_dataset(ds, path);
  const Dataset back = load_dataset(path);
  ASSERT_EQ(back.size(), 50u);
  for (std::size_t i = 0; i < ds.size(); ++i) EXPECT_EQ(back.records[i], ds.records[i]) << i;
  std::filesystem::remove(path);
}

TEST(JsonLines, MissingIndicatorNamed) {
  const RawRecord rec = synthesize_dataset(small_params(1), 2).records[0];
  std::string line = format_record(rec);
  const std::string key = "\"ind_042\":";
  const auto pos = line.find(key);
  ASSERT_NE(pos, std::string::npos);
  line.replace(pos, key.size(), "\"xxx_042\":");
  try {
    parse_record(line, 1);
    FAIL() << "expected an error";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("ind_042"), std::string::npos) << e.what();
  }
}

TEST(JsonLines, SyntaxErrorCarriesLineNumber) {
  const Dataset ds = synthesize_dataset(small_params(2), 5);
  const auto path = temp_path("broken.jsonl");
  {
    std::ofstream out(path);
    out << format_record(ds.records[0]) << "\n\n{\"id\": \"x\", \"indicators\": [1,\n";
  }
  try {
    load_dataset(path);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
  std::filesystem::remove(path);
}

TEST(JsonLines, AcceptsScientificNotation) {
  RawRecord rec = synthesize_dataset(small_params(1), 9).records[0];
  rec.indicators[0] = {1.5e-3, -2E+2, 3.0};
  std::string line = format_record(rec);
  const RawRecord back = parse_record(line);
  EXPECT_DOUBLE_EQ(back.indicators[0][0], 1.5e-3);
  EXPECT_DOUBLE_EQ(back.indicators[0][1], -200.0);
}

TEST(Synthetic, DeterministicInSeed) {
  const auto p = small_params(20);
  const Dataset a = synthesize_dataset(p, 7);
  const Dataset b = synthesize_dataset(p, 7);
  const Dataset c = synthesize_dataset(p, 8);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a.records[i], b.records[i]);
  EXPECT_NE(a.records[0].q, c.records[0].q);
  EXPECT_NO_THROW(validate_dataset(a));
}

TEST(Synthetic, ProfileWithUnitAlphaIsLinear) {
  const auto x = npsip_grid(101);
  const auto q = q_profile({.q0 = 1.1, .q_edge = 4.2, .alpha = 1.0}, x);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(q[i], 1.1 + 3.1 * x[i], 1e-12);
  EXPECT_DOUBLE_EQ(q.front(), 1.1);
  EXPECT_DOUBLE_EQ(q.back(), 4.2);
}

TEST(Synthetic, ProfileEndpointsAndMonotone) {
  const Dataset ds = synthesize_dataset(small_params(30), 4);
  for (const auto& r : ds.records) {
    EXPECT_GE(r.q.front(), 0.8);
    EXPECT_LE(r.q.front(), 1.2);
    EXPECT_GE(r.q.back(), 3.0);
    EXPECT_LE(r.q.back(), 5.0);
    for (std::size_t i = 1; i < r.q.size(); ++i) EXPECT_GT(r.q[i], r.q[i - 1]);
  }
}

// Solves the 3x3 normal equations of s - fixed = [A B C] theta by Cramer's rule.
std::array<double, 3> least_squares_theta(std::size_t indicator, const Series& s) {
  const auto t = sample_times(s.size());
  double m[3][3] = {}, rhs[3] = {};
  for (std::size_t i = 0; i < s.size(); ++i) {
    const auto b = indicator_basis(indicator, t[i]);
    const double row[3] = {b.q0_term, b.q_edge_term, b.alpha_term};
    const double y = s[i] - b.fixed;
    for (int r = 0; r < 3; ++r) {
      rhs[r] += row[r] * y;
      for (int c = 0; c < 3; ++c) m[r][c] += row[r] * row[c];
    }
  }
  auto det3 = [](const double a[3][3]) {
    return a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) -
           a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0]) +
           a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]);
  };
  const double d = det3(m);
  std::array<double, 3> theta{};
  for (int k = 0; k < 3; ++k) {
    double mk[3][3];
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) mk[r][c] = (c == k) ? rhs[r] : m[r][c];
    theta[static_cast<std::size_t>(k)] = det3(mk) / d;
  }
  return theta;
}

TEST(Synthetic, NoiselessIndicatorsDetermineProfile) {
  auto p = small_params(10);
  p.noise = 0.0;
  const Dataset ds = synthesize_dataset(p, 21);
  const auto& x = ds.records[0].npsip;
  for (const auto& r : ds.records) {
    // ind_139 has length 520 under the default schedule and is always clean.
    const std::size_t j = indicator_index("ind_139");
    ASSERT_EQ(r.indicators[j].size(), 520u);
    const auto theta = least_squares_theta(j, r.indicators[j]);
    EXPECT_NEAR(theta[0], r.q.front(), 1e-6);
    EXPECT_NEAR(theta[1], r.q.back(), 1e-6);
    const auto q = q_profile({theta[0], theta[1], theta[2]}, x);
    for (std::size_t i = 0; i < q.size(); ++i) EXPECT_NEAR(q[i], r.q[i], 1e-6);
  }
}

TEST(Synthetic, DistractorsOnlyOutsideCleanSet) {
  auto p = small_params(40);
  p.noise = 0.0;
  p.distractor_fraction = 0.5;
  const Dataset ds = synthesize_dataset(p, 13);
  std::size_t replaced = 0, candidates = 0;
  for (const auto& r : ds.records) {
    for (std::size_t i = 0; i < kIndicatorCount; ++i) {
      const auto lst = least_squares_theta(i, r.indicators[i]);
      const bool clean_fit = std::abs(lst[0] - r.q.front()) < 1e-6;
      if (i >= 65) {
        EXPECT_TRUE(clean_fit) << r.id << " " << i;
      } else {
        ++candidates;
        if (!clean_fit) ++replaced;
      }
    }
  }
  const double frac = static_cast<double>(replaced) / static_cast<double>(candidates);
  EXPECT_GT(frac, 0.4);
  EXPECT_LT(frac, 0.6);
}

TEST(Synthetic, RejectsBadParams) {
  auto p = small_params(5);
  p.q_edge_min = 1.0;
  EXPECT_THROW(p.validate(), ValidationError);
  p = small_params(5);
  p.noise = -1.0;
  EXPECT_THROW(synthesize_dataset(p, 0), ValidationError);
  p = small_params(5);
  p.distractor_fraction = 1.5;
  EXPECT_THROW(p.validate(), ValidationError);
}

TEST(Normalize, Examples) {
  const std::vector<double> s = {2.0, 4.0, 3.0};
  EXPECT_EQ(normalize_series(s), (std::vector<double>{0.0, 1.0, 0.5}));
  EXPECT_EQ(normalize_series(std::vector<double>{7.0, 7.0}), (std::vector<double>{0.5, 0.5}));
  EXPECT_EQ(normalize_series(std::vector<double>{-3.0}), (std::vector<double>{0.5}));
  EXPECT_THROW(normalize_series(std::vector<double>{}), ValidationError);
  EXPECT_THROW(normalize_series(std::vector<double>{1.0, INFINITY}), ValidationError);
}

TEST(Normalize, RangeIsUnitInterval) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(5.0, 100.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> s(1 + trial * 3);
    for (auto& v : s) v = g(rng);
    const auto n = normalize_series(s);
    for (double v : n) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
    if (s.size() > 1) {
      EXPECT_EQ(*std::min_element(n.begin(), n.end()), 0.0);
      EXPECT_EQ(*std::max_element(n.begin(), n.end()), 1.0);
    }
  }
}

TEST(Split, Counts) {
  Dataset ten = synthesize_dataset(small_params(10), 1);
  auto [train, test] = split_dataset(ten, 0.2, 0);
  EXPECT_EQ(train.size(), 8u);
  EXPECT_EQ(test.size(), 2u);
  EXPECT_EQ(train.split, "train");
  EXPECT_EQ(test.split, "test");

  Dataset big;
  big.records.resize(5753);
  for (std::size_t i = 0; i < big.records.size(); ++i) big.records[i].id = std::to_string(i);
  auto [tr, te] = split_dataset(big, 0.1021, 0);
  EXPECT_EQ(tr.size(), 5166u);
  EXPECT_EQ(te.size(), 587u);

  Dataset twelve_hundred;
  twelve_hundred.records.resize(1200);
  auto [a, b] = split_dataset(twelve_hundred, 1.0 / 6.0, 0);
  EXPECT_EQ(a.size(), 1000u);
  EXPECT_EQ(b.size(), 200u);
}

TEST(Split, DisjointCoveringAndSeeded) {
  const Dataset ds = synthesize_dataset(small_params(30), 2);
  auto [tr1, te1] = split_dataset(ds, 0.3, 5);
  auto [tr2, te2] = split_dataset(ds, 0.3, 5);
  auto [tr3, te3] = split_dataset(ds, 0.3, 6);
  std::set<std::string> ids;
  for (const auto& r : tr1.records) ids.insert(r.id);
  for (const auto& r : te1.records) EXPECT_TRUE(ids.insert(r.id).second);
  EXPECT_EQ(ids.size(), 30u);
  ASSERT_EQ(te1.size(), te2.size());
  for (std::size_t i = 0; i < te1.size(); ++i) EXPECT_EQ(te1.records[i].id, te2.records[i].id);
  bool differs = false;
  for (std::size_t i = 0; i < te1.size(); ++i) differs |= te1.records[i].id != te3.records[i].id;
  EXPECT_TRUE(differs);
  EXPECT_THROW(split_dataset(ds, 0.0, 0), ValidationError);
  EXPECT_THROW(split_dataset(ds, 1.0, 0), ValidationError);
}

TEST(Vectorize, MatchesOracleAt1024) {
  const Dataset ds = synthesize_dataset(small_params(3), 17);
  for (const auto& r : ds.records) {
    std::vector<double> expect;
    for (const auto& s : r.indicators) {
      double lo = s[0], hi = s[0];
      for (double v : s) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      for (double v : s) expect.push_back(hi > lo ? (v - lo) / (hi - lo) : 0.5);
    }
    expect.resize(1024, 0.0);
    const Tensor t = vectorize_raw(r, 1024);
    ASSERT_EQ(t.shape(), (Shape{1024}));
    const auto got = t.values();
    for (std::size_t i = 0; i < 1024; ++i) ASSERT_NEAR(got[i], expect[i], 1e-15) << i;
  }
}

TEST(Vectorize, PadsShortRecordsWithZeros) {
  RawRecord r = synthesize_dataset(small_params(1), 1).records[0];
  for (auto& s : r.indicators) s = {1.0, 3.0};
  const auto v = vectorize_raw(r, 400).values();
  for (std::size_t i = 0; i < 282; ++i) EXPECT_EQ(v[i], i % 2 == 0 ? 0.0 : 1.0);
  for (std::size_t i = 282; i < 400; ++i) EXPECT_EQ(v[i], 0.0);
  EXPECT_THROW(vectorize_raw(r, 140), ValidationError);
  EXPECT_NO_THROW(vectorize_raw(r, 141));
}

}  // namespace
