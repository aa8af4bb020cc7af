#include <gtest/gtest.h>
#include <zlib.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include "qdf/charts/charts.hpp"
#include "qdf/data/io.hpp"
#include "qdf/data/synthetic.hpp"
#include "qdf/errors.hpp"
#include "support/oracles.hpp"

namespace {

using namespace qdf;

const std::filesystem::path kGoldenDir = std::filesystem::path(QDF_SOURCE_DIR) / "tests/data";

std::string read_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::uint8_t> raster(const std::vector<double>& v, std::size_t h, std::size_t w) {
  std::vector<std::uint8_t> out(h * w);
  rasterize_polyline_into(v, h, w, out);
  return out;
}

TEST(IntervalSample, Examples) {
  std::vector<double> forty(40);
  for (std::size_t i = 0; i < 40; ++i) forty[i] = static_cast<double>(i) * 0.5;
  EXPECT_EQ(interval_sample(forty, 100), forty);
  EXPECT_EQ(interval_sample(forty, 40), forty);
  const std::vector<double> ten = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  EXPECT_EQ(interval_sample(ten, 5), (std::vector<double>{0, 2, 4, 6, 8}));
  EXPECT_THROW(interval_sample(std::vector<double>{}, 5), ValidationError);
  EXPECT_THROW(interval_sample(ten, 1), ValidationError);
}

TEST(IntervalSample, MatchesSearchOracleExhaustively) {
  for (std::size_t n = 1; n <= 64; ++n) {
    std::vector<double> s(n);
    for (std::size_t i = 0; i < n; ++i) s[i] = static_cast<double>(i * i) + 0.25;
    for (std::size_t m = 2; m <= 70; ++m) {
      const auto got = interval_sample(s, m);
      ASSERT_EQ(got, qdf::testing::naive_interval_sample(s, m)) << n << " " << m;
      ASSERT_EQ(got.size(), std::min(n, m));
      EXPECT_EQ(got.front(), s.front());
    }
  }
}

TEST(IntervalSample, RandomCasesAreOrderedSubsequences) {
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<std::size_t> len(1, 3000), cap(2, 600);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> s(len(rng));
    for (std::size_t i = 0; i < s.size(); ++i) s[i] = static_cast<double>(i);  // value == index
    const std::size_t m = cap(rng);
    const auto got = interval_sample(s, m);
    ASSERT_EQ(got, qdf::testing::naive_interval_sample(s, m));
    for (std::size_t i = 1; i < got.size(); ++i) EXPECT_LT(got[i - 1], got[i]);
  }
}

TEST(Rasterize, FlatLineFillsOneRow) {
  for (std::size_t p : {2u, 3u, 17u, 100u}) {
    const std::size_t h = 9, w = 13;
    const auto img = raster(std::vector<double>(p, 0.5), h, w);
    const std::size_t row = (h - 1) - static_cast<std::size_t>(std::lround(0.5 * (h - 1)));
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) EXPECT_EQ(img[y * w + x], y == row ? 1 : 0) << y << "," << x;
  }
}

TEST(Rasterize, TwoPointDiagonal) {
  const auto img = raster({0.0, 1.0}, 4, 4);
  // rows top to bottom; the line runs from bottom-left to top-right
  const std::vector<std::uint8_t> expect = {0, 0, 0, 1,  //
                                            0, 0, 1, 0,  //
                                            0, 1, 0, 0,  //
                                            1, 0, 0, 0};
  EXPECT_EQ(img, expect);
}

TEST(Rasterize, ShallowSegmentHandRun) {
  // (x,y) from (0,2) to (4,0) on a 3x5 canvas. With dx=4, dy=-2 the error
  // term starts at 2 and Bresenham visits (0,2) (1,1) (2,1) (3,0) (4,0).
  const auto img = raster({0.0, 1.0}, 3, 5);
  const std::vector<std::uint8_t> expect = {0, 0, 0, 1, 1,  //
                                            0, 1, 1, 0, 0,  //
                                            1, 0, 0, 0, 0};
  EXPECT_EQ(img, expect);
}

TEST(Rasterize, SinglePointUsesCentreColumn) {
  const auto img = raster({1.0}, 5, 6);
  for (std::size_t i = 0; i < img.size(); ++i) EXPECT_EQ(img[i], i == 3 ? 1 : 0);
}

TEST(Rasterize, BinaryConnectedAndCoversEndpoints) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> pts(1, 120), side(1, 64);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t p = pts(rng), h = side(rng), w = side(rng);
    std::vector<double> v(p);
    for (auto& x : v) x = u(rng);
    const auto img = raster(v, h, w);
    std::size_t set = 0;
    for (auto px : img) {
      ASSERT_TRUE(px == 0 || px == 1);
      set += px;
    }
    // Every sample point is lit.
    for (std::size_t i = 0; i < p; ++i) {
      const std::size_t col = p == 1 ? w / 2 : static_cast<std::size_t>(std::lround(static_cast<double>(i) * static_cast<double>(w - 1) / static_cast<double>(p - 1)));
      const std::size_t row = (h - 1) - static_cast<std::size_t>(std::lround(v[i] * static_cast<double>(h - 1)));
      ASSERT_EQ(img[row * w + col], 1) << trial << " point " << i;
    }
    // Distinct lit pixels are at least the number of distinct sample pixels.
    EXPECT_GE(set, std::min<std::size_t>(p, w));
    // The lit set of a polyline is 8-connected.
    std::vector<std::uint8_t> seen(img.size(), 0);
    std::vector<std::size_t> stack;
    for (std::size_t i = 0; i < img.size() && stack.empty(); ++i)
      if (img[i]) {
        stack.push_back(i);
        seen[i] = 1;
      }
    std::size_t reached = 0;
    while (!stack.empty()) {
      const std::size_t c = stack.back();
      stack.pop_back();
      ++reached;
      const long cy = static_cast<long>(c / w), cx = static_cast<long>(c % w);
      for (long dy = -1; dy <= 1; ++dy)
        for (long dx = -1; dx <= 1; ++dx) {
          const long y = cy + dy, x = cx + dx;
          if (y < 0 || x < 0 || y >= static_cast<long>(h) || x >= static_cast<long>(w)) continue;
          const std::size_t n = static_cast<std::size_t>(y) * w + static_cast<std::size_t>(x);
          if (img[n] && !seen[n]) {
            seen[n] = 1;
            stack.push_back(n);
          }
        }
    }
    EXPECT_EQ(reached, set) << trial;
  }
}

TEST(Rasterize, RejectsBadInput) {
  EXPECT_THROW(raster({}, 4, 4), ValidationError);
  EXPECT_THROW(raster({0.5, 1.5}, 4, 4), ValidationError);
  EXPECT_THROW(raster({0.5, NAN}, 4, 4), ValidationError);
  const Tensor t = rasterize_polyline(std::vector<double>{0.0, 1.0}, 4, 4);
  EXPECT_EQ(t.shape(), (Shape{4, 4}));
  EXPECT_EQ(t.values()[3], 1.0);
}

RawRecord golden_record() { return load_dataset(kGoldenDir / "golden_record.jsonl").records.at(0); }

TEST(RenderCharts, ShapeOrderAndDeterminism) {
  const RawRecord r = golden_record();
  const std::vector<std::string> sel = {"ind_100", "ind_070"};
  const ChartStack a = render_charts(r, sel, SamplingPolicy{50}, 20, 30);
  EXPECT_EQ(a.channels, 2u);
  EXPECT_EQ(a.images().shape(), (Shape{2, 20, 30}));
  const ChartStack b = render_charts(r, sel, SamplingPolicy{50}, 20, 30);
  EXPECT_EQ(a, b);
  const ChartStack single = render_charts(r, {"ind_070"}, SamplingPolicy{50}, 20, 30);
  EXPECT_TRUE(std::equal(single.pixels.begin(), single.pixels.end(), a.channel(1).begin()));

  std::vector<double> into(2 * 20 * 30);
  render_charts_into(r, selection_indices(sel), SamplingPolicy{50}, 20, 30, into);
  EXPECT_EQ(into, a.images().values());
}

TEST(RenderCharts, UnknownIndicatorIsNamed) {
  const RawRecord r = golden_record();
  try {
    render_charts(r, {"ind_070", "flux_loop_9"}, SamplingPolicy{}, 8, 8);
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("flux_loop_9"), std::string::npos);
  }
  EXPECT_THROW(render_charts(r, {"ind_070"}, SamplingPolicy{1}, 8, 8), ValidationError);
}

TEST(RenderCharts, GoldenImagesAt224) {
  const RawRecord r = golden_record();
  const auto& sel = default_chart_selection();
  const ChartStack stack = render_charts(r, sel, SamplingPolicy{100}, 224, 224);
  ASSERT_EQ(stack.channels, 76u);

  std::map<std::string, std::string> crc_by_name;
  std::ifstream crc_file(kGoldenDir / "golden_charts_crc32.txt");
  for (std::string name, crc; crc_file >> name >> crc;) crc_by_name[name] = crc;
  ASSERT_EQ(crc_by_name.size(), 76u);

  for (std::size_t k = 0; k < stack.channels; ++k) {
    const std::string pgm = encode_pgm(stack.channel(k), 224, 224);
    char hex[9];
    std::snprintf(hex, sizeof hex, "%08lx",
                  crc32(0L, reinterpret_cast<const Bytef*>(pgm.data()), static_cast<uInt>(pgm.size())));
    EXPECT_EQ(hex, crc_by_name[sel[k]]) << sel[k];
    const auto file = kGoldenDir / ("golden_" + sel[k] + ".pgm");
    if (std::filesystem::exists(file)) {
      EXPECT_EQ(pgm, read_bytes(file)) << sel[k];
    }
  }
}

TEST(Pgm, HeaderAndExportNames) {
  const std::vector<std::uint8_t> px = {0, 1, 1, 0, 0, 1};
  const std::string pgm = encode_pgm(px, 2, 3);
  EXPECT_EQ(pgm.substr(0, 11), "P5\n3 2\n255\n");
  EXPECT_EQ(static_cast<unsigned char>(pgm[11]), 0);
  EXPECT_EQ(static_cast<unsigned char>(pgm[12]), 255);
  EXPECT_EQ(pgm.size(), 17u);

  const RawRecord r = golden_record();
  const auto dir = std::filesystem::temp_directory_path() / "qdf_charts_export";
  std::filesystem::remove_all(dir);
  const std::vector<std::string> sel = {"ind_080", "ind_081"};
  const auto paths = export_charts(render_charts(r, sel, SamplingPolicy{}, 16, 16), r.id, sel, dir);
  ASSERT_EQ(paths.size(), 2u);
  EXPECT_EQ(paths[0].filename(), r.id + "_ind_080.pgm");
  EXPECT_EQ(std::filesystem::file_size(paths[1]), 13u + 256u);
  std::filesystem::remove_all(dir);
}

}  // namespace
