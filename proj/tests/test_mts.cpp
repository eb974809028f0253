#include <gtest/gtest.h>

#include <cmath>

#include "support.hpp"
#include "tck/error.hpp"
#include "tck/mts.hpp"

using namespace tck;
using tck::fixtures::random_dataset;

namespace {

// Pooled observed mean and population std of attribute v.
std::pair<double, double> pooled(const Dataset& d, int v) {
  double sum = 0.0;
  double n = 0.0;
  for (const auto& r : d.records) {
    for (int t = 0; t < r.length(); ++t) {
      if (r.observed(v, t)) {
        sum += r.values(v, t);
        n += 1.0;
      }
    }
  }
  const double mean = sum / n;
  double ss = 0.0;
  for (const auto& r : d.records) {
    for (int t = 0; t < r.length(); ++t) {
      if (r.observed(v, t)) ss += (r.values(v, t) - mean) * (r.values(v, t) - mean);
    }
  }
  return {mean, std::sqrt(ss / n)};
}

Dataset constant_pair(double a, double b, int t) {
  Dataset d;
  d.records.push_back(make_record("a", Matrix::Constant(1, t, a)));
  d.records.push_back(make_record("b", Matrix::Constant(1, t, b)));
  return d;
}

}  // namespace

TEST(Record, ValidateRejectsShapeAndMaskProblems) {
  MtsRecord r = make_record("x", Matrix::Zero(2, 3));
  EXPECT_NO_THROW(r.validate());
  r.mask(0, 0) = 2;
  EXPECT_THROW(r.validate(), DataError);
  r.mask = Mask::Ones(3, 3);
  EXPECT_THROW(r.validate(), DataError);
}

TEST(Dataset, LabelsMustAlign) {
  Dataset d = constant_pair(0.0, 1.0, 3);
  d.labels = std::vector<int>{1};
  EXPECT_THROW(d.validate(), DataError);
  d.labels = std::vector<int>{1, 2};
  EXPECT_NO_THROW(d.validate());
}

TEST(Standardize, TwoPointAttributeMapsToPlusMinusOne) {
  const auto s = standardize(constant_pair(1.0, 3.0, 4));
  for (int t = 0; t < 4; ++t) {
    EXPECT_DOUBLE_EQ(s.records[0].values(0, t), -1.0);
    EXPECT_DOUBLE_EQ(s.records[1].values(0, t), 1.0);
  }
}

TEST(Standardize, PooledMomentsWithMissingCells) {
  Rng rng(11);
  for (int rep = 0; rep < 10; ++rep) {
    Dataset d = random_dataset(rng, 15, 3, 12, 0.2);
    for (auto& r : d.records) r.values.array() = r.values.array() * 3.0 + 7.0;
    const auto s = standardize(d);
    for (int v = 0; v < 3; ++v) {
      const auto [mean, sd] = pooled(s, v);
      EXPECT_LT(std::abs(mean), 1e-9);
      EXPECT_NEAR(sd, 1.0, 1e-9);
    }
    for (std::size_t i = 0; i < d.records.size(); ++i) {
      EXPECT_EQ(s.records[i].mask, d.records[i].mask);
    }
  }
}

TEST(Standardize, IdempotentOnMoments) {
  Rng rng(12);
  const auto once = standardize(random_dataset(rng, 10, 2, 8, 0.1));
  const auto twice = standardize(once);
  for (int v = 0; v < 2; ++v) {
    const auto [mean, sd] = pooled(twice, v);
    EXPECT_LT(std::abs(mean), 1e-9);
    EXPECT_NEAR(sd, 1.0, 1e-9);
  }
  for (std::size_t i = 0; i < once.records.size(); ++i) {
    const auto& a = once.records[i];
    const auto& b = twice.records[i];
    for (int v = 0; v < 2; ++v) {
      for (int t = 0; t < 8; ++t) {
        if (a.observed(v, t)) EXPECT_NEAR(a.values(v, t), b.values(v, t), 1e-9);
      }
    }
  }
}

TEST(Standardize, ZeroVarianceNamesAttribute) {
  Dataset d = constant_pair(2.0, 2.0, 3);
  d.attribute_names = {"pressure"};
  try {
    standardize(d);
    FAIL() << "expected an error";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("pressure"), std::string::npos) << e.what();
  }
}

TEST(Resample, TargetLengthFormula) {
  EXPECT_EQ(resampled_length(315, 25), 25);
  EXPECT_EQ(resampled_length(24, 25), 24);
  EXPECT_EQ(resampled_length(50, 25), 25);
  EXPECT_EQ(resampled_length(51, 25), 17);
  EXPECT_EQ(resampled_length(1, 25), 1);
}

TEST(Resample, ShortSeriesUnchanged) {
  Rng rng(13);
  const auto d = random_dataset(rng, 4, 2, 24, 0.2);
  const auto r = resample_length(d, 25);
  for (std::size_t i = 0; i < d.records.size(); ++i) {
    EXPECT_EQ(r.records[i].mask, d.records[i].mask);
    for (int v = 0; v < 2; ++v) {
      for (int t = 0; t < 24; ++t) {
        if (d.records[i].observed(v, t)) {
          EXPECT_EQ(r.records[i].values(v, t), d.records[i].values(v, t));
        }
      }
    }
  }
}

TEST(Resample, WindowMeanOverObservedCells) {
  // 6 -> 2 windows of three cells: {2, 4, missing} and {missing x3}.
  Matrix x(1, 6);
  x << 2.0, 4.0, 9.0, 1.0, 1.0, 1.0;
  MtsRecord r = make_record("a", x);
  r.mask(0, 2) = 0;
  r.values(0, 2) = std::nan("");
  for (int t = 3; t < 6; ++t) {
    r.mask(0, t) = 0;
    r.values(0, t) = std::nan("");
  }
  Dataset d;
  d.records.push_back(r);
  const auto out = resample_to(d, 2);
  ASSERT_EQ(out.length(), 2);
  EXPECT_DOUBLE_EQ(out.records[0].values(0, 0), 3.0);
  EXPECT_EQ(out.records[0].mask(0, 0), 1);
  EXPECT_EQ(out.records[0].mask(0, 1), 0);
}

TEST(Resample, VariableLengthsReachCommonLength) {
  Dataset d;
  d.records.push_back(make_record("long", Matrix::Ones(1, 315)));
  d.records.push_back(make_record("short", Matrix::Ones(1, 100)));
  const auto out = resample_length(d, 25);
  EXPECT_TRUE(out.uniform_length());
  EXPECT_EQ(out.length(), 25);
}

TEST(Moments, ConstantSeriesHitFloor) {
  const auto d = constant_pair(4.0, 4.0, 5);
  const std::vector<int> attrs{0};
  const auto m = empirical_moments(d, attrs, TimeSegment{0, 5});
  EXPECT_TRUE((m.means.array() == 4.0).all());
  EXPECT_DOUBLE_EQ(m.stds(0), kStdFloor);
}

TEST(Moments, PopulationConvention) {
  const auto d = constant_pair(0.0, 2.0, 3);
  const std::vector<int> attrs{0};
  const auto m = empirical_moments(d, attrs, TimeSegment{0, 3});
  EXPECT_TRUE((m.means.array() == 1.0).all());
  EXPECT_DOUBLE_EQ(m.stds(0), 1.0);
}

TEST(Moments, MatchDirectLoop) {
  Rng rng(14);
  for (int rep = 0; rep < 20; ++rep) {
    const auto d = random_dataset(rng, 8, 3, 10, 0.3);
    const std::vector<int> attrs{2, 0};
    const TimeSegment seg{3, 5};
    const auto m = empirical_moments(d, attrs, seg);
    for (std::size_t a = 0; a < attrs.size(); ++a) {
      const int v = attrs[a];
      double all_sum = 0.0;
      double all_n = 0.0;
      for (int t = seg.start; t < seg.end(); ++t) {
        double sum = 0.0;
        double n = 0.0;
        for (const auto& r : d.records) {
          if (r.observed(v, t)) {
            sum += r.values(v, t);
            n += 1.0;
          }
        }
        EXPECT_NEAR(m.means(static_cast<Eigen::Index>(a), t - seg.start), sum / n, 1e-12);
        all_sum += sum;
        all_n += n;
      }
      const double mean = all_sum / all_n;
      double ss = 0.0;
      for (int t = seg.start; t < seg.end(); ++t) {
        for (const auto& r : d.records) {
          if (r.observed(v, t)) ss += (r.values(v, t) - mean) * (r.values(v, t) - mean);
        }
      }
      EXPECT_NEAR(m.stds(static_cast<Eigen::Index>(a)), std::sqrt(ss / all_n), 1e-12);
    }
  }
}

TEST(Moments, UnobservedCellIsReported) {
  Dataset d = constant_pair(0.0, 1.0, 4);
  for (auto& r : d.records) {
    r.mask(0, 2) = 0;
    r.values(0, 2) = std::nan("");
  }
  const std::vector<int> attrs{0};
  try {
    empirical_moments(d, attrs, TimeSegment{0, 4});
    FAIL() << "expected an error";
  } catch (const DataError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("time 2"), std::string::npos) << msg;
  }
}

TEST(Inject, ZeroRateIsIdentity) {
  Rng rng(15);
  const auto d = random_dataset(rng, 6, 2, 7, 0.2);
  for (auto p : {MissingPattern::kMcar, MissingPattern::kMar, MissingPattern::kMnar}) {
    const auto out = inject_missing(d, p, 0.0, 9);
    for (std::size_t i = 0; i < d.records.size(); ++i) {
      EXPECT_EQ(out.records[i].mask, d.records[i].mask);
    }
  }
}

TEST(Inject, McarRateByLawOfLargeNumbers) {
  Dataset d;
  for (int i = 0; i < 100; ++i) {
    d.records.push_back(make_record("s" + std::to_string(i), Matrix::Zero(10, 100)));
  }
  const auto out = inject_missing(d, MissingPattern::kMcar, 0.5, 123);
  EXPECT_NEAR(missing_fraction(out), 0.5, 0.01);
}

TEST(Inject, MnarCertainRemovesExactlyHighCells) {
  Rng rng(16);
  const auto d = random_dataset(rng, 20, 2, 10, 0.1);
  const auto out = inject_missing(d, MissingPattern::kMnar, 1.0, 4);
  for (std::size_t i = 0; i < d.records.size(); ++i) {
    const auto& a = d.records[i];
    const auto& b = out.records[i];
    for (int v = 0; v < 2; ++v) {
      for (int t = 0; t < 10; ++t) {
        if (!a.observed(v, t)) {
          EXPECT_FALSE(b.observed(v, t));
        } else {
          EXPECT_EQ(b.observed(v, t), !(a.values(v, t) > 0.5));
        }
      }
    }
  }
}

TEST(Inject, MarConditionsOnPairedAttribute) {
  Rng rng(17);
  const auto d = random_dataset(rng, 20, 3, 10, 0.0);
  const auto out = inject_missing(d, MissingPattern::kMar, 1.0, 4);
  for (std::size_t i = 0; i < d.records.size(); ++i) {
    for (int v = 0; v < 3; ++v) {
      const int j = (v + 1) % 3;
      for (int t = 0; t < 10; ++t) {
        EXPECT_EQ(out.records[i].observed(v, t), !(d.records[i].values(j, t) > 0.5));
      }
    }
  }
}

TEST(Inject, MarNeedsTwoAttributes) {
  EXPECT_THROW(inject_missing(constant_pair(0, 1, 3), MissingPattern::kMar, 0.3, 1),
               ConfigError);
}

TEST(Inject, DeterministicAndMonotone) {
  Rng rng(18);
  const auto d = random_dataset(rng, 10, 2, 10, 0.2);
  const auto a = inject_missing(d, MissingPattern::kMcar, 0.3, 77);
  const auto b = inject_missing(d, MissingPattern::kMcar, 0.3, 77);
  const auto more = inject_missing(d, MissingPattern::kMcar, 0.6, 77);
  for (std::size_t i = 0; i < d.records.size(); ++i) {
    EXPECT_EQ(a.records[i].mask, b.records[i].mask);
    // Never un-misses a cell, and same-seed masks nest across rates.
    EXPECT_TRUE(((a.records[i].mask.array() <= d.records[i].mask.array())).all());
    EXPECT_TRUE(((more.records[i].mask.array() <= a.records[i].mask.array())).all());
  }
}

TEST(Inject, PatternNames) {
  EXPECT_EQ(parse_missing_pattern("MCAR"), MissingPattern::kMcar);
  EXPECT_EQ(parse_missing_pattern("mnar"), MissingPattern::kMnar);
  EXPECT_EQ(to_string(MissingPattern::kMar), "mar");
  EXPECT_THROW(parse_missing_pattern("sometimes"), ConfigError);
}

TEST(Concatenate, AttributesBecomeOneLongSeries) {
  Matrix x(2, 3);
  x << 1, 2, 3, 4, 5, 6;
  Dataset d;
  d.records.push_back(make_record("a", x));
  d.labels = std::vector<int>{5};
  const auto u = concatenate_attributes(d);
  ASSERT_EQ(u.n_attributes(), 1);
  ASSERT_EQ(u.length(), 6);
  for (int t = 0; t < 6; ++t) EXPECT_EQ(u.records[0].values(0, t), t + 1);
  EXPECT_EQ(*u.labels, std::vector<int>{5});
}

TEST(Restrict, BlockLayoutZeroesMissingCells) {
  Rng rng(19);
  const auto d = random_dataset(rng, 5, 3, 6, 0.4);
  const std::vector<int> series{4, 1};
  const std::vector<int> attrs{2, 0};
  const auto b = restrict_records(d.records, series, attrs, TimeSegment{1, 4});
  ASSERT_EQ(b.n_series(), 2);
  ASSERT_EQ(b.n_attributes(), 2);
  ASSERT_EQ(b.length(), 4);
  for (int i = 0; i < 2; ++i) {
    for (int a = 0; a < 2; ++a) {
      for (int t = 0; t < 4; ++t) {
        const auto& r = d.records[static_cast<std::size_t>(series[static_cast<std::size_t>(i)])];
        const int v = attrs[static_cast<std::size_t>(a)];
        const bool obs = r.observed(v, t + 1);
        EXPECT_EQ(b.mask[static_cast<std::size_t>(a)](i, t), obs ? 1.0 : 0.0);
        EXPECT_EQ(b.values[static_cast<std::size_t>(a)](i, t), obs ? r.values(v, t + 1) : 0.0);
      }
    }
  }
}
