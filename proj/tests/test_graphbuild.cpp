#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "gcpred/array.hpp"
#include "gcpred/graph.hpp"

using namespace gcpred;

namespace {

Array panel_from_columns(const std::vector<std::vector<double>>& cols) {
    const std::size_t rows = cols.front().size();
    Array p({rows, cols.size()});
    for (std::size_t j = 0; j < cols.size(); ++j)
        for (std::size_t i = 0; i < rows; ++i) p.at(i, j) = cols[j][i];
    return p;
}

// independent straight-formula Pearson for cross-checks
double pearson_ref(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    return sxy / std::sqrt(sxx * syy);
}

}  // namespace

TEST(Pearson, AffineAndSignCases) {
    std::vector<double> f1{1, 2, 5, 3, 9, 4};
    std::vector<double> f2(f1.size()), f3(f1.size());
    for (std::size_t i = 0; i < f1.size(); ++i) {
        f2[i] = 2.0 * f1[i] + 3.0;
        f3[i] = -f1[i];
    }
    auto corr = pearson_matrix(panel_from_columns({f1, f2, f3}), f1.size());
    EXPECT_NEAR(corr.at(0, 1), 1.0, 1e-12);
    EXPECT_NEAR(corr.at(0, 2), -1.0, 1e-12);
    EXPECT_DOUBLE_EQ(corr.at(1, 1), 1.0);
}

TEST(Pearson, HandComputedValue) {
    // hand derivation for columns [1,2,3,4] and [1,2,2,4]:
    // centered dot 4.5, norms 5 and 4.75 -> r = 4.5/sqrt(23.75)
    auto corr = pearson_matrix(panel_from_columns({{1, 2, 3, 4}, {1, 2, 2, 4}}), 4);
    EXPECT_NEAR(corr.at(0, 1), 4.5 / std::sqrt(23.75), 1e-14);
    EXPECT_NEAR(corr.at(0, 1), 0.923380516877113, 1e-12);
}

TEST(Pearson, ZeroVarianceColumnGetsZero) {
    auto corr = pearson_matrix(panel_from_columns({{1, 2, 3}, {5, 5, 5}}), 3);
    EXPECT_DOUBLE_EQ(corr.at(0, 1), 0.0);
    EXPECT_DOUBLE_EQ(corr.at(1, 1), 1.0);  // diagonal stays 1 by definition
}

TEST(Pearson, TooFewRowsThrows) {
    EXPECT_THROW(pearson_matrix(panel_from_columns({{1}, {2}}), 1), DataError);
}

TEST(ThresholdGraph, AnticorrelatedPairPlusNoise) {
    std::vector<double> f1{0.2, -1.4, 0.9, 2.1, -0.6, 0.4, -1.1, 1.6};
    std::vector<double> f2(f1.size());
    for (std::size_t i = 0; i < f1.size(); ++i) f2[i] = -f1[i];
    std::vector<double> f3{0.5, 0.4, -0.9, 0.1, 0.2, -0.3, 0.6, -0.2};
    ASSERT_LT(std::abs(pearson_ref(f1, f3)), 0.7);
    ASSERT_LT(std::abs(pearson_ref(f2, f3)), 0.7);

    auto g = threshold_graph(pearson_matrix(panel_from_columns({f1, f2, f3}), f1.size()), 0.7);
    ASSERT_EQ(g.edge_count(), 1u);
    EXPECT_EQ(g.edges[0], (std::pair<std::uint32_t, std::uint32_t>{0, 1}));
    EXPECT_EQ(g.degree[2], 0u);
}

TEST(ThresholdGraph, SignedVsAbsolute) {
    std::vector<double> f1{0.2, -1.4, 0.9, 2.1, -0.6, 0.4, -1.1, 1.6};
    std::vector<double> f2(f1.size());
    for (std::size_t i = 0; i < f1.size(); ++i) f2[i] = -f1[i];
    auto corr = pearson_matrix(panel_from_columns({f1, f2}), f1.size());
    EXPECT_EQ(threshold_graph(corr, 0.7, false).edge_count(), 1u);
    EXPECT_EQ(threshold_graph(corr, 0.7, true).edge_count(), 0u);  // r = -1 not > 0.7
}

TEST(ThresholdGraph, BoundaryTauOne) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> d(-1, 1);
    std::vector<std::vector<double>> cols(4, std::vector<double>(12));
    for (auto& c : cols)
        for (auto& v : c) v = d(rng);
    auto g = threshold_graph(pearson_matrix(panel_from_columns(cols), 12), 1.0);
    EXPECT_EQ(g.edge_count(), 0u);
}

TEST(ThresholdGraph, IdenticalFeaturesGiveCompleteGraph) {
    std::vector<double> f{1, 4, 2, 8, 5};
    auto g = threshold_graph(pearson_matrix(panel_from_columns({f, f, f, f}), 5), 0.7);
    EXPECT_EQ(g.edge_count(), 6u);  // C(4,2)
    for (auto d : g.degree) EXPECT_EQ(d, 3u);
}

TEST(ThresholdGraph, InvalidTauThrows) {
    auto corr = pearson_matrix(panel_from_columns({{1, 2, 3}, {3, 1, 2}}), 3);
    EXPECT_THROW(threshold_graph(corr, 0.0), ConfigError);
    EXPECT_THROW(threshold_graph(corr, 1.5), ConfigError);
}

TEST(ThresholdGraph, MonotoneInTau) {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> d(0, 1);
    std::vector<std::vector<double>> cols(8, std::vector<double>(20));
    // correlated blocks: columns 2k+1 are noisy copies of columns 2k
    for (std::size_t j = 0; j < 8; j += 2) {
        for (auto& v : cols[j]) v = d(rng);
        for (std::size_t i = 0; i < 20; ++i) cols[j + 1][i] = cols[j][i] + 0.3 * d(rng);
    }
    auto corr = pearson_matrix(panel_from_columns(cols), 20);
    for (double lo : {0.1, 0.3, 0.5}) {
        auto g_lo = threshold_graph(corr, lo);
        auto g_hi = threshold_graph(corr, lo + 0.3);
        for (const auto& e : g_hi.edges) {
            EXPECT_TRUE(std::find(g_lo.edges.begin(), g_lo.edges.end(), e) != g_lo.edges.end());
        }
    }
}

TEST(ThresholdGraph, AffineRescalingInvariance) {
    std::mt19937_64 rng(13);
    std::normal_distribution<double> d(0, 1);
    std::vector<std::vector<double>> cols(6, std::vector<double>(30));
    for (std::size_t j = 0; j < 6; j += 2) {
        for (auto& v : cols[j]) v = d(rng);
        for (std::size_t i = 0; i < 30; ++i) cols[j + 1][i] = cols[j][i] + 0.2 * d(rng);
    }
    auto base = threshold_graph(pearson_matrix(panel_from_columns(cols), 30), 0.7);

    auto scaled = cols;
    for (std::size_t j = 0; j < 6; ++j) {
        const double slope = (j % 2 == 0) ? 3.5 : -0.25;  // negative slope too, |.| threshold
        for (auto& v : scaled[j]) v = slope * v + 7.0;
    }
    auto g2 = threshold_graph(pearson_matrix(panel_from_columns(scaled), 30), 0.7);
    EXPECT_EQ(base.edges, g2.edges);
}

TEST(GraphStats, HandCases) {
    auto empty = FeatureGraph::from_edges(5, {});
    auto s1 = graph_stats(empty);
    EXPECT_EQ(s1.edges, 0u);
    EXPECT_EQ(s1.isolated, 5u);
    EXPECT_EQ(s1.components, 5u);

    auto complete = FeatureGraph::from_edges(4, {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}});
    auto s2 = graph_stats(complete);
    EXPECT_EQ(s2.edges, 6u);
    EXPECT_EQ(s2.components, 1u);

    auto path = FeatureGraph::from_edges(3, {{0, 1}, {1, 2}});
    auto s3 = graph_stats(path);
    EXPECT_EQ(path.degree, (std::vector<std::uint32_t>{1, 2, 1}));
    EXPECT_EQ(s3.components, 1u);
    ASSERT_EQ(s3.component_sizes.size(), 1u);
    EXPECT_EQ(s3.component_sizes[0], 3u);
}
