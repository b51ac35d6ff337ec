#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>

#include "support.hpp"
#include "wsindy/core_data.hpp"
#include "wsindy/errors.hpp"
#include "wsindy/rng.hpp"

using namespace wsindy;
using testing_support::Gen;

namespace {

Dataset zeros(std::size_t n) {
    Dataset d;
    d.grid = make_grid({{0.0, 1.0}}, {n});
    d.values.assign(n, 0.0);
    return d;
}

Dataset ramp_2d() {
    Dataset d;
    d.grid = make_grid({{-1.0, 1.0}, {0.0, 3.0}}, {5, 7});
    d.state_dim = 2;
    for (std::size_t i = 0; i < 35 * 2; ++i) d.values.push_back(0.25 * static_cast<double>(i) - 3.0);
    d.metadata["system"] = "ramp";
    return d;
}

}  // namespace

TEST_CASE("make_grid derives resolutions") {
    auto g = make_grid({{0.0, 10.0}}, {11});
    CHECK(g.resolution[0] == doctest::Approx(1.0));
    auto g2 = make_grid({{0.0, 1.0}, {0.0, 2.0}}, {3, 5});
    CHECK(g2.resolution[0] == doctest::Approx(0.5));
    CHECK(g2.resolution[1] == doctest::Approx(0.5));
    CHECK(g2.num_points() == 15);
    CHECK(g2.strides() == std::vector<std::size_t>{5, 1});
    CHECK(g2.coordinate(1, 4) == doctest::Approx(2.0));
}

TEST_CASE("make_grid rejects degenerate input") {
    CHECK_THROWS_AS((void)make_grid({{0.0, 1.0}}, {1}), std::invalid_argument);
    CHECK_THROWS_AS((void)make_grid({{1.0, 1.0}}, {4}), std::invalid_argument);
    CHECK_THROWS_AS((void)make_grid({{0.0, 1.0}}, {4, 4}), std::invalid_argument);
}

TEST_CASE("dataset validation catches shape and kind mismatches") {
    Dataset d = zeros(4);
    d.values.pop_back();
    CHECK_THROWS_AS(d.validate(), std::invalid_argument);
    Dataset c = zeros(4);
    c.sigma = 0.1;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}

TEST_CASE("subsample keeps every factor-th point from index 0") {
    Dataset d = zeros(11);
    for (std::size_t i = 0; i < 11; ++i) d.values[i] = static_cast<double>(i);
    Dataset s = subsample(d, {2});
    REQUIRE(s.grid.counts[0] == 6);
    for (std::size_t i = 0; i < 6; ++i) CHECK(s.values[i] == static_cast<double>(2 * i));
    CHECK(s.grid.resolution[0] == doctest::Approx(0.2));
    CHECK(s.grid.extents[0].second == doctest::Approx(1.0));

    Dataset same = subsample(d, {1});
    CHECK(same.values == d.values);
    CHECK_THROWS_AS((void)subsample(d, {0}), std::invalid_argument);
}

TEST_CASE("subsample halving ladder follows powers of two") {
    Dataset d = zeros(250000);
    Dataset s = d;
    for (int k = 0; k < 9; ++k) s = subsample(s, {2});
    const double expected = 250000.0 / 512.0;
    CHECK(std::abs(static_cast<double>(s.grid.counts[0]) - expected) <= 1.0);
}

TEST_CASE("subsample works per axis on multi-component data") {
    Dataset d = ramp_2d();
    Dataset s = subsample(d, {2, 3});
    REQUIRE(s.grid.counts == std::vector<std::size_t>{3, 3});
    // point (x index 2, t index 1) of the coarse grid is (4, 3) of the fine grid
    const std::size_t coarse = 2 * 3 + 1, fine = 4 * 7 + 3;
    CHECK(s.at(coarse, 1) == d.at(fine, 1));
    CHECK(s.metadata.at("system") == "ramp");
}

TEST_CASE("stdev_all is the population deviation") {
    Dataset c = zeros(10);
    for (auto& v : c.values) v = 3.5;
    CHECK(stdev_all(c) == 0.0);
    Dataset pm = zeros(2);
    pm.values = {-1.0, 1.0};
    CHECK(stdev_all(pm) == doctest::Approx(1.0));
}

TEST_CASE("stdev_all is invariant under axis permutation") {
    Gen gen(7);
    Dataset d;
    d.grid = make_grid({{0.0, 1.0}, {0.0, 1.0}}, {6, 9});
    for (int i = 0; i < 54; ++i) d.values.push_back(gen.normal());
    Dataset t;
    t.grid = make_grid({{0.0, 1.0}, {0.0, 1.0}}, {9, 6});
    t.values.resize(54);
    for (std::size_t i = 0; i < 6; ++i)
        for (std::size_t j = 0; j < 9; ++j) t.values[j * 6 + i] = d.values[i * 9 + j];
    CHECK(stdev_all(t) == doctest::Approx(stdev_all(d)).epsilon(1e-14));
}

TEST_CASE("zero noise marks the dataset noisy without changing values") {
    Dataset d = ramp_2d();
    Dataset n = add_noise(d, {NoiseDistribution::gaussian, NoiseLevelMode::absolute_sigma, 0.0, 5});
    CHECK(n.values == d.values);
    CHECK(n.kind == DataKind::noisy);
    CHECK(n.seed == std::optional<std::uint64_t>{5});
}

TEST_CASE("gaussian noise has the requested deviation") {
    Dataset n = add_noise(zeros(1000000), {NoiseDistribution::gaussian, NoiseLevelMode::absolute_sigma, 1.0, 11});
    const double s = stdev_all(n);
    CHECK(s >= 0.995);
    CHECK(s <= 1.005);
}

TEST_CASE("uniform noise has the uniform fourth moment") {
    const double sigma = 0.7;
    Dataset n = add_noise(zeros(1000000), {NoiseDistribution::uniform, NoiseLevelMode::absolute_sigma, sigma, 3});
    double m4 = 0.0, max_abs = 0.0;
    for (double v : n.values) {
        m4 += v * v * v * v;
        max_abs = std::max(max_abs, std::abs(v));
    }
    m4 /= static_cast<double>(n.values.size());
    const double target = 9.0 / 5.0 * std::pow(sigma, 4);
    CHECK(std::abs(m4 - target) / target <= 0.05);
    CHECK(max_abs <= sigma * std::sqrt(3.0));
    CHECK(stdev_all(n) == doctest::Approx(sigma).epsilon(0.01));
}

TEST_CASE("noise is reproducible from its seed and layout order") {
    Dataset d = ramp_2d();
    NoiseSpec spec{NoiseDistribution::gaussian, NoiseLevelMode::absolute_sigma, 0.3, 99};
    Dataset a = add_noise(d, spec), b = add_noise(d, spec);
    CHECK(a.values == b.values);
    const CounterRng rng(99);
    CHECK(a.values[17] == d.values[17] + 0.3 * rng.normal(17));
    spec.seed = 100;
    CHECK(add_noise(d, spec).values != a.values);
}

TEST_CASE("noise ratio scales by the clean deviation") {
    Dataset d = ramp_2d();
    Dataset n = add_noise(d, {NoiseDistribution::gaussian, NoiseLevelMode::noise_ratio, 0.1, 1});
    CHECK(n.sigma == doctest::Approx(0.1 * stdev_all(d)));
    CHECK(n.metadata.count("sigma_nr") == 1);
}

TEST_CASE("add_noise rejects invalid requests") {
    Dataset d = zeros(8);
    CHECK_THROWS_AS((void)add_noise(d, {NoiseDistribution::gaussian, NoiseLevelMode::absolute_sigma, -1.0, 1}),
                    std::invalid_argument);
    Dataset n = add_noise(d, {NoiseDistribution::gaussian, NoiseLevelMode::absolute_sigma, 1.0, 1});
    CHECK_THROWS_AS((void)add_noise(n, {NoiseDistribution::gaussian, NoiseLevelMode::absolute_sigma, 1.0, 1}),
                    std::invalid_argument);
}

TEST_CASE("noising and subsampling commute in distribution") {
    Dataset d = zeros(400);
    for (std::size_t i = 0; i < 400; ++i) d.values[i] = std::sin(0.05 * static_cast<double>(i));
    Dataset base = subsample(d, {4});
    std::vector<double> var_a, var_b;
    for (std::uint64_t s = 0; s < 300; ++s) {
        NoiseSpec spec{NoiseDistribution::gaussian, NoiseLevelMode::absolute_sigma, 0.5, s};
        Dataset a = subsample(add_noise(d, spec), {4});
        Dataset b = add_noise(base, spec);
        std::vector<double> ra, rb;
        for (std::size_t i = 0; i < base.values.size(); ++i) {
            ra.push_back(a.values[i] - base.values[i]);
            rb.push_back(b.values[i] - base.values[i]);
        }
        var_a.push_back(testing_support::sample_variance(ra));
        var_b.push_back(testing_support::sample_variance(rb));
    }
    const double ma = testing_support::sample_mean(var_a), mb = testing_support::sample_mean(var_b);
    const double se = std::sqrt((testing_support::sample_variance(var_a) + testing_support::sample_variance(var_b)) /
                                static_cast<double>(var_a.size()));
    CHECK(std::abs(ma - mb) <= 3.0 * se);
}

TEST_CASE("WSD1 round trip is bit exact") {
    Dataset d = add_noise(ramp_2d(), {NoiseDistribution::uniform, NoiseLevelMode::absolute_sigma, 0.123456789, 42});
    d.values[3] = 1.0 / 3.0;
    d.values[4] = -0.0;
    const std::string bytes = serialize_dataset(d);
    CHECK(std::memcmp(bytes.data(), "WSDATA1\0", 8) == 0);
    Dataset r = deserialize_dataset(bytes);
    CHECK(r.grid.counts == d.grid.counts);
    CHECK(r.grid.extents == d.grid.extents);
    CHECK(r.grid.resolution == d.grid.resolution);
    CHECK(r.state_dim == d.state_dim);
    CHECK(r.kind == d.kind);
    CHECK(r.sigma == d.sigma);
    CHECK(r.seed == d.seed);
    CHECK(r.metadata == d.metadata);
    REQUIRE(r.values.size() == d.values.size());
    CHECK(std::memcmp(r.values.data(), d.values.data(), d.values.size() * sizeof(double)) == 0);

    const auto path = std::filesystem::temp_directory_path() / "wsindy_core_roundtrip.wsd";
    write_dataset(d, path.string());
    Dataset f = read_dataset(path.string());
    CHECK(f.values == d.values);
    std::filesystem::remove(path);
}

TEST_CASE("WSD1 rejects malformed files") {
    const std::string bytes = serialize_dataset(ramp_2d());
    CHECK_THROWS_AS((void)deserialize_dataset(bytes.substr(0, bytes.size() - 3)), FormatError);
    CHECK_THROWS_AS((void)deserialize_dataset("not a dataset"), FormatError);

    // Rewrite the header so the counts no longer match the payload.
    std::uint32_t len = 0;
    std::memcpy(&len, bytes.data() + 8, 4);
    std::string header = bytes.substr(12, len);
    const auto pos = header.find("counts=5,7");
    REQUIRE(pos != std::string::npos);
    header.replace(pos, 10, "counts=5,8");
    std::string bad = bytes.substr(0, 12) + header + bytes.substr(12 + len);
    CHECK_THROWS_AS((void)deserialize_dataset(bad), FormatError);
}
