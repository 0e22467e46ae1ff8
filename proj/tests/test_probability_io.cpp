#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>
#include <sstream>

#include "catm/error.hpp"
#include "catm/observables.hpp"
#include "catm/probability_io.hpp"

using namespace catm;

namespace {

ProbabilitySeries random_series(std::mt19937_64& rng, int n, int k) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    ProbabilitySeries s;
    s.populations.resize(n, k);
    for (int c = 0; c < k; ++c) {
        s.times.push_back(0.37 * c);
        for (int j = 0; j < n; ++j) s.populations(j, c) = u(rng) * std::pow(10.0, -12.0 * u(rng));
        s.dissociation.push_back(u(rng));
        s.norm.push_back(1.0 - 1e-3 * u(rng));
    }
    return s;
}

size_t count_lines(const std::string& text) {
    size_t n = 0;
    std::istringstream in(text);
    for (std::string line; std::getline(in, line);) ++n;
    return n;
}

}  // namespace

TEST_CASE("single record gives a header and one row") {
    std::mt19937_64 rng(1);
    const ProbabilitySeries s = random_series(rng, 3, 1);
    const std::string text = format_probabilities(s);
    CHECK(count_lines(text) == 2);
    CHECK(text.rfind("t,P_0,P_1,P_2,P_diss,norm\n", 0) == 0);
}

TEST_CASE("round trip within the printed precision") {
    std::mt19937_64 rng(2);
    const ProbabilitySeries s = random_series(rng, 5, 17);
    const ProbabilitySeries back = parse_probabilities(format_probabilities(s));
    REQUIRE(back.size() == s.size());
    REQUIRE(back.n_states() == 5);
    for (size_t c = 0; c < s.size(); ++c) {
        CHECK(std::abs(back.times[c] - s.times[c]) <= 1e-11 * std::max(1.0, s.times[c]));
        CHECK(std::abs(back.dissociation[c] - s.dissociation[c]) <= 1e-11 * s.dissociation[c]);
        CHECK(std::abs(back.norm[c] - s.norm[c]) <= 1e-11);
        for (int j = 0; j < 5; ++j) {
            const double a = s.populations(j, static_cast<Eigen::Index>(c));
            CHECK(std::abs(back.populations(j, static_cast<Eigen::Index>(c)) - a) <= 1e-11 * a);
        }
    }
    CHECK(format_probabilities(back) == format_probabilities(s));
}

TEST_CASE("file round trip") {
    std::mt19937_64 rng(3);
    const ProbabilitySeries s = random_series(rng, 2, 4);
    const auto path = std::filesystem::temp_directory_path() / "catm_probability_io_test.csv";
    emit_probabilities(s, path.string());
    const ProbabilitySeries back = read_probabilities(path.string());
    CHECK(format_probabilities(back) == format_probabilities(s));
    std::filesystem::remove(path);
    CHECK_THROWS_AS(read_probabilities(path.string()), Error);
}

TEST_CASE("records are validated") {
    std::mt19937_64 rng(4);
    ProbabilitySeries s = random_series(rng, 2, 3);
    CHECK_NOTHROW(validate_records(s));
    s.populations(1, 1) = -1e-6;
    CHECK_THROWS_AS(validate_records(s), Error);
    s.populations(1, 1) = NAN;
    CHECK_THROWS_AS(validate_records(s), Error);
    CHECK_THROWS_AS(parse_probabilities("t,P_0,P_diss,norm\n0.0,abc,0,1\n"), Error);
    CHECK_THROWS_AS(parse_probabilities("time,P_0\n"), Error);
}

TEST_CASE("transition probabilities from a wavefunction series") {
    WavefunctionSeries w;
    w.times = {0.0, 1.0};
    w.states.resize(3, 2);
    w.states.col(0) << 1.0, 0.0, 0.0;
    w.states.col(1) << std::complex<double>(0.6, 0.0), std::complex<double>(0.0, 0.5), 0.3;
    const ProbabilitySeries p = transition_probabilities(w, {0, 1});
    CHECK(p.dissociation[0] == 0.0);
    CHECK(std::abs(p.populations(1, 1) - 0.25) < 1e-15);
    CHECK(std::abs(p.dissociation[1] - (1.0 - 0.36 - 0.25)) < 1e-15);
    CHECK(std::abs(p.norm[1] - (0.36 + 0.25 + 0.09)) < 1e-15);
    Eigen::MatrixXcd metric = Eigen::MatrixXcd::Identity(3, 3) * 4.0;
    const ProbabilitySeries q = transition_probabilities(w, {0, 1}, metric);
    CHECK(std::abs(q.norm[1] - 4.0 * p.norm[1]) < 1e-14);
}
