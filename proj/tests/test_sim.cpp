#include "test_support.hpp"

#include <grpdesc/sim.hpp>

#include <doctest.h>

using namespace grpdesc;
using namespace grpdesc::sim;

TEST_CASE("semiparametric effect functions")
{
    CHECK(semiparametric_effect(3, 0.0) == -1.0);
    CHECK(semiparametric_effect(3, 1.0) == 1.0);
    CHECK(semiparametric_effect(5, 0.5) == -1.0);
    CHECK(semiparametric_effect(6, 0.5) == 1.0);
    CHECK(semiparametric_effect(1, 0.0) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(semiparametric_effect(1, 1.0) == doctest::Approx(-1.0).epsilon(1e-15));
    CHECK(semiparametric_effect(2, 0.0) == doctest::Approx(-1.0).epsilon(1e-15));
    CHECK(semiparametric_effect(2, 1.0) == doctest::Approx(1.0).epsilon(1e-15));
    for (int k = 1; k <= 6; ++k) {
        double lo = 1e9, hi = -1e9;
        for (int i = 0; i <= 1000; ++i) {
            const double v = semiparametric_effect(k, i / 1000.0);
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        CHECK(lo == doctest::Approx(-1.0).epsilon(1e-12));
        CHECK(hi == doctest::Approx(1.0).epsilon(1e-12));
    }
    CHECK_THROWS_AS(semiparametric_effect(7, 0.5), ConfigError);
}

TEST_CASE("B-spline basis")
{
    std::mt19937_64 rng(91);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Vector<double> x(200);
    for (Index i = 0; i < 200; ++i) x(i) = u(rng);
    const auto B = bspline_basis(x);
    CHECK(B.cols() == 6);
    CHECK(B.minCoeff() >= 0.0);
    for (Index i = 0; i < 200; ++i) CHECK(B.row(i).sum() <= 1.0 + 1e-12);
    // the dropped first function is 1 - row sum; it vanishes past the first interior knot
    const Index imax = [&] {
        Index a = 0;
        x.maxCoeff(&a);
        return a;
    }();
    CHECK(B(imax, 5) == doctest::Approx(1.0).epsilon(1e-12));
    Eigen::FullPivLU<Matrix<double>> lu(B);
    CHECK(lu.rank() == 6);
}

TEST_CASE("scenario shapes and truth")
{
    const auto basic = generate(Scenario::defaults(ScenarioKind::Basic));
    CHECK(basic.design.n() == 100);
    CHECK(basic.design.p() == 400);
    CHECK(basic.design.J() == 100);
    const auto& beta = *basic.true_coefficients;
    CHECK((beta.head(20).cwiseAbs().array() == 1.0).all());
    CHECK(beta.tail(380).isZero(0));
    CHECK(beta(0) == 1.0);
    CHECK(beta(1) == -1.0);
    CHECK(beta(2) == 1.0);
    CHECK(beta(3) == -1.0);

    const auto semi = generate(Scenario::defaults(ScenarioKind::Semiparametric));
    CHECK(semi.design.n() == 200);
    CHECK(semi.design.p() == 600);
    CHECK_FALSE(semi.true_coefficients.has_value());
    int causal = 0;
    for (bool c : semi.causal_group) causal += c;
    CHECK(causal == 6);

    const auto snp = generate(Scenario::defaults(ScenarioKind::SNP));
    CHECK(snp.design.n() == 250);
    CHECK(snp.design.p() == 1000);
    CHECK(snp.design.J() == 500);
    causal = 0;
    for (bool c : snp.causal_group) causal += c;
    CHECK(causal == 3);
    for (Index j = 0; j < 500; ++j)
        for (Index i = 0; i < 250; ++i) {
            const double het = snp.design.X(i, 2 * j), hom = snp.design.X(i, 2 * j + 1);
            CHECK(((het == 0.0 || het == 1.0) && (hom == 0.0 || hom == 1.0) && het + hom <= 1.0));
        }
    // genotype frequencies near Hardy-Weinberg at maf 0.3
    const double het = snp.design.X(Eigen::all, Eigen::seq(0, 999, 2)).mean();
    const double hom = snp.design.X(Eigen::all, Eigen::seq(1, 999, 2)).mean();
    CHECK(het == doctest::Approx(0.42).epsilon(0.03));
    CHECK(hom == doctest::Approx(0.09).epsilon(0.05));
}

TEST_CASE("SNP effect coding")
{
    // recessive: genotypes 0 and 1 share a mean
    CHECK(snp_mean_shift(SnpEffect::Recessive, 0, 0.7) == snp_mean_shift(SnpEffect::Recessive, 1, 0.7));
    CHECK(snp_mean_shift(SnpEffect::Recessive, 2, 0.7) == 0.7);
    // dominant: one copy is enough
    CHECK(snp_mean_shift(SnpEffect::Dominant, 1, 0.7) == snp_mean_shift(SnpEffect::Dominant, 2, 0.7));
    CHECK(snp_mean_shift(SnpEffect::Dominant, 0, 0.7) == 0.0);
    CHECK(snp_mean_shift(SnpEffect::Additive, 2, 0.7) == 2 * snp_mean_shift(SnpEffect::Additive, 1, 0.7));
}

TEST_CASE("generation is reproducible from the seed")
{
    for (auto kind : {ScenarioKind::Basic, ScenarioKind::Semiparametric, ScenarioKind::SNP}) {
        auto sc = Scenario::defaults(kind);
        sc.seed = 1234;
        const auto a = generate(sc);
        const auto b = generate(sc);
        CHECK(a.design.X == b.design.X);
        CHECK(a.design.y == b.design.y);
        sc.seed = 1235;
        CHECK(generate(sc).design.y != a.design.y);
    }
}

TEST_CASE("scores")
{
    auto sc = Scenario::defaults(ScenarioKind::Basic);
    sc.effect = 0.8;
    const auto data = generate(sc);
    const auto perfect = score(data, 0.0, *data.true_coefficients);
    CHECK(perfect.rmse == 0.0);
    CHECK(perfect.rme == 0.0);
    CHECK(perfect.model_size_groups == 5);
    CHECK(perfect.true_discoveries == 5);
    CHECK(perfect.false_discoveries == 0);

    const auto null = score(data, 0.0, Vector<double>::Zero(400));
    CHECK(null.rmse == doctest::Approx(0.8 * std::sqrt(20.0 / 400.0)).epsilon(1e-14));
    CHECK(null.model_size_groups == 0);
    CHECK(null.rme == doctest::Approx(std::sqrt(data.true_mean.squaredNorm() / 100)).epsilon(1e-14));

    Vector<double> one = Vector<double>::Zero(400);
    one(399) = 0.1;
    CHECK(score(data, 0.0, one).false_discoveries == 1);
    CHECK_THROWS_AS(score(data, 0.0, Vector<double>::Zero(3)), ConfigError);

    sc.effect = 0.0;
    const auto zero = generate(sc);
    CHECK(zero.true_coefficients->isZero(0));
    CHECK(score(zero, zero.design.y.mean(), Vector<double>::Zero(400)).rmse == 0.0);

    CHECK(oracle_rmse(Scenario::defaults(ScenarioKind::Basic)) == doctest::Approx(std::sqrt(0.05 / 100)));
    CHECK(std::isnan(score(generate(Scenario::defaults(ScenarioKind::SNP)), 0.0, Vector<double>::Zero(1000)).rmse));
}

TEST_CASE("scenario validation")
{
    auto sc = Scenario::defaults(ScenarioKind::Basic);
    sc.n = 1;
    CHECK_THROWS_AS(sc.validate(), ConfigError);
    sc = Scenario::defaults(ScenarioKind::Basic);
    sc.signal_groups = 200;
    CHECK_THROWS_AS(sc.validate(), ConfigError);
    sc = Scenario::defaults(ScenarioKind::Semiparametric);
    sc.J = 4;
    CHECK_THROWS_AS(sc.validate(), ConfigError);
    sc = Scenario::defaults(ScenarioKind::SNP);
    sc.maf = 0.0;
    CHECK_THROWS_AS(sc.validate(), ConfigError);
    sc = Scenario::defaults(ScenarioKind::SNP);
    sc.causal_snps = {0, 600, 2};
    CHECK_THROWS_AS(sc.validate(), ConfigError);
    CHECK(parse_kind("snp") == ScenarioKind::SNP);
    CHECK_THROWS_AS(parse_kind("gwas"), ConfigError);
}

TEST_CASE("small simulation run is deterministic across thread counts")
{
    auto sc = Scenario::defaults(ScenarioKind::Basic);
    sc.n = 60;
    sc.J = 20;
    sc.seed = 3;
    SimControl control;
    control.replicates = 3;
    control.path.n_lambda = 20;
    const auto a = run_simulation(sc, control);
    control.threads = 3;
    const auto b = run_simulation(sc, control);
    REQUIRE(a.records.size() == 9);
    REQUIRE(b.records.size() == 9);
    for (std::size_t i = 0; i < a.records.size(); ++i) {
        CHECK(a.records[i].replicate == b.records[i].replicate);
        CHECK(a.records[i].score.rmse == b.records[i].score.rmse);
        CHECK(a.records[i].lambda == b.records[i].lambda);
    }
    REQUIRE(a.methods.size() == 3);
    for (const auto& m : a.methods) {
        CHECK(m.replicates == 3);
        CHECK(m.rmse_mean >= 0);
    }
}
