#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>

#include "fixtures.hpp"
#include "ftdc/classifiers.hpp"
#include "ftdc/errors.hpp"
#include "oracles.hpp"

using namespace ftdc;

namespace {

Eigen::MatrixXd col(std::initializer_list<double> v) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(v.size()), 1);
    Eigen::Index i = 0;
    for (double x : v) m(i++, 0) = x;
    return m;
}

Eigen::VectorXd vec(std::initializer_list<double> v) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) out[i++] = x;
    return out;
}

struct Blobs {
    Eigen::MatrixXd x;
    std::vector<int> y;
};

Blobs blobs(int n, int d, double shift, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    Blobs b{Eigen::MatrixXd(n, d), {}};
    for (int i = 0; i < n; ++i) {
        const int y = i % 2 == 0 ? 1 : -1;
        for (int j = 0; j < d; ++j) b.x(i, j) = g(rng) + (y > 0 && j == 0 ? shift : 0.0) + 0.3 * j;
        b.y.push_back(y);
    }
    return b;
}

std::vector<bool> predictions(const BinaryScorer& s, const Eigen::MatrixXd& x) {
    std::vector<bool> out;
    for (Eigen::Index i = 0; i < x.rows(); ++i) out.push_back(s.predict(x.row(i).transpose()));
    return out;
}

}  // namespace

TEST_CASE("svm dual objective matches the projected-gradient oracle") {
    for (const auto& p : fixture::svm_problems()) {
        CAPTURE(p.name);
        SvmOptions o;
        o.C = p.C;
        const BinaryScorer s = svm_fit(p.x, p.y, o);
        const auto& sp = std::get<SvmParams>(s.params());
        const double got = svm_dual_objective(p.x, p.y, sp.alpha);
        CHECK(got == doctest::Approx(oracle::svm_dual(p.x, p.y, sp.alpha)).epsilon(1e-12));
        const double want = oracle::svm_dual_optimum(p.x, p.y, p.C);
        CHECK(std::abs(got - want) <= 1e-4 * std::abs(want));
        double balance = 0.0;
        for (Eigen::Index i = 0; i < sp.alpha.size(); ++i) {
            CHECK(sp.alpha[i] >= 0.0);
            CHECK(sp.alpha[i] <= p.C);
            balance += sp.alpha[i] * p.y[static_cast<std::size_t>(i)];
        }
        CHECK(std::abs(balance) <= o.tol);
        CHECK(sp.converged);
    }
}

TEST_CASE("svm 1d symmetric example") {
    SvmOptions o;
    o.C = 10.0;
    const BinaryScorer s = svm_fit(col({-2, -1, 1, 2}), {-1, -1, 1, 1}, o);
    const auto& sp = std::get<SvmParams>(s.params());
    CHECK(sp.w[0] == doctest::Approx(1.0).epsilon(1e-3));
    CHECK(std::abs(sp.b) < 1e-3);
    CHECK(s.score(vec({0.5})) == doctest::Approx(0.5).epsilon(1e-3));
    CHECK(s.predict(vec({0.5})));
}

TEST_CASE("svm on separable data satisfies the margin conditions") {
    const auto p = fixture::svm_problems()[3];
    SvmOptions o;
    o.C = p.C;
    const BinaryScorer s = svm_fit(p.x, p.y, o);
    const auto& sp = std::get<SvmParams>(s.params());
    for (Eigen::Index i = 0; i < p.x.rows(); ++i) {
        const double m = p.y[static_cast<std::size_t>(i)] * s.score(p.x.row(i).transpose());
        CHECK(m > 0.0);
        if (sp.alpha[i] > 1e-8) CHECK(m == doctest::Approx(1.0).epsilon(o.tol * 2));
    }
}

TEST_CASE("svm cannot fit xor") {
    const auto p = fixture::svm_problems()[4];
    for (double C : {0.1, 1.0, 100.0}) {
        SvmOptions o;
        o.C = C;
        const BinaryScorer s = svm_fit(p.x, p.y, o);
        int correct = 0;
        for (Eigen::Index i = 0; i < p.x.rows(); ++i) correct += s.predict(p.x.row(i).transpose()) == (p.y[static_cast<std::size_t>(i)] > 0);
        CHECK(correct <= 3);
    }
}

TEST_CASE("svm errors and iteration cap") {
    CHECK_THROWS_AS(svm_fit(col({1, 2}), {1, 1}), DataError);
    SvmOptions bad;
    bad.C = 0.0;
    CHECK_THROWS_AS(svm_fit(col({1, 2}), {1, -1}, bad), UsageError);
    const Blobs b = blobs(60, 3, 0.5, 4);
    SvmOptions capped;
    capped.C = 100.0;
    capped.max_passes = 0;
    try {
        svm_fit(b.x, b.y, capped);
        FAIL("expected SvmNotConverged");
    } catch (const SvmNotConverged& e) {
        const auto& sp = std::get<SvmParams>(e.best().params());
        CHECK_FALSE(sp.converged);
        CHECK(sp.alpha.size() == 60);
    }
}

TEST_CASE("lda example with degenerate pooled covariance") {
    Eigen::MatrixXd x(4, 2);
    x << 0, 0, 0, 1, 4, 0, 4, 1;
    const BinaryScorer s = lda_fit(x, {-1, -1, 1, 1});
    const auto& lp = std::get<LdaParams>(s.params());
    CHECK(std::abs(lp.w[1]) <= 1e-9 * std::abs(lp.w[0]));
    CHECK(lp.w[0] > 0.0);
    for (double y : {-3.0, 0.0, 0.5, 2.0}) CHECK(std::abs(s.score(vec({2.0, y}))) < 1e-6);
    CHECK(s.predict(vec({2.1, 0.5})));
    CHECK_FALSE(s.predict(vec({1.9, 0.5})));
}

TEST_CASE("lda 1d boundary with unequal priors") {
    // Means 1 and 5, pooled variance (1+1+1+1+0)/5 = 0.8, boundary 3 - 0.8 ln(3/2) / 4.
    const BinaryScorer s = lda_fit(col({0, 2, 4, 6, 5}), {-1, -1, 1, 1, 1});
    const double boundary = 3.0 - 0.8 * std::log(1.5) / 4.0;
    CHECK(std::abs(s.score(vec({boundary}))) < 1e-6);
    CHECK(s.score(vec({6.0})) == doctest::Approx(5.0 * 3.0 + std::log(1.5)).epsilon(1e-6));
}

TEST_CASE("lda identical means give the prior log-ratio") {
    const BinaryScorer s = lda_fit(col({-1, 1, -1, 1, 0}), {-1, -1, 1, 1, 1});
    for (double x : {-5.0, 0.0, 3.0}) CHECK(s.score(vec({x})) == doctest::Approx(std::log(1.5)).epsilon(1e-6));
}

TEST_CASE("lda labels are invariant under scaling and invertible affine maps") {
    const Blobs b = blobs(40, 3, 1.5, 8);
    const Blobs probe = blobs(50, 3, 1.0, 9);
    const auto base = predictions(lda_fit(b.x, b.y), probe.x);
    CHECK(predictions(lda_fit(10.0 * b.x, b.y), 10.0 * probe.x) == base);
    Eigen::Matrix3d a;
    a << 2, 1, 0, 0, 1, -1, 1, 0, 3;
    const Eigen::RowVector3d shift(5, -2, 1);
    const Eigen::MatrixXd bx = (b.x * a.transpose()).rowwise() + shift;
    const Eigen::MatrixXd px = (probe.x * a.transpose()).rowwise() + shift;
    CHECK(predictions(lda_fit(bx, b.y), px) == base);
}

TEST_CASE("naive bayes closed-form boundaries") {
    const BinaryScorer sym = nb_fit(col({-1, -3, 1, 3}), {-1, -1, 1, 1});
    CHECK(std::abs(sym.score(vec({0.0}))) < 1e-12);
    CHECK(sym.score(vec({2.0})) > 0.0);

    // - has mean 0 var 1, + has mean 2 var 1.
    const BinaryScorer s = nb_fit(col({-1, 1, 1, 3}), {-1, -1, 1, 1});
    CHECK(std::abs(s.score(vec({1.0}))) < 1e-9);
    for (double x : {-2.0, 0.3, 1.7, 4.0})
        CHECK(s.score(vec({x})) == doctest::Approx(oracle::gaussian_log_ratio(x, 2, 1, 0, 1, 0.5)).epsilon(1e-9));

    // Unequal priors and variances.
    const BinaryScorer u = nb_fit(col({0, 2, 3, 5, 7}), {-1, -1, 1, 1, 1});
    for (double x : {-1.0, 1.0, 2.5, 6.0})
        CHECK(u.score(vec({x})) == doctest::Approx(oracle::gaussian_log_ratio(x, 5, 8.0 / 3.0, 1, 1, 0.6)).epsilon(1e-9));
}

TEST_CASE("naive bayes constant feature and block additivity") {
    const Blobs b = blobs(30, 2, 1.0, 3);
    Eigen::MatrixXd with_const(30, 3);
    with_const << b.x, Eigen::VectorXd::Constant(30, 5.0);
    const BinaryScorer plain = nb_fit(b.x, b.y);
    const BinaryScorer padded = nb_fit(with_const, b.y);
    for (int i = 0; i < 30; ++i) {
        Eigen::VectorXd r(3);
        r << b.x.row(i).transpose(), 5.0;
        CHECK(padded.score(r) == doctest::Approx(plain.score(b.x.row(i).transpose())).epsilon(1e-9));
    }
    // Equal priors (15/15): the joint score is the sum of the per-feature scores.
    const BinaryScorer f0 = nb_fit(b.x.col(0), b.y);
    const BinaryScorer f1 = nb_fit(b.x.col(1), b.y);
    for (int i = 0; i < 30; ++i)
        CHECK(plain.score(b.x.row(i).transpose()) ==
              doctest::Approx(f0.score(vec({b.x(i, 0)})) + f1.score(vec({b.x(i, 1)}))).epsilon(1e-9));
}

TEST_CASE("permuting training rows leaves predictions unchanged") {
    const Blobs b = blobs(30, 3, 1.2, 12);
    const Blobs probe = blobs(40, 3, 1.0, 13);
    std::vector<int> order(30);
    for (int i = 0; i < 30; ++i) order[static_cast<std::size_t>(i)] = (i * 7) % 30;
    Eigen::MatrixXd px(30, 3);
    std::vector<int> py;
    for (int i = 0; i < 30; ++i) {
        px.row(i) = b.x.row(order[static_cast<std::size_t>(i)]);
        py.push_back(b.y[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])]);
    }
    CHECK(predictions(lda_fit(b.x, b.y), probe.x) == predictions(lda_fit(px, py), probe.x));
    CHECK(predictions(nb_fit(b.x, b.y), probe.x) == predictions(nb_fit(px, py), probe.x));
    SvmOptions o;
    o.tol = 1e-6;
    CHECK(predictions(svm_fit(b.x, b.y, o), probe.x) == predictions(svm_fit(px, py, o), probe.x));
}

TEST_CASE("scorer contract: threshold, width, serialization") {
    const Blobs b = blobs(30, 2, 1.0, 5);
    for (const BinaryScorer& s : {svm_fit(b.x, b.y), lda_fit(b.x, b.y), nb_fit(b.x, b.y)}) {
        const Eigen::VectorXd sc = s.scores(b.x);
        for (Eigen::Index i = 0; i < sc.size(); ++i) CHECK(s.predict(b.x.row(i).transpose()) == (sc[i] > 0.0));
        long prev = b.x.rows() + 1;
        for (double t = sc.minCoeff() - 1; t <= sc.maxCoeff() + 1; t += 0.25) {
            const long pos = (sc.array() > t).count();
            CHECK(pos <= prev);
            prev = pos;
        }
        const BinaryScorer back = BinaryScorer::from_json(nlohmann::json::parse(s.to_json().dump()));
        CHECK(back.scores(b.x) == sc);
        CHECK_THROWS_AS(s.score(Eigen::VectorXd::Zero(3)), DataError);
    }
    const BinaryScorer lin(LinearParams{vec({1.0, -1.0}), 0.5});
    CHECK(lin.score(vec({2.0, 1.0})) == 1.5);
    CHECK_FALSE(BinaryScorer(LinearParams{vec({1.0}), 0.0}).predict(vec({0.0})));
}

TEST_CASE("multiclass gaussian rules separate distinct clusters") {
    std::mt19937_64 rng(6);
    std::normal_distribution<double> g(0.0, 0.3);
    Eigen::MatrixXd x(50, 2);
    std::vector<int> labels;
    for (int i = 0; i < 50; ++i) {
        const int c = i % 5;
        x(i, 0) = 3.0 * c + g(rng);
        x(i, 1) = (c % 2) * 2.0 + g(rng);
        labels.push_back(c);
    }
    for (auto kind : {MulticlassGaussian::Kind::SharedCovariance, MulticlassGaussian::Kind::NaiveBayes}) {
        const MulticlassGaussian m = MulticlassGaussian::fit(kind, x, labels, 5);
        const MulticlassGaussian back = MulticlassGaussian::from_json(m.to_json());
        for (int i = 0; i < 50; ++i) {
            Eigen::Index best = 0;
            m.scores(x.row(i).transpose()).maxCoeff(&best);
            CHECK(best == labels[static_cast<std::size_t>(i)]);
            CHECK(back.scores(x.row(i).transpose()) == m.scores(x.row(i).transpose()));
        }
    }
}
