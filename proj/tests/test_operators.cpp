#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "oracles.hpp"
#include "tvreg/operators.hpp"
#include "tvreg/rng.hpp"

using namespace tvreg;

namespace {

CovariateSchema make_schema(std::vector<int> sizes,
                            Topology topo = Topology::Complete) {
    CovariateSchema schema;
    int idx = 1;
    for (int n : sizes) {
        Covariate c;
        c.name = "X" + std::to_string(idx++);
        c.topology = topo;
        for (int i = 1; i <= n; ++i) c.levels.push_back(std::to_string(i));
        schema.covariates.push_back(c);
    }
    return schema;
}

MeasurementTable random_table(const CovariateSchema& schema, Rng& rng,
                              double zero_fraction = 0.0) {
    MeasurementTable t;
    t.dims = schema.grid_dims();
    const long long n = schema.grid_size();
    t.value = Vector::Zero(n);
    t.weight = Vector::Zero(n);
    for (long long i = 0; i < n; ++i) {
        if (rng.uniform() < zero_fraction) continue;
        t.value[i] = rng.normal();
        t.weight[i] = 0.5 + rng.uniform();
    }
    return t;
}

}  // namespace

TEST_CASE("design of one binary covariate is the identity") {
    const auto schema = make_schema({2});
    const auto design = build_design(schema, enumerate_terms(schema, 1));
    const Matrix a = Matrix(design.to_sparse());
    CHECK(a.rows() == 2);
    CHECK(a.cols() == 2);
    CHECK(a.isApprox(Matrix::Identity(2, 2)));
}

TEST_CASE("design of two binaries with three terms has three ones per row") {
    const auto schema = make_schema({2, 2});
    const auto design = build_design(schema, enumerate_terms(schema, 2));
    const Matrix a = Matrix(design.to_sparse());
    CHECK(a.rows() == 4);
    CHECK(a.cols() == 2 + 2 + 4);
    for (Index r = 0; r < 4; ++r) CHECK(a.row(r).sum() == doctest::Approx(3.0));
    // cell (1,0) -> row 2: X1 level 1, X2 level 0, pair vertex 1*2+0 = 2
    CHECK(a(2, 1) == 1.0);
    CHECK(a(2, 2) == 1.0);
    CHECK(a(2, 4 + 2) == 1.0);
}

TEST_CASE("example-1 grid has 600 cells") {
    const auto schema = make_schema({10, 3, 5, 4});
    const auto design = build_design(schema, enumerate_terms(schema, 2));
    CHECK(design.n_cells == 600);
    CHECK(design.n_params == (10 + 3 + 5 + 4) + (30 + 50 + 40 + 15 + 12 + 20));
}

TEST_CASE("alpha = 1 reduces the penalty to a weighted lasso") {
    const auto schema = make_schema({3, 4});
    const auto terms = enumerate_terms(schema, 1);
    const auto pen = build_penalty(terms, 1.0, {2.0, 0.5});
    Rng rng(1);
    Vector u(7);
    for (Index i = 0; i < 7; ++i) u[i] = rng.normal();
    const double expect =
        2.0 * u.head(3).cwiseAbs().sum() + 0.5 * u.tail(4).cwiseAbs().sum();
    CHECK(pen.l1(u) == doctest::Approx(expect).epsilon(1e-14));
    for (const auto& blk : pen.blocks) CHECK(blk.d.rows() == blk.d.cols());  // no edge rows
}

TEST_CASE("alpha = 0 total variation on a path") {
    const auto schema = make_schema({3}, Topology::Path);
    const auto terms = enumerate_terms(schema, 1);
    const auto pen = build_penalty(terms, 0.0, {1.0});
    Vector u(3);
    u << 0.0, 1.0, 1.0;
    CHECK(pen.l1(u) == doctest::Approx(1.0));
}

TEST_CASE("vertex-only term at alpha 0.5") {
    TermSpec term;
    term.covariate_indices = {0};
    term.vertex_count = 1;
    term.graph.vertex_count = 1;
    term.label = "X1";
    for (double w : {1.0, 2.0}) {
        const auto pen = build_penalty({term}, 0.5, {w});
        Vector u(1);
        u << 2.0;
        CHECK(pen.l1(u) == doctest::Approx(1.0 * w));
    }
}

TEST_CASE("penalty rejects bad inputs") {
    const auto schema = make_schema({3});
    const auto terms = enumerate_terms(schema, 1);
    CHECK_THROWS_AS(build_penalty(terms, 0.5, {0.0}), ConfigError);
    CHECK_THROWS_AS(build_penalty(terms, 0.5, {-1.0}), ConfigError);
    CHECK_THROWS_AS(build_penalty(terms, 1.5, {1.0}), ConfigError);
    CHECK_THROWS_AS(build_penalty(terms, 0.5, {1.0, 1.0}), ConfigError);
}

TEST_CASE("blockwise l1 equals the monolithic matrix") {
    const auto schema = make_schema({3, 4, 2});
    const auto terms = enumerate_terms(schema, 2);
    std::vector<double> w{1.0, 2.0, 0.7, 1.3, 0.9, 2.2};
    const auto pen = build_penalty(terms, 0.4, w);
    const SpMat d = pen.to_sparse();
    Rng rng(5);
    for (int rep = 0; rep < 5; ++rep) {
        Vector u(pen.cols());
        for (Index i = 0; i < u.size(); ++i) u[i] = rng.normal();
        CHECK(pen.l1(u) ==
              doctest::Approx((d * u).cwiseAbs().sum()).epsilon(1e-12));
        CHECK((pen.apply(u) - d * u).cwiseAbs().maxCoeff() < 1e-12);
        Vector z(pen.rows());
        for (Index i = 0; i < z.size(); ++i) z[i] = rng.normal();
        CHECK((pen.apply_adjoint(z) - d.transpose() * z).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("constant measurements give b = 0") {
    const auto schema = make_schema({3, 2});
    const auto design = build_design(schema, enumerate_terms(schema, 2));
    MeasurementTable t;
    t.dims = schema.grid_dims();
    t.value = Vector::Constant(6, 0.37);
    t.weight = Vector::LinSpaced(6, 0.5, 3.0);
    const auto problem = reduce(design, t);
    CHECK(problem.b.cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("single binary covariate reduction by hand") {
    const auto schema = make_schema({2});
    const auto design = build_design(schema, enumerate_terms(schema, 1));
    MeasurementTable t;
    t.dims = {2};
    t.value = Vector(2);
    t.value << 1.0, -1.0;
    t.weight = Vector::Ones(2);
    const auto problem = reduce(design, t);
    Matrix expect(2, 2);
    expect << 0.5, -0.5, -0.5, 0.5;  // I - 11^T / 2
    CHECK(problem.b_mat.isApprox(expect, 1e-12));
    CHECK(problem.b[0] == doctest::Approx(1.0));
    CHECK(problem.b[1] == doctest::Approx(-1.0));
    CHECK(problem.c == doctest::Approx(2.0));
}

TEST_CASE("reduced quadratic equals the full objective minimized over u0") {
    Rng rng(7);
    const auto schema = make_schema({3, 2, 2});
    const auto design = build_design(schema, enumerate_terms(schema, 2));
    const auto t = random_table(schema, rng, 0.2);
    const auto problem = reduce(design, t);
    for (int rep = 0; rep < 20; ++rep) {
        Vector u(design.n_params);
        for (Index i = 0; i < u.size(); ++i) u[i] = rng.normal();
        const double reduced = problem.quadratic(u);
        const double brute = oracle::full_objective_min_u0(design, t, u);
        CHECK(reduced == doctest::Approx(brute).epsilon(1e-7));
    }
}

TEST_CASE("intercept recovery") {
    Rng rng(9);
    const auto schema = make_schema({3, 2});
    const auto design = build_design(schema, enumerate_terms(schema, 1));
    SUBCASE("constant measurements at u = 0") {
        MeasurementTable t;
        t.dims = schema.grid_dims();
        t.value = Vector::Constant(6, 4.2);
        t.weight = Vector::Ones(6);
        const auto problem = reduce(design, t);
        CHECK(recover_intercept(problem, Vector::Zero(design.n_params)) ==
              doctest::Approx(4.2));
    }
    SUBCASE("exact fit leaves nothing for the intercept") {
        Vector u(design.n_params);
        for (Index i = 0; i < u.size(); ++i) u[i] = rng.normal();
        MeasurementTable t;
        t.dims = schema.grid_dims();
        t.value = design.apply(u);
        t.weight = Vector::Ones(6);
        const auto problem = reduce(design, t);
        CHECK(recover_intercept(problem, u) == doctest::Approx(0.0).epsilon(1e-12));
    }
    SUBCASE("matches scalar minimization") {
        const auto t = random_table(schema, rng);
        const auto problem = reduce(design, t);
        Vector u(design.n_params);
        for (Index i = 0; i < u.size(); ++i) u[i] = rng.normal();
        const Vector au = design.apply(u);
        auto f = [&](double u0) {
            double obj = 0.0;
            for (Index x = 0; x < t.size(); ++x) {
                const double r = t.value[x] - u0 - au[x];
                obj += 0.5 * t.weight[x] * r * r;
            }
            return obj;
        };
        const double u0 = oracle::golden_min(f, -10.0, 10.0, 300);
        CHECK(recover_intercept(problem, u) == doctest::Approx(u0).epsilon(1e-10));
    }
}

TEST_CASE("P1 is idempotent") {
    Rng rng(13);
    const int n = 8;
    Vector m(n), v(n);
    for (int i = 0; i < n; ++i) {
        m[i] = rng.uniform() < 0.25 ? 0.0 : 0.3 + rng.uniform();
        v[i] = rng.normal();
    }
    const double s = m.sum();
    auto p1 = [&](const Vector& x) { return Vector::Ones(n) * (m.dot(x) / s); };
    const Vector once = p1(v);
    const Vector twice = p1(once);
    CHECK((once - twice).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("per-term constant directions lie in the null space of B") {
    Rng rng(21);
    const auto schema = make_schema({3, 4});
    const auto terms = enumerate_terms(schema, 2);
    const auto design = build_design(schema, terms);
    const auto t = random_table(schema, rng, 0.15);
    const auto problem = reduce(design, t);
    const double b_scale = problem.b_mat.cwiseAbs().maxCoeff();
    for (std::size_t k = 0; k < terms.size(); ++k) {
        Vector e = Vector::Zero(design.n_params);
        const double norm = std::sqrt(static_cast<double>(terms[k].vertex_count));
        for (int v = 0; v < terms[k].vertex_count; ++v)
            e[design.term_offsets[k] + v] = 1.0 / norm;
        CHECK(problem.multiply(e).norm() / b_scale < 1e-8);
        CHECK(std::abs(problem.b.dot(e)) <
              1e-8 * std::max(problem.b.norm(), 1e-12));
    }
}

TEST_CASE("uniform weight scaling scales the reduction") {
    Rng rng(31);
    const auto schema = make_schema({3, 2});
    const auto design = build_design(schema, enumerate_terms(schema, 2));
    auto t = random_table(schema, rng);
    const auto p1 = reduce(design, t);
    const double s = 3.7;
    t.weight *= s;
    const auto p2 = reduce(design, t);
    CHECK(p2.b_mat.isApprox(s * p1.b_mat, 1e-10));
    CHECK(p2.b.isApprox(s * p1.b, 1e-10));
    CHECK(p2.c == doctest::Approx(s * p1.c).epsilon(1e-10));
}

TEST_CASE("sparse-mode reduction multiplies like the dense one") {
    Rng rng(41);
    const auto schema = make_schema({3, 3, 2});
    const auto design = build_design(schema, enumerate_terms(schema, 2));
    const auto t = random_table(schema, rng, 0.1);
    const auto dense = reduce(design, t);
    const auto sparse = reduce(design, t, /*dense_limit=*/1);
    CHECK_FALSE(sparse.dense);
    for (int rep = 0; rep < 5; ++rep) {
        Vector u(design.n_params);
        for (Index i = 0; i < u.size(); ++i) u[i] = rng.normal();
        CHECK((dense.multiply(u) - sparse.multiply(u)).cwiseAbs().maxCoeff() < 1e-9);
        CHECK(dense.quadratic(u) == doctest::Approx(sparse.quadratic(u)).epsilon(1e-10));
    }
}

TEST_CASE("all-zero weights are rejected") {
    const auto schema = make_schema({2});
    const auto design = build_design(schema, enumerate_terms(schema, 1));
    MeasurementTable t;
    t.dims = {2};
    t.value = Vector::Zero(2);
    t.weight = Vector::Zero(2);
    CHECK_THROWS_AS(reduce(design, t), SolveError);
}
