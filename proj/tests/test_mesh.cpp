#include <doctest.h>

#include <algorithm>
#include <random>
#include <vector>

#include "mbs/error.hpp"
#include "mbs/mesh.hpp"

using namespace mbs;

namespace {

ErrorCode code_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an mbs::Error");
    return ErrorCode::InvalidArgument;
}

}  // namespace

TEST_CASE("regular mesh with two points") {
    const auto mesh = Mesh::regular(0.0, 1.0, 2);
    REQUIRE(mesh.size() == 2);
    CHECK(mesh.point(0) == 0.0);
    CHECK(mesh.point(1) == 1.0);
    REQUIRE(mesh.widths().size() == 1);
    CHECK(mesh.width(0) == 1.0);
}

TEST_CASE("regular mesh with five points") {
    const auto mesh = Mesh::regular(0.0, 1.0, 5);
    const std::vector<double> expected{0.0, 0.25, 0.5, 0.75, 1.0};
    for (std::size_t j = 0; j < expected.size(); ++j)
        CHECK(mesh.point(j) == doctest::Approx(expected[j]).epsilon(1e-15));
    CHECK(mesh.is_regular());
}

TEST_CASE("symmetric regular mesh") {
    const auto mesh = Mesh::regular(-1.0, 1.0, 3);
    CHECK(mesh.width(0) == doctest::Approx(1.0));
    CHECK(mesh.width(1) == doctest::Approx(1.0));
    CHECK(mesh.is_regular());
}

TEST_CASE("mesh from irregular points") {
    const auto mesh = Mesh::from_points({0.0, 1.0, 3.0});
    CHECK(mesh.width(0) == 1.0);
    CHECK(mesh.width(1) == 2.0);
    CHECK_FALSE(mesh.is_regular());
}

TEST_CASE("mesh from equally spaced points is regular") {
    CHECK(Mesh::from_points({0.0, 0.5, 1.0}).is_regular());
}

TEST_CASE("mesh construction errors") {
    CHECK(code_of([] { Mesh::from_points({0.0, 0.0}); }) == ErrorCode::InvalidArgument);
    CHECK(code_of([] { Mesh::from_points({0.0}); }) == ErrorCode::InvalidArgument);
    CHECK(code_of([] { Mesh::regular(0.0, 1.0, 1); }) == ErrorCode::InvalidArgument);
    CHECK(code_of([] { Mesh::regular(1.0, 0.0, 3); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("from_points sorts its input") {
    const auto mesh = Mesh::from_points({3.0, 0.0, 1.0});
    CHECK(mesh.point(0) == 0.0);
    CHECK(mesh.point(2) == 3.0);
}

TEST_CASE("locate uses left-closed cells") {
    const auto mesh = Mesh::regular(0.0, 1.0, 3);
    CHECK(mesh.locate(0.25) == 0);
    CHECK(mesh.locate(0.5) == 1);
    CHECK(mesh.locate(0.0) == 0);
    CHECK(mesh.locate(1.0) == 1);
    CHECK(code_of([&] { mesh.locate(1.5); }) == ErrorCode::OutOfDomain);
    CHECK(code_of([&] { mesh.locate(-0.1); }) == ErrorCode::OutOfDomain);
}

TEST_CASE("widths sum to the mesh extent") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-5.0, 5.0);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> pts(2 + trial);
        for (auto& p : pts) p = u(rng);
        const auto mesh = Mesh::from_points(pts);
        double total = 0.0;
        for (double w : mesh.widths()) {
            CHECK(w > 0.0);
            total += w;
        }
        const double extent = mesh.upper() - mesh.lower();
        CHECK(std::abs(total - extent) <= 1e-12 * extent);
    }
}

TEST_CASE("locate is monotone and brackets x") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> pts(17);
    for (auto& p : pts) p = u(rng);
    pts.push_back(0.0);
    pts.push_back(1.0);
    const auto mesh = Mesh::from_points(pts);
    std::vector<double> xs(500);
    for (auto& x : xs) x = u(rng);
    xs.insert(xs.end(), mesh.points().begin(), mesh.points().end());
    std::sort(xs.begin(), xs.end());
    std::size_t prev = 0;
    for (double x : xs) {
        const auto j = mesh.locate(x);
        CHECK(j >= prev);
        prev = j;
        CHECK(mesh.point(j) <= x);
        CHECK(x <= mesh.point(j + 1));
    }
}

TEST_CASE("regular mesh round-trips through from_points bit for bit") {
    for (std::size_t m : {2u, 3u, 10u, 97u, 1000u}) {
        const auto a = Mesh::regular(-0.3, 2.7, m);
        const auto b = Mesh::from_points({a.points().begin(), a.points().end()});
        REQUIRE(a.size() == b.size());
        for (std::size_t j = 0; j + 1 < m; ++j) CHECK(a.width(j) == b.width(j));
        CHECK(b.is_regular());
    }
}

TEST_CASE("tensor mesh indexing is row-major") {
    const std::vector<double> lo{0.0, 0.0, 0.0}, hi{1.0, 2.0, 3.0};
    const std::vector<std::size_t> dims{2, 3, 4};
    const auto mesh = TensorMesh::regular(lo, hi, dims);
    CHECK(mesh.dimension() == 3);
    CHECK(mesh.grid_size() == 24);
    const std::vector<std::size_t> idx{1, 2, 3};
    CHECK(mesh.linear_index(idx) == 1 * 12 + 2 * 4 + 3);
    const std::vector<std::size_t> last{0, 0, 1};
    CHECK(mesh.linear_index(last) == 1);
    for (std::size_t l = 0; l < mesh.grid_size(); ++l)
        CHECK(mesh.linear_index(mesh.multi_index(l)) == l);
    for (std::size_t j = 0; j < 3; ++j) CHECK(mesh.dims()[j] == mesh.axis(j).size());
}

TEST_CASE("tensor mesh locate") {
    const std::vector<double> lo{0.0, 0.0}, hi{1.0, 1.0};
    const std::vector<std::size_t> dims{3, 5};
    const auto mesh = TensorMesh::regular(lo, hi, dims);
    const std::vector<double> x{0.6, 0.3};
    const auto cell = mesh.locate(x);
    CHECK(cell[0] == 1);
    CHECK(cell[1] == 1);
    const std::vector<double> outside{0.5, 1.2};
    CHECK(code_of([&] { mesh.locate(outside); }) == ErrorCode::OutOfDomain);
}
