// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <groundloop/error.hpp>
#include <groundloop/wells.hpp>

#include <cmath>

using namespace groundloop;
using namespace groundloop::wells;

TEST_CASE("Peaceman well index")
{
    auto wi = peacemanWi(20.0, 20.0, 5.0, 1e-13, 0.1, 0.0);
    CHECK(0.14 * std::sqrt(800.0) == doctest::Approx(3.9598).epsilon(1e-4));
    CHECK(wi == doctest::Approx(8.540e-13).epsilon(1e-3));
    CHECK(peacemanWi(20.0, 20.0, 5.0, 2e-13, 0.1, 0.0) == doctest::Approx(2.0 * wi).epsilon(1e-15));

    auto prev = wi;
    for (auto skin: {1.0, 5.0, 50.0, 5000.0})
    {
        auto w = peacemanWi(20.0, 20.0, 5.0, 1e-13, 0.1, skin);
        CHECK(w < prev);
        prev = w;
    }
    CHECK(peacemanWi(20.0, 20.0, 6.0, 1e-13, 0.1, 0.0) > wi);
    CHECK_THROWS_AS(peacemanWi(1.0, 1.0, 1.0, 1e-13, 1.0, 0.0), Error);
}

TEST_CASE("pore-volume constrained injection rate")
{
    auto q = deriveInjectionRate(3e6, 3.1536e8, 4);
    CHECK(q == doctest::Approx(2.37829e-3).epsilon(1e-5));
    CHECK(4.0 * q * 3.1536e8 == doctest::Approx(3e6).epsilon(1e-15));
    CHECK(deriveInjectionRate(3e6, 3.1536e8, 2) / q == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(deriveInjectionRate(5.0, 2.0, 1) == 2.5);
    CHECK_THROWS_AS(deriveInjectionRate(0.0, 1.0, 1), Error);
}

TEST_CASE("vertical well setup")
{
    auto mesh = mesh::buildCartesianMesh({10, 10, 30, 100.0, 100.0, 30.0, 1000.0});
    auto geo = mesh::computeGeometry(mesh);
    auto perm = petro::PropertyField {"permeability", "m2", std::vector<double>(mesh.cellCount(), 1e-13)};
    auto w = setupVerticalWell(mesh, geo, perm, "I1", 1, 1, 0, 29, 0.1, 0.0, WellKind::Injector,
                               WellControl::rate(1e-3));
    CHECK(w.connections.size() == 30);
    CHECK(w.referenceDepth == doctest::Approx(1000.5));
    for (const auto& c: w.connections)
        CHECK(c.wellIndex > 0.0);

    auto flat = mesh::buildCartesianMesh({3, 3, 1, 30.0, 30.0, 1.0, 0.0});
    auto flatGeo = mesh::computeGeometry(flat);
    auto flatPerm = petro::PropertyField {"permeability", "m2", std::vector<double>(9, 1e-13)};
    CHECK(setupVerticalWell(flat, flatGeo, flatPerm, "P", 2, 2, 0, 0, 0.1, 0.0, WellKind::Producer,
                            WellControl::bhp(5e6))
              .connections.size() == 1);

    CHECK_THROWS_AS(setupVerticalWell(mesh, geo, perm, "X", 10, 0, 0, 0, 0.1, 0.0, WellKind::Producer,
                                      WellControl::bhp(1.0)),
                    Error);
    CHECK_THROWS_AS(setupVerticalWell(mesh, geo, perm, "X", 0, 0, 5, 4, 0.1, 0.0, WellKind::Producer,
                                      WellControl::bhp(1.0)),
                    Error);
}

TEST_CASE("schedule validation")
{
    auto s = Schedule::uniform(10.0, 4);
    CHECK(s.reportTimes.size() == 4);
    CHECK(s.reportTimes.back() == 10.0);
    CHECK_NOTHROW(s.validate());
    s.reportTimes = {1.0, 1.0, 10.0};
    CHECK_THROWS_AS(s.validate(), Error);
    s.reportTimes = {1.0, 5.0};
    CHECK_THROWS_AS(s.validate(), Error);
}
