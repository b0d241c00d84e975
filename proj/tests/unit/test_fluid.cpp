// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <groundloop/error.hpp>
#include <groundloop/fluid.hpp>

#include <cmath>

using namespace groundloop;
using namespace groundloop::fluid;

namespace
{

RelPermModel coreyResidual()
{
    return {RelPermFamily::BrooksCorey, {2.0, 2.0}, {0.2, 0.2}, {1.0, 1.0}};
}

} // namespace

TEST_CASE("relative permeability values")
{
    auto [a, b] = relperm(RelPermModel::quadratic(), 0.5);
    CHECK(a == 0.25);
    CHECK(b == 0.25);

    auto [c, d] = relperm(coreyResidual(), 0.2);
    CHECK(c == 0.0);
    CHECK(d == 1.0);

    auto [e, f] = relperm(coreyResidual(), 0.5);
    CHECK(e == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(f == doctest::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("quadratic equals Brooks-Corey n=2 without residuals")
{
    auto corey = RelPermModel {RelPermFamily::BrooksCorey, {2.0, 2.0}, {0.0, 0.0}, {1.0, 1.0}};
    for (int n = 0; n <= 1000; ++n)
    {
        auto s = n / 1000.0;
        auto [qa, qb] = relperm(RelPermModel::quadratic(), s);
        auto [ca, cb] = relperm(corey, s);
        CHECK(std::abs(qa - ca) <= 1e-15);
        CHECK(std::abs(qb - cb) <= 1e-15);
    }
}

TEST_CASE("monotonicity of closures")
{
    auto sys = FluidSystem {};
    sys.relperm = coreyResidual();
    auto prev = std::array<double, 3> {-1.0, 2.0, -1.0};
    for (int n = 0; n <= 2000; ++n)
    {
        auto s = n / 2000.0;
        auto [kw, kn] = relperm(sys.relperm, s);
        CHECK(kw >= prev[0]);
        CHECK(kn <= prev[1]);
        if (kw + kn > 0.0)
        {
            auto fw = fractionalFlow(sys, s);
            CHECK(fw >= prev[2]);
            prev[2] = fw;
        }
        prev[0] = kw;
        prev[1] = kn;
    }
}

TEST_CASE("density closure")
{
    auto d = DensityClosure {};
    d.referencePressure = 1e7;
    CHECK(density(d, Wetting, 1e7) == 1000.0);
    CHECK(density(d, Wetting, 2e7) == doctest::Approx(1001.0).epsilon(1e-14));

    auto inc = d;
    inc.kind = DensityKind::Incompressible;
    CHECK(density(inc, NonWetting, 3e7) == 800.0);
    auto h = 1e3;
    CHECK((density(inc, Wetting, 2e7 + h) - density(inc, Wetting, 2e7 - h)) == 0.0);

    auto fd = (density(d, Wetting, 2e7 + h) - density(d, Wetting, 2e7 - h)) / (2.0 * h);
    CHECK(fd == doctest::Approx(1000.0 * 1e-10).epsilon(1e-8));
    auto ad = density(d, Wetting, Dual<1>::variable(2e7, 0));
    CHECK(ad.d[0] == doctest::Approx(1e-7).epsilon(1e-15));

    auto strong = d;
    strong.compressibility = {1e-6, 1e-6};
    try
    {
        density(strong, NonWetting, 1e7 - 2e6);
        FAIL("expected nonphysical-state");
    }
    catch (const Error& e)
    {
        CHECK(e.kind() == ErrorKind::NonphysicalState);
    }
}

TEST_CASE("mobility ratio classification")
{
    auto sys = FluidSystem {};
    sys.viscosity = {5e-3, 1e-3};
    CHECK(mobilityRatio(sys) == doctest::Approx(0.2));
    CHECK(favorable(sys));
    sys.viscosity = {2e-3, 2e-3};
    CHECK(mobilityRatio(sys) == 1.0);
    CHECK(favorable(sys));
    sys.viscosity = {0.5e-3, 5e-3};
    CHECK(mobilityRatio(sys) == doctest::Approx(10.0));
    CHECK_FALSE(favorable(sys));

    auto scaled = sys;
    scaled.viscosity = {sys.viscosity[0] * 7.0, sys.viscosity[1] * 7.0};
    CHECK(mobilityRatio(scaled) == doctest::Approx(mobilityRatio(sys)).epsilon(1e-15));
    CHECK(fractionalFlow(scaled, 0.6) == doctest::Approx(fractionalFlow(sys, 0.6)).epsilon(1e-15));
}

TEST_CASE("fractional flow")
{
    auto sys = FluidSystem {};
    sys.viscosity = {1e-3, 1e-3};
    sys.relperm = RelPermModel::quadratic();
    CHECK(fractionalFlow(sys, 0.5) == doctest::Approx(0.5));
    CHECK(fractionalFlow(sys, 1.0) == 1.0);
    auto s = 1.0 / std::sqrt(2.0);
    CHECK(fractionalFlow(sys, s) == doctest::Approx(s * s / (2 * s * s - 2 * s + 1)).epsilon(1e-14));
    CHECK(fractionalFlow(sys, s) == doctest::Approx(0.85355).epsilon(1e-5));
}

TEST_CASE("closure validation")
{
    auto bad = coreyResidual();
    bad.residual = {0.6, 0.5};
    CHECK_THROWS_AS(bad.validate(), Error);
    bad = coreyResidual();
    bad.exponent[0] = 0.5;
    CHECK_THROWS_AS(bad.validate(), Error);
    auto d = DensityClosure {};
    d.compressibility[1] = -1.0;
    CHECK_THROWS_AS(d.validate(), Error);
    auto sys = FluidSystem {};
    sys.viscosity[0] = 0.0;
    CHECK_THROWS_AS(sys.validate(), Error);
}
