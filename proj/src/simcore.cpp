// SPDX-License-Identifier: Apache-2.0
#include <groundloop/simcore.hpp>

#include <Eigen/SparseLU>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

namespace groundloop::sim
{

using fluid::NonWetting;
using fluid::Wetting;

double ReservoirModel::totalPoreVolume() const
{
    auto sum = 0.0;
    for (auto v: poreVolumes)
        sum += v;
    return sum;
}

std::vector<Connection> computeTransmissibilities(const mesh::GeometrySummary& geometry,
                                                  const petro::PropertyField& permeability)
{
    auto out = std::vector<Connection> {};
    for (const auto& f: geometry.faces)
    {
        if (f.boundary())
            continue;
        auto a = f.owner;
        auto b = std::size_t(f.neighbor);
        auto da = f.centroid - geometry.cellCentroids[a];
        auto db = f.centroid - geometry.cellCentroids[b];
        auto ca = mesh::dot(f.normal, da);
        auto cb = -mesh::dot(f.normal, db);
        if (!(ca > 0.0 && cb > 0.0))
            throw Error(ErrorKind::DegenerateGeometry, "cell centroid on the wrong side of a face",
                        "cells " + std::to_string(a) + "/" + std::to_string(b));
        auto ta = f.area * permeability.values[a] * ca / mesh::dot(da, da);
        auto tb = f.area * permeability.values[b] * cb / mesh::dot(db, db);
        out.push_back({a, b, ta * tb / (ta + tb), geometry.cellCentroids[a].z - geometry.cellCentroids[b].z});
    }
    return out;
}

ReservoirModel buildReservoirModel(mesh::Mesh mesh, mesh::GeometrySummary geometry, petro::PropertyField permeability,
                                   petro::PropertyField porosity, fluid::FluidSystem fluid, double gravity,
                                   std::vector<wells::Well> wells)
{
    auto nc = mesh.cellCount();
    if (permeability.values.size() != nc || porosity.values.size() != nc || geometry.cellVolumes.size() != nc)
        throw Error(ErrorKind::InvariantViolation, "field lengths do not match the mesh");
    fluid.validate();

    auto model = ReservoirModel {};
    model.connections = computeTransmissibilities(geometry, permeability);
    model.poreVolumes.resize(nc);
    for (std::size_t c = 0; c < nc; ++c)
        model.poreVolumes[c] = porosity.values[c] * geometry.cellVolumes[c];
    model.mesh = std::move(mesh);
    model.geometry = std::move(geometry);
    model.permeability = std::move(permeability);
    model.porosity = std::move(porosity);
    model.fluid = fluid;
    model.gravity = gravity;
    model.wells = std::move(wells);
    assignWellboreDensities(model);
    return model;
}

void assignWellboreDensities(ReservoirModel& model)
{
    const auto& rho = model.fluid.density.referenceDensity;
    for (auto& w: model.wells)
        w.wellboreDensity = w.kind == wells::WellKind::Injector ? rho[Wetting] : 0.5 * (rho[Wetting] + rho[NonWetting]);
}

SimState SimState::uniform(const ReservoirModel& model, double pressure, double sw)
{
    auto s = SimState {};
    s.pressure.assign(model.cellCount(), pressure);
    s.sw.assign(model.cellCount(), sw);
    for (const auto& w: model.wells)
        s.bhp.push_back(w.control.type == wells::ControlType::Bhp ? w.control.target : pressure);
    return s;
}

void SolverControls::validate() const
{
    if (newtonMaxIters < 1)
        throw Error(ErrorKind::InvariantViolation, "newton_max_iters must be >= 1", "solver.newton_max_iters");
    if (!(cnvTolerance > 0.0 && mbTolerance > 0.0 && wellTolerance > 0.0))
        throw Error(ErrorKind::InvariantViolation, "tolerances must be > 0", "solver.tolerances");
    if (!(cutFactor > 0.0 && cutFactor < 1.0 && growthFactor > 1.0))
        throw Error(ErrorKind::InvariantViolation, "need 0 < cut_factor < 1 < growth_factor", "solver.cut_factor");
    if (!(minDt > 0.0 && minDt <= initialDt && initialDt <= maxDt))
        throw Error(ErrorKind::InvariantViolation, "need 0 < min_dt <= initial_dt <= max_dt", "solver.initial_dt");
    if (maxCutsPerStep < 0)
        throw Error(ErrorKind::InvariantViolation, "max_cuts_per_step must be >= 0", "solver.max_cuts_per_step");
}

namespace
{

template <class T>
struct CellProps
{
    std::array<T, 2> rho;
    std::array<T, 2> mob; ///< kr / mu
};

template <class T>
CellProps<T> cellProps(const fluid::FluidSystem& fl, const T& p, const T& sw)
{
    auto [krw, krn] = fluid::relperm(fl.relperm, sw);
    return {{fluid::density(fl.density, Wetting, p), fluid::density(fl.density, NonWetting, p)},
            {krw / T(fl.viscosity[Wetting]), krn / T(fl.viscosity[NonWetting])}};
}

// Mass rates into the reservoir for one well connection.
template <class T>
std::array<T, 2> connectionRates(const ReservoirModel& model, const wells::Well& well, const wells::Connection& conn,
                                 const T& p, const T& sw, const T& bhp, bool* crossflow)
{
    auto props = cellProps(model.fluid, p, sw);
    T drawdown = bhp + T(well.wellboreDensity * model.gravity * (conn.depth - well.referenceDepth)) - p;
    auto wi = T(conn.wellIndex);
    if (well.kind == wells::WellKind::Injector && value(drawdown) >= 0.0)
    {
        T total = props.mob[Wetting] + props.mob[NonWetting];
        return {wi * total * props.rho[Wetting] * drawdown, T(0.0)};
    }
    if (crossflow != nullptr && well.kind == wells::WellKind::Injector)
        *crossflow = true;
    return {wi * props.mob[Wetting] * props.rho[Wetting] * drawdown,
            wi * props.mob[NonWetting] * props.rho[NonWetting] * drawdown};
}

template <class T>
T controlResidual(const ReservoirModel& model, const wells::Well& well, const std::array<T, 2>& volumetric,
                  const T& bhp)
{
    if (well.control.type == wells::ControlType::Bhp)
        return bhp - T(well.control.target);
    T total = volumetric[Wetting] + volumetric[NonWetting];
    if (well.kind == wells::WellKind::Producer)
        total = -total;
    (void) model;
    return total - T(well.control.target);
}

void annotateNonphysical(const Error& e, std::size_t cell)
{
    throw Error(ErrorKind::NonphysicalState, e.what(), "cell " + std::to_string(cell) + " " + e.detail());
}

} // namespace

Residual assembleResidual(const ReservoirModel& model, const SimState& state, const SimState& previous, double dt,
                          bool withJacobian)
{
    const auto nc = model.cellCount();
    const auto nw = model.wells.size();
    const auto n = 2 * nc + nw;
    const auto& fl = model.fluid;
    auto out = Residual {};
    out.values = Eigen::VectorXd::Zero(Eigen::Index(n));
    auto triplets = std::vector<Eigen::Triplet<double>> {};
    if (withJacobian)
        triplets.reserve(8 * nc + 16 * model.connections.size() + 16 * nc);
    auto& r = out.values;

    // Accumulation
    for (std::size_t c = 0; c < nc; ++c)
    {
        using D = Dual<2>;
        auto pv = model.poreVolumes[c];
        try
        {
            auto p = D::variable(state.pressure[c], 0);
            auto s = D::variable(state.sw[c], 1);
            auto rhoW = fluid::density(fl.density, Wetting, p);
            auto rhoN = fluid::density(fl.density, NonWetting, p);
            auto rhoW0 = fluid::density(fl.density, Wetting, previous.pressure[c]);
            auto rhoN0 = fluid::density(fl.density, NonWetting, previous.pressure[c]);
            D accW = (D(pv) * rhoW * s - D(pv * rhoW0 * previous.sw[c])) / D(dt);
            D accN = (D(pv) * rhoN * (D(1.0) - s) - D(pv * rhoN0 * (1.0 - previous.sw[c]))) / D(dt);
            r[Eigen::Index(2 * c)] += accW.v;
            r[Eigen::Index(2 * c + 1)] += accN.v;
            if (withJacobian)
                for (int k = 0; k < 2; ++k)
                {
                    triplets.emplace_back(int(2 * c), int(2 * c + k), accW.d[k]);
                    triplets.emplace_back(int(2 * c + 1), int(2 * c + k), accN.d[k]);
                }
        }
        catch (const Error& e)
        {
            annotateNonphysical(e, c);
        }
    }

    // Interior fluxes, a -> b positive
    for (const auto& conn: model.connections)
    {
        using D = Dual<4>;
        auto pa = D::variable(state.pressure[conn.a], 0);
        auto sa = D::variable(state.sw[conn.a], 1);
        auto pb = D::variable(state.pressure[conn.b], 2);
        auto sb = D::variable(state.sw[conn.b], 3);
        auto propsA = cellProps(fl, pa, sa);
        auto propsB = cellProps(fl, pb, sb);
        for (int ph = 0; ph < 2; ++ph)
        {
            D rhoFace = D(0.5) * (propsA.rho[ph] + propsB.rho[ph]);
            D dPhi = (pa - pb) - rhoFace * D(model.gravity * conn.depthDelta);
            D upwind = value(dPhi) > 0.0 ? propsA.mob[ph] * propsA.rho[ph] : propsB.mob[ph] * propsB.rho[ph];
            D flux = D(conn.transmissibility) * upwind * dPhi;
            auto ra = Eigen::Index(2 * conn.a + ph);
            auto rb = Eigen::Index(2 * conn.b + ph);
            r[ra] += flux.v;
            r[rb] -= flux.v;
            if (withJacobian)
            {
                const int cols[4] = {int(2 * conn.a), int(2 * conn.a + 1), int(2 * conn.b), int(2 * conn.b + 1)};
                for (int k = 0; k < 4; ++k)
                {
                    triplets.emplace_back(int(ra), cols[k], flux.d[k]);
                    triplets.emplace_back(int(rb), cols[k], -flux.d[k]);
                }
            }
        }
    }

    // Wells
    for (std::size_t w = 0; w < nw; ++w)
    {
        using D = Dual<3>;
        const auto& well = model.wells[w];
        auto row = Eigen::Index(2 * nc + w);
        auto bhpCol = int(2 * nc + w);
        auto bhp = D::variable(state.bhp[w], 2);
        auto volumetric = std::array<D, 2> {D(0.0), D(0.0)};
        // control row derivatives w.r.t. each connection's cell unknowns
        auto controlEntries = std::vector<std::pair<std::size_t, std::array<double, 2>>> {};
        auto bhpDeriv = 0.0;
        for (const auto& conn: well.connections)
        {
            auto p = D::variable(state.pressure[conn.cell], 0);
            auto s = D::variable(state.sw[conn.cell], 1);
            std::array<D, 2> q;
            try
            {
                q = connectionRates(model, well, conn, p, s, bhp, nullptr);
            }
            catch (const Error& e)
            {
                annotateNonphysical(e, conn.cell);
            }
            for (int ph = 0; ph < 2; ++ph)
            {
                auto rc = Eigen::Index(2 * conn.cell + ph);
                r[rc] -= q[ph].v;
                if (withJacobian)
                {
                    triplets.emplace_back(int(rc), int(2 * conn.cell), -q[ph].d[0]);
                    triplets.emplace_back(int(rc), int(2 * conn.cell + 1), -q[ph].d[1]);
                    triplets.emplace_back(int(rc), bhpCol, -q[ph].d[2]);
                }
                volumetric[ph] += q[ph] / D(fl.density.referenceDensity[ph]);
            }
            auto qv = q[0] / D(fl.density.referenceDensity[0]) + q[1] / D(fl.density.referenceDensity[1]);
            controlEntries.push_back({conn.cell, {qv.d[0], qv.d[1]}});
            bhpDeriv += qv.d[2];
        }
        auto res = controlResidual(model, well, volumetric, bhp);
        r[row] = res.v;
        if (withJacobian)
        {
            triplets.emplace_back(int(row), bhpCol, res.d[2]);
            if (well.control.type == wells::ControlType::Rate)
            {
                auto sign = well.kind == wells::WellKind::Producer ? -1.0 : 1.0;
                for (const auto& [cell, d]: controlEntries)
                {
                    triplets.emplace_back(int(row), int(2 * cell), sign * d[0]);
                    triplets.emplace_back(int(row), int(2 * cell + 1), sign * d[1]);
                }
            }
            else
            {
                // keep the sparsity pattern independent of the control type
                for (const auto& [cell, d]: controlEntries)
                {
                    triplets.emplace_back(int(row), int(2 * cell), 0.0);
                    triplets.emplace_back(int(row), int(2 * cell + 1), 0.0);
                }
            }
        }
        (void) bhpDeriv;
    }

    if (withJacobian)
    {
        out.jacobian.resize(Eigen::Index(n), Eigen::Index(n));
        out.jacobian.setFromTriplets(triplets.begin(), triplets.end());
        out.jacobian.makeCompressed();
    }
    return out;
}

ResidualNorms residualNorms(const ReservoirModel& model, const SimState& state, const Eigen::VectorXd& residual,
                            double dt)
{
    (void) state;
    const auto nc = model.cellCount();
    const auto& rhoRef = model.fluid.density.referenceDensity;
    auto norms = ResidualNorms {};
    auto sums = std::array<double, 2> {0.0, 0.0};
    auto totalPv = 0.0;
    for (std::size_t c = 0; c < nc; ++c)
    {
        auto pv = model.poreVolumes[c];
        totalPv += pv;
        for (int ph = 0; ph < 2; ++ph)
        {
            auto rv = residual[Eigen::Index(2 * c + ph)];
            sums[ph] += rv;
            norms.cnv[ph] = std::max(norms.cnv[ph], std::abs(rv) * dt / (pv * rhoRef[ph]));
        }
    }
    for (int ph = 0; ph < 2; ++ph)
        norms.mb[ph] = std::abs(sums[ph]) * dt / (totalPv * rhoRef[ph]);
    for (std::size_t w = 0; w < model.wells.size(); ++w)
    {
        const auto& ctl = model.wells[w].control;
        auto scale = ctl.type == wells::ControlType::Rate ? std::max(std::abs(ctl.target), 1e-30) : 1e5;
        norms.well = std::max(norms.well, std::abs(residual[Eigen::Index(2 * nc + w)]) / scale);
    }
    return norms;
}

WellEvaluation wellEquations(const ReservoirModel& model, std::size_t wellIndex, const SimState& state)
{
    const auto& well = model.wells.at(wellIndex);
    const auto& rhoRef = model.fluid.density.referenceDensity;
    auto out = WellEvaluation {};
    auto volumetric = std::array<double, 2> {0.0, 0.0};
    for (const auto& conn: well.connections)
    {
        auto crossflow = false;
        auto q = connectionRates(model, well, conn, state.pressure[conn.cell], state.sw[conn.cell],
                                 state.bhp[wellIndex], &crossflow);
        out.connections.push_back({conn.cell, q, crossflow});
        for (int ph = 0; ph < 2; ++ph)
            volumetric[ph] += q[ph] / rhoRef[ph];
    }
    out.volumetricRate = volumetric;
    out.controlResidual = controlResidual(model, well, volumetric, state.bhp[wellIndex]);
    return out;
}

namespace
{

struct LinearSolver
{
    Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
    bool analyzed = false;
    Eigen::Index nonZeros = -1;
};

bool converged(const ResidualNorms& n, const SolverControls& ctl)
{
    return n.cnv[0] <= ctl.cnvTolerance && n.cnv[1] <= ctl.cnvTolerance && n.mb[0] <= ctl.mbTolerance &&
           n.mb[1] <= ctl.mbTolerance && n.well <= ctl.wellTolerance;
}

bool finite(const ResidualNorms& n)
{
    return std::isfinite(n.cnv[0]) && std::isfinite(n.cnv[1]) && std::isfinite(n.mb[0]) && std::isfinite(n.mb[1]) &&
           std::isfinite(n.well);
}

void parseNonphysicalDetail(const Error& e, NewtonOutcome& out)
{
    auto in = std::istringstream(e.detail());
    auto word = std::string {};
    long cell = -1;
    if (in >> word && word == "cell" && in >> cell)
        out.cell = cell;
    out.phase = e.detail().find("non-wetting") != std::string::npos ? NonWetting : Wetting;
}

NewtonOutcome newtonImpl(const ReservoirModel& model, const SimState& previous, double dt,
                         const SolverControls& controls, LinearSolver& solver)
{
    const auto nc = model.cellCount();
    const auto nw = model.wells.size();
    const auto n = Eigen::Index(2 * nc + nw);
    auto out = NewtonOutcome {};
    out.state = previous;
    auto& st = out.state;

    // Row scaling to the dimensionless convergence measures; pressure columns in bar.
    auto rowScale = Eigen::VectorXd(n);
    for (std::size_t c = 0; c < nc; ++c)
        for (int ph = 0; ph < 2; ++ph)
            rowScale[Eigen::Index(2 * c + ph)] =
                dt / (model.poreVolumes[c] * model.fluid.density.referenceDensity[ph]);
    for (std::size_t w = 0; w < nw; ++w)
    {
        const auto& ctl = model.wells[w].control;
        rowScale[Eigen::Index(2 * nc + w)] =
            ctl.type == wells::ControlType::Rate ? 1.0 / std::max(std::abs(ctl.target), 1e-30) : 1e-5;
    }
    auto colScale = Eigen::VectorXd(n);
    for (std::size_t c = 0; c < nc; ++c)
    {
        colScale[Eigen::Index(2 * c)] = 1e5;
        colScale[Eigen::Index(2 * c + 1)] = 1.0;
    }
    for (std::size_t w = 0; w < nw; ++w)
        colScale[Eigen::Index(2 * nc + w)] = 1e5;

    for (int it = 0;; ++it)
    {
        Residual res;
        try
        {
            res = assembleResidual(model, st, previous, dt, true);
        }
        catch (const Error& e)
        {
            out.failure = e.kind();
            out.message = e.what();
            if (e.kind() == ErrorKind::NonphysicalState)
                parseNonphysicalDetail(e, out);
            return out;
        }
        auto norms = residualNorms(model, st, res.values, dt);
        out.trace.push_back(norms);
        if (!finite(norms))
        {
            out.failure = ErrorKind::ConvergenceFailure;
            out.message = "non-finite residual";
            return out;
        }
        if (converged(norms, controls))
        {
            auto inBounds = std::all_of(st.sw.begin(), st.sw.end(), [](double s) { return s >= 0.0 && s <= 1.0; });
            if (inBounds)
            {
                out.converged = true;
                return out;
            }
        }
        if (it >= controls.newtonMaxIters)
        {
            out.failure = ErrorKind::ConvergenceFailure;
            out.message = "Newton iteration limit (" + std::to_string(controls.newtonMaxIters) + ") exceeded";
            return out;
        }

        Eigen::SparseMatrix<double> scaled = rowScale.asDiagonal() * res.jacobian * colScale.asDiagonal();
        scaled.makeCompressed();
        if (!solver.analyzed || solver.nonZeros != scaled.nonZeros())
        {
            solver.lu.analyzePattern(scaled);
            solver.analyzed = true;
            solver.nonZeros = scaled.nonZeros();
        }
        solver.lu.factorize(scaled);
        if (solver.lu.info() != Eigen::Success)
        {
            out.failure = ErrorKind::LinearSolverFailure;
            out.message = "sparse LU factorization failed: " + solver.lu.lastErrorMessage();
            return out;
        }
        Eigen::VectorXd rhs = -(rowScale.asDiagonal() * res.values);
        Eigen::VectorXd y = solver.lu.solve(rhs);
        if (solver.lu.info() != Eigen::Success || !y.allFinite())
        {
            out.failure = ErrorKind::LinearSolverFailure;
            out.message = "sparse LU solve failed";
            return out;
        }
        Eigen::VectorXd dx = colScale.asDiagonal() * y;
        ++out.iterations;

        for (std::size_t c = 0; c < nc; ++c)
        {
            st.pressure[c] += dx[Eigen::Index(2 * c)];
            auto ds = std::clamp(dx[Eigen::Index(2 * c + 1)], -controls.maxSaturationChange,
                                 controls.maxSaturationChange);
            st.sw[c] = std::clamp(st.sw[c] + ds, 0.0, 1.0);
        }
        for (std::size_t w = 0; w < nw; ++w)
            st.bhp[w] += dx[Eigen::Index(2 * nc + w)];
    }
}

double averagePressure(const ReservoirModel& model, const SimState& s)
{
    auto num = 0.0;
    auto den = 0.0;
    for (std::size_t c = 0; c < model.cellCount(); ++c)
    {
        num += model.poreVolumes[c] * s.pressure[c];
        den += model.poreVolumes[c];
    }
    return num / den;
}

} // namespace

NewtonOutcome newtonSolve(const ReservoirModel& model, const SimState& previous, double dt,
                          const SolverControls& controls)
{
    if (!(dt > 0.0))
        throw Error(ErrorKind::InvariantViolation, "dt must be > 0");
    auto solver = LinearSolver {};
    return newtonImpl(model, previous, dt, controls, solver);
}

RunResult simulate(const ReservoirModel& model, const SimState& initial, const wells::Schedule& schedule,
                   const SolverControls& controls)
{
    controls.validate();
    schedule.validate();
    auto started = std::chrono::steady_clock::now();

    auto result = RunResult {};
    for (const auto& w: model.wells)
    {
        result.wellNames.push_back(w.name);
        result.wellKinds.push_back(w.kind);
    }
    result.reportTimes = schedule.reportTimes;
    result.scheduleEnd = schedule.totalTime;
    result.poreVolume = model.totalPoreVolume();
    result.initialAveragePressure = averagePressure(model, initial);
    auto& diag = result.diagnostics;

    auto solver = LinearSolver {};
    auto state = initial;
    auto t = 0.0;
    auto dt = controls.initialDt;
    auto cumulative = 0.0;
    std::size_t report = 0;
    auto flagged = std::vector<bool>(model.wells.size(), false);

    auto finish = [&] {
        diag.wallSeconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
        result.endTime = t;
    };

    while (report < schedule.reportTimes.size())
    {
        auto target = schedule.reportTimes[report];
        auto step = std::min(dt, controls.maxDt);
        auto clipped = false;
        auto reachesTarget = false;
        if (t + step >= target - 1e-3 * step)
        {
            clipped = step > target - t;
            step = target - t;
            reachesTarget = true;
        }

        auto cuts = 0;
        NewtonOutcome outcome;
        for (;;)
        {
            outcome = newtonImpl(model, state, step, controls, solver);
            diag.totalNewtonIterations += outcome.iterations;
            diag.attempts.push_back({t, step, outcome.iterations, outcome.trace, outcome.converged});
            if (outcome.converged)
                break;
            ++cuts;
            ++diag.totalCuts;
            if (cuts > controls.maxCutsPerStep || step * controls.cutFactor < controls.minDt)
            {
                auto fail = RunFailure {};
                fail.kind = outcome.failure.value_or(ErrorKind::ConvergenceFailure);
                fail.message = outcome.message + " after " + std::to_string(cuts - 1) + " timestep cut(s)";
                fail.stepIndex = int(diag.accepted.size());
                fail.time = t;
                fail.dt = step;
                fail.lastTrace = outcome.trace;
                fail.cell = outcome.cell;
                fail.phase = outcome.phase;
                result.failure = fail;
                finish();
                return result;
            }
            step *= controls.cutFactor;
            clipped = false;
            reachesTarget = false;
        }

        state = std::move(outcome.state);
        t = reachesTarget ? target : t + step;

        auto accepted = AcceptedStep {};
        accepted.time = t;
        accepted.dt = step;
        auto final = outcome.trace.back();
        accepted.massBalanceError = final.mb;
        accepted.cnv = final.cnv;
        auto injected = 0.0;
        for (std::size_t w = 0; w < model.wells.size(); ++w)
        {
            auto eval = wellEquations(model, w, state);
            accepted.wells.push_back({eval.volumetricRate[Wetting], eval.volumetricRate[NonWetting], state.bhp[w]});
            if (model.wells[w].kind == wells::WellKind::Injector)
                injected += eval.volumetricRate[Wetting] + eval.volumetricRate[NonWetting];
            auto cross = std::any_of(eval.connections.begin(), eval.connections.end(),
                                     [](const WellConnectionRate& c) { return c.crossflow; });
            if (cross && !flagged[w])
            {
                flagged[w] = true;
                diag.crossflowWarnings.push_back("cross-flow at injector " + model.wells[w].name + " at t=" +
                                                 std::to_string(t));
            }
        }
        cumulative += injected * step;
        accepted.cumulativeInjection = cumulative;
        accepted.averagePressure = averagePressure(model, state);
        diag.accepted.push_back(std::move(accepted));

        if (reachesTarget)
        {
            result.snapshots.push_back(state);
            ++report;
        }
        dt = clipped ? dt : std::min(step * controls.growthFactor, controls.maxDt);
    }

    finish();
    result.certificate = true;
    return result;
}

bool certificateConsistent(const RunResult& result, const SolverControls& controls)
{
    if (!result.certificate)
        return true;
    if (result.diagnostics.accepted.empty() || result.endTime != result.scheduleEnd)
        return false;
    auto prev = 0.0;
    for (const auto& s: result.diagnostics.accepted)
    {
        if (!(s.time > prev))
            return false;
        prev = s.time;
        for (int ph = 0; ph < 2; ++ph)
            if (s.massBalanceError[ph] > controls.mbTolerance || s.cnv[ph] > controls.cnvTolerance)
                return false;
    }
    return prev == result.scheduleEnd && result.snapshots.size() == result.reportTimes.size();
}

std::vector<PviSample> pviCurve(const RunResult& result, double poreVolume)
{
    if (!(poreVolume > 0.0))
        throw Error(ErrorKind::OutOfRange, "pore volume must be > 0");
    auto out = std::vector<PviSample> {{0.0, 0.0}};
    for (const auto& s: result.diagnostics.accepted)
        out.push_back({s.cumulativeInjection / poreVolume, s.time});
    return out;
}

double timeAtPvi(const RunResult& result, double poreVolume, double pvi)
{
    auto curve = pviCurve(result, poreVolume);
    if (pvi < 0.0 || pvi > curve.back().pvi * (1.0 + 1e-12))
        throw Error(ErrorKind::OutOfRange, "requested PVI " + std::to_string(pvi) + " beyond final PVI " +
                                               std::to_string(curve.back().pvi));
    for (std::size_t n = 1; n < curve.size(); ++n)
        if (pvi <= curve[n].pvi)
        {
            auto span = curve[n].pvi - curve[n - 1].pvi;
            auto w = span > 0.0 ? (pvi - curve[n - 1].pvi) / span : 1.0;
            return curve[n - 1].time + w * (curve[n].time - curve[n - 1].time);
        }
    return curve.back().time;
}

namespace
{

double interpolateAveragePressure(const RunResult& result, double time)
{
    auto prevT = 0.0;
    auto prevP = result.initialAveragePressure;
    for (const auto& s: result.diagnostics.accepted)
    {
        if (time <= s.time)
        {
            auto w = (time - prevT) / (s.time - prevT);
            return prevP + w * (s.averagePressure - prevP);
        }
        prevT = s.time;
        prevP = s.averagePressure;
    }
    return prevP;
}

} // namespace

std::vector<PviSnapshot> pviSeries(const RunResult& result, double poreVolume, const std::vector<double>& fractions)
{
    if (result.snapshots.empty())
        throw Error(ErrorKind::OutOfRange, "run has no report-step snapshots");
    auto out = std::vector<PviSnapshot> {};
    for (auto f: fractions)
    {
        auto t = timeAtPvi(result, poreVolume, f);
        auto best = std::size_t {0};
        for (std::size_t r = 1; r < result.snapshots.size(); ++r)
            if (std::abs(result.reportTimes[r] - t) < std::abs(result.reportTimes[best] - t))
                best = r;
        auto snap = PviSnapshot {};
        snap.requestedPvi = f;
        snap.time = result.reportTimes[best];
        snap.reportIndex = best;
        auto curve = pviCurve(result, poreVolume);
        for (const auto& s: curve)
            if (s.time == snap.time)
                snap.snapshotPvi = s.pvi;
        snap.averagePressure = interpolateAveragePressure(result, t);
        out.push_back(snap);
    }
    return out;
}

std::vector<double> producerWaterCut(const RunResult& result)
{
    auto out = std::vector<double> {};
    for (const auto& s: result.diagnostics.accepted)
    {
        auto qw = 0.0;
        auto qo = 0.0;
        for (std::size_t w = 0; w < s.wells.size(); ++w)
            if (result.wellKinds[w] == wells::WellKind::Producer)
            {
                qw -= s.wells[w].water;
                qo -= s.wells[w].oil;
            }
        out.push_back(qw + qo > 0.0 ? qw / (qw + qo) : 0.0);
    }
    return out;
}

std::optional<double> breakthroughPvi(const RunResult& result, double poreVolume, double threshold)
{
    auto wc = producerWaterCut(result);
    auto prevPvi = 0.0;
    auto prevWc = 0.0;
    for (std::size_t n = 0; n < wc.size(); ++n)
    {
        auto pvi = result.diagnostics.accepted[n].cumulativeInjection / poreVolume;
        if (wc[n] >= threshold)
        {
            auto w = (threshold - prevWc) / (wc[n] - prevWc);
            return prevPvi + w * (pvi - prevPvi);
        }
        prevPvi = pvi;
        prevWc = wc[n];
    }
    return std::nullopt;
}

} // namespace groundloop::sim
