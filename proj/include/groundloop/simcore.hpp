// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <groundloop/error.hpp>
#include <groundloop/fluid.hpp>
#include <groundloop/mesh.hpp>
#include <groundloop/petro.hpp>
#include <groundloop/wells.hpp>

#include <Eigen/SparseCore>

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace groundloop::sim
{

inline constexpr double kStandardGravity = 9.80665;

struct Connection
{
    std::size_t a = 0;
    std::size_t b = 0;
    double transmissibility = 0.0; ///< m^3, geometric part
    double depthDelta = 0.0;       ///< depth(a) - depth(b)
};

struct ReservoirModel
{
    mesh::Mesh mesh;
    mesh::GeometrySummary geometry;
    petro::PropertyField permeability;
    petro::PropertyField porosity;
    fluid::FluidSystem fluid;
    double gravity = kStandardGravity;
    std::vector<Connection> connections; ///< one per interior face
    std::vector<double> poreVolumes;
    std::vector<wells::Well> wells;

    [[nodiscard]] std::size_t cellCount() const { return poreVolumes.size(); }
    [[nodiscard]] double totalPoreVolume() const;
};

/// Two-point half transmissibilities A (K n).d / |d|^2 combined harmonically.
std::vector<Connection> computeTransmissibilities(const mesh::GeometrySummary& geometry,
                                                  const petro::PropertyField& permeability);

ReservoirModel buildReservoirModel(mesh::Mesh mesh, mesh::GeometrySummary geometry, petro::PropertyField permeability,
                                   petro::PropertyField porosity, fluid::FluidSystem fluid, double gravity,
                                   std::vector<wells::Well> wells = {});

/// Fixes the wellbore density from the fluid's reference densities.
void assignWellboreDensities(ReservoirModel& model);

struct SimState
{
    std::vector<double> pressure;
    std::vector<double> sw;
    std::vector<double> bhp;

    static SimState uniform(const ReservoirModel& model, double pressure, double sw);
};

struct SolverControls
{
    int newtonMaxIters = 15;
    double cnvTolerance = 1e-6;
    double mbTolerance = 1e-7;
    /// Rate-controlled wells: |achieved - target| <= wellTolerance * |target|.
    double wellTolerance = 1e-12;
    double initialDt = 86400.0;
    double minDt = 1.0;
    double maxDt = 30.0 * 86400.0;
    double cutFactor = 0.5;
    double growthFactor = 1.5;
    int maxCutsPerStep = 10;
    /// Newton saturation update chop per iteration.
    double maxSaturationChange = 0.2;

    void validate() const;
};

struct ResidualNorms
{
    std::array<double, 2> cnv {};
    std::array<double, 2> mb {};
    double well = 0.0;
};

struct Residual
{
    Eigen::VectorXd values;
    Eigen::SparseMatrix<double> jacobian;
};

/// Unknown and equation layout: [p_0, sw_0, p_1, sw_1, ..., bhp_0, ...];
/// row 2c is the wetting mass balance of cell c, 2c+1 the non-wetting one,
/// then one control equation per well. Cell rows are kg/s.
Residual assembleResidual(const ReservoirModel& model, const SimState& state, const SimState& previous, double dt,
                          bool withJacobian = true);

ResidualNorms residualNorms(const ReservoirModel& model, const SimState& state, const Eigen::VectorXd& residual,
                            double dt);

struct WellConnectionRate
{
    std::size_t cell = 0;
    std::array<double, 2> mass {}; ///< kg/s into the reservoir
    bool crossflow = false;
};

struct WellEvaluation
{
    std::vector<WellConnectionRate> connections;
    double controlResidual = 0.0;
    std::array<double, 2> volumetricRate {}; ///< m^3/s at reference density, + into reservoir
};

WellEvaluation wellEquations(const ReservoirModel& model, std::size_t wellIndex, const SimState& state);

struct NewtonOutcome
{
    bool converged = false;
    SimState state;
    int iterations = 0;
    std::vector<ResidualNorms> trace;
    std::optional<ErrorKind> failure;
    std::string message;
    long cell = -1;
    int phase = -1;
};

NewtonOutcome newtonSolve(const ReservoirModel& model, const SimState& previous, double dt,
                          const SolverControls& controls);

struct StepAttempt
{
    double time = 0.0; ///< start of the attempted step
    double dt = 0.0;
    int iterations = 0;
    std::vector<ResidualNorms> trace;
    bool accepted = false;
};

struct WellRate
{
    double water = 0.0; ///< m^3/s at reference density, + into reservoir
    double oil = 0.0;
    double bhp = 0.0;
};

struct AcceptedStep
{
    double time = 0.0; ///< end of step
    double dt = 0.0;
    std::array<double, 2> massBalanceError {};
    std::array<double, 2> cnv {};
    std::vector<WellRate> wells;
    double averagePressure = 0.0;
    double cumulativeInjection = 0.0; ///< m^3 at reference density
};

struct Diagnostics
{
    std::vector<StepAttempt> attempts;
    std::vector<AcceptedStep> accepted;
    int totalCuts = 0;
    int totalNewtonIterations = 0;
    double wallSeconds = 0.0;
    std::vector<std::string> crossflowWarnings;
};

struct RunFailure
{
    ErrorKind kind = ErrorKind::ConvergenceFailure;
    std::string message;
    int stepIndex = 0; ///< index of the report-step-independent accepted step that could not be completed
    double time = 0.0;
    double dt = 0.0;
    std::vector<ResidualNorms> lastTrace;
    long cell = -1;
    int phase = -1;
};

struct RunResult
{
    std::vector<std::string> wellNames;
    std::vector<wells::WellKind> wellKinds;
    std::vector<double> reportTimes;
    std::vector<SimState> snapshots; ///< one per reached report time
    double initialAveragePressure = 0.0;
    double poreVolume = 0.0;
    Diagnostics diagnostics;
    bool certificate = false;
    std::optional<RunFailure> failure;
    double endTime = 0.0;
    double scheduleEnd = 0.0;
};

/// Steps through the schedule with cut/grow timestep control. The certificate is
/// set only if the end time is reached with every accepted step within tolerance.
RunResult simulate(const ReservoirModel& model, const SimState& initial, const wells::Schedule& schedule,
                   const SolverControls& controls);

/// Re-checks certificate soundness from the recorded diagnostics.
bool certificateConsistent(const RunResult& result, const SolverControls& controls);

struct PviSample
{
    double pvi = 0.0;
    double time = 0.0;
};

struct PviSnapshot
{
    double requestedPvi = 0.0;
    double time = 0.0;           ///< report time of the chosen snapshot
    double snapshotPvi = 0.0;
    std::size_t reportIndex = 0;
    double averagePressure = 0.0; ///< interpolated at the requested PVI
};

/// (time, PVI) for t = 0 and every accepted step.
std::vector<PviSample> pviCurve(const RunResult& result, double poreVolume);
/// Linear interpolation of time at a PVI value; throws out-of-range beyond the final PVI.
double timeAtPvi(const RunResult& result, double poreVolume, double pvi);
std::vector<PviSnapshot> pviSeries(const RunResult& result, double poreVolume, const std::vector<double>& fractions);

/// Field water cut at producers for each accepted step (0 if nothing is produced).
std::vector<double> producerWaterCut(const RunResult& result);
/// First PVI at which the producer water cut reaches `threshold` (linear interpolation), or nullopt.
std::optional<double> breakthroughPvi(const RunResult& result, double poreVolume, double threshold = 0.01);

} // namespace groundloop::sim
