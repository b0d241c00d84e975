// SPDX-License-Identifier: Apache-2.0
// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include "../support/fixtures.hpp"
#include "../support/specs.hpp"

#include <groundloop/audit.hpp>
#include <groundloop/orchestrator.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <sstream>

using namespace groundloop;
using spec::Json;

namespace
{

using Clock = std::chrono::steady_clock;

double secondsSince(Clock::time_point start)
{
    return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Outcome
{
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* format, double a, double b = 0.0, double c = 0.0, double d = 0.0)
{
    char buf[256];
    std::snprintf(buf, sizeof buf, format, a, b, c, d);
    return buf;
}

/// A certified-or-not run remembered for the conservation criterion.
struct NamedRun
{
    std::string name;
    sim::RunResult result;
    sim::SolverControls controls;
};

struct Context
{
    std::vector<NamedRun> runs;
    std::optional<audit::Subject> favorable;
    std::optional<audit::Subject> unfavorable;
    double fiveSpotSeconds = 0.0;

    void remember(const std::string& name, const pipeline::Run& run)
    {
        runs.push_back({name, run.result, run.built.controls});
    }

    void fiveSpots()
    {
        if (favorable)
            return;
        auto start = Clock::now();
        favorable = audit::runSubject(audit::reconstruct(fixtures::bundledSpec("fivespot.json")));
        unfavorable = audit::runSubject(audit::reconstruct(fixtures::bundledSpec("fivespot_unfavorable.json")));
        fiveSpotSeconds = secondsSince(start);
        remember("fivespot M=0.2", favorable->run);
        remember("fivespot M=5", unfavorable->run);
    }
};

double finalPvi(const sim::RunResult& r)
{
    return r.diagnostics.accepted.back().cumulativeInjection / r.poreVolume;
}

Outcome buckleyLeverett(Context& ctx)
{
    auto start = Clock::now();
    auto bl = fixtures::buckleyLeverett(200);
    auto result = sim::simulate(bl.model, bl.initial, bl.schedule, bl.controls);
    auto elapsed = secondsSince(start);
    ctx.runs.push_back({"buckley-leverett", result, bl.controls});
    auto oracle = fixtures::welgeBreakthroughPvi();
    auto bt = sim::breakthroughPvi(result, bl.model.totalPoreVolume());
    if (!result.certificate || !bt)
        return {false, "run not certified or no breakthrough"};
    auto rel = std::abs(*bt - oracle) / oracle;
    return {rel <= 0.05 && elapsed < 10.0,
            fmt("breakthrough %.4f PVI vs Welge %.4f (%.2f%%), %.1f s", *bt, oracle, 100.0 * rel, elapsed)};
}

Outcome conservation(Context& ctx)
{
    auto worstMb = 0.0;
    auto worstCnv = 0.0;
    auto certified = 0;
    for (const auto& r: ctx.runs)
    {
        auto bounded = true;
        for (const auto& s: r.result.diagnostics.accepted)
        {
            auto mb = std::max(std::abs(s.massBalanceError[0]), std::abs(s.massBalanceError[1]));
            auto cnv = std::max(s.cnv[0], s.cnv[1]);
            bounded = bounded && mb <= 1e-7 && cnv <= 1e-6 && mb <= r.controls.mbTolerance &&
                      cnv <= r.controls.cnvTolerance;
            worstMb = std::max(worstMb, mb);
            worstCnv = std::max(worstCnv, cnv);
        }
        auto completed = r.result.endTime == r.result.scheduleEnd;
        if (r.result.certificate != (completed && bounded))
            return {false, r.name + ": certificate disagrees with completion and tolerances"};
        if (!sim::certificateConsistent(r.result, r.controls))
            return {false, r.name + ": certificate inconsistent with its diagnostics"};
        certified += r.result.certificate ? 1 : 0;
    }

    // a run that cannot finish must not be certified
    auto failing = fixtures::fixtureSpec("convergence_failure.json");
    auto run = pipeline::run(*spec::resolve(failing).config);
    if (run.result.certificate || run.result.endTime >= run.result.scheduleEnd)
        return {false, "the unrevised convergence fixture was certified"};

    return {certified > 0 && certified == static_cast<int>(ctx.runs.size()),
            std::to_string(certified) + " certified runs; worst mass balance " + fmt("%.2e, worst cnv %.2e", worstMb, worstCnv) +
                "; failing fixture uncertified"};
}

Outcome fiveSpotContrast(Context& ctx)
{
    ctx.fiveSpots();
    const auto& fav = ctx.favorable->run;
    const auto& unf = ctx.unfavorable->run;
    if (!fav.result.certificate || !unf.result.certificate)
        return {false, "a five-spot run is not certified"};
    auto mobility = [](const spec::ExecutableConfig& c) { return c.fluid.viscosity[1] / c.fluid.viscosity[0]; };
    auto pviErr = std::max(std::abs(finalPvi(fav.result) - 1.0), std::abs(finalPvi(unf.result) - 1.0));
    auto btFav = sim::breakthroughPvi(fav.result, fav.result.poreVolume);
    auto btUnf = sim::breakthroughPvi(unf.result, unf.result.poreVolume);
    if (!btFav || !btUnf)
        return {false, "no breakthrough in one of the runs"};
    auto pass = std::abs(mobility(fav.config) - 0.2) < 1e-12 && std::abs(mobility(unf.config) - 5.0) < 1e-12 &&
                pviErr <= 1e-10 && *btFav > *btUnf && ctx.fiveSpotSeconds < 120.0;
    return {pass, fmt("breakthrough %.3f (M=0.2) vs %.3f (M=5) PVI, |PVI-1| %.1e, %.1f s", *btFav, *btUnf, pviErr,
                      ctx.fiveSpotSeconds)};
}

Outcome jacobian(Context&)
{
    auto f = fluid::FluidSystem {};
    f.relperm = {fluid::RelPermFamily::BrooksCorey, {2.0, 3.0}, {0.1, 0.15}, {0.9, 1.0}};
    f.density.referencePressure = 1e7;
    f.density.compressibility = {4e-10, 1e-9};
    auto dims = mesh::MeshDims {2, 1, 2, 40.0, 20.0, 10.0, 1000.0};
    auto deformation = mesh::DeformationSpec {};
    deformation.domeAmplitude = 3.0;
    deformation.domeRadius = 30.0;
    auto m = mesh::applyDome(mesh::buildCartesianMesh(dims), deformation);
    auto geo = mesh::computeGeometry(m);
    auto model = sim::buildReservoirModel(std::move(m), std::move(geo),
                                          {"permeability", "m2", {1e-13, 3e-13, 2e-13, 5e-14}},
                                          {"porosity", "1", {0.2, 0.25, 0.18, 0.3}}, f, sim::kStandardGravity);
    model.wells.push_back(wells::setupVerticalWell(model.mesh, model.geometry, model.permeability, "I", 0, 0, 0, 1, 0.1,
                                                   0.0, wells::WellKind::Injector, wells::WellControl::rate(1e-4)));
    model.wells.push_back(wells::setupVerticalWell(model.mesh, model.geometry, model.permeability, "P", 1, 0, 0, 1, 0.1,
                                                   1.0, wells::WellKind::Producer, wells::WellControl::bhp(9e6)));
    sim::assignWellboreDensities(model);

    auto rng = std::mt19937_64(2024);
    auto u = std::uniform_real_distribution<double>(0.0, 1.0);
    auto prev = sim::SimState::uniform(model, 1e7, 0.5);
    auto s = prev;
    for (std::size_t c = 0; c < 4; ++c)
    {
        prev.pressure[c] = 1e7 + 1e5 * u(rng);
        s.pressure[c] = 1e7 + 5e5 * u(rng);
        s.sw[c] = 0.3 + 0.4 * u(rng);
    }
    s.bhp = {1.2e7 + 1e5 * u(rng), 9e6};
    auto dt = 3600.0 * (1.0 + u(rng));
    auto res = sim::assembleResidual(model, s, prev, dt);
    Eigen::MatrixXd jac = Eigen::MatrixXd(res.jacobian);

    // unknowns ordered (p, sw) per cell, then well BHPs
    auto perturbed = [&](Eigen::Index j, double h) {
        auto x = s;
        if (j < 8)
            (j % 2 == 0 ? x.pressure : x.sw)[std::size_t(j / 2)] += h;
        else
            x.bhp[std::size_t(j - 8)] += h;
        return sim::assembleResidual(model, x, prev, dt, false).values;
    };
    auto worst = 0.0;
    auto compared = 0;
    for (Eigen::Index j = 0; j < jac.cols(); ++j)
    {
        auto h = (j < 8 && j % 2 == 1) ? 1e-6 : 1.0;
        Eigen::VectorXd fd = (perturbed(j, h) - perturbed(j, -h)) / (2.0 * h);
        for (Eigen::Index i = 0; i < jac.rows(); ++i)
        {
            auto scale = jac.row(i).cwiseAbs().maxCoeff();
            if (std::abs(jac(i, j)) <= 1e-12 * scale)
                continue;
            worst = std::max(worst, std::abs(jac(i, j) - fd[i]) / std::abs(jac(i, j)));
            ++compared;
        }
    }
    return {worst <= 1e-5, fmt("max relative error %.2e over %.0f entries", worst, compared)};
}

Outcome moments(Context&)
{
    auto p = petro::momentMatch(100.0, 30.0);
    auto mean = std::exp(p.logMu + 0.5 * p.logSigma * p.logSigma);
    auto std = mean * std::sqrt(std::exp(p.logSigma * p.logSigma) - 1.0);
    auto roundTrip = std::max(std::abs(mean - 100.0) / 100.0, std::abs(std - 30.0) / 30.0);

    auto stream = petro::NormalStream(7);
    auto n = 1000000;
    auto sum = 0.0;
    auto sq = 0.0;
    for (int k = 0; k < n; ++k)
    {
        auto x = stream.lognormal(p);
        sum += x;
        sq += x * x;
    }
    auto m = sum / n;
    auto sd = std::sqrt(sq / n - m * m);
    auto meanErr = std::abs(m - 100.0) / 100.0;
    auto stdErr = std::abs(sd - 30.0) / 30.0;
    return {meanErr <= 0.005 && stdErr <= 0.01 && roundTrip <= 1e-12,
            fmt("mean %.3f, std %.3f from 1e6 draws; analytic round trip %.1e", m, sd, roundTrip)};
}

struct UnitMoments
{
    double mean = 0.0;
    double std = 0.0;
};

UnitMoments unitMoments(const mesh::Mesh& mesh, const std::vector<double>& values, int unit)
{
    auto sum = 0.0;
    auto sq = 0.0;
    auto n = 0.0;
    for (std::size_t c = 0; c < values.size(); ++c)
        if (mesh.layerOfCell[c] == unit)
        {
            sum += values[c];
            sq += values[c] * values[c];
            n += 1.0;
        }
    auto mean = sum / n;
    return {mean, std::sqrt(std::max(0.0, sq / n - mean * mean))};
}

Outcome sampling(Context&)
{
    auto config = *spec::resolve(fixtures::bundledSpec("dome_reference.json")).config;
    auto mesh = pipeline::buildMesh(config);
    auto plan = config.sampling;
    if (plan.seed != 12345 || config.dims.nx != 20 || config.dims.ny != 20 || config.dims.nz != 6)
        return {false, "dome fixture is not the 20x20x6 seed-12345 model"};
    plan.strategy = petro::SamplingStrategy::LayerBatched;
    auto a = petro::sampleFields(mesh, config.layers, plan);
    auto b = petro::sampleFields(mesh, config.layers, plan);
    plan.strategy = petro::SamplingStrategy::CellInterleaved;
    auto c = petro::sampleFields(mesh, config.layers, plan);
    auto deterministic = a.permeability.contentHash() == b.permeability.contentHash() &&
                         a.porosity.contentHash() == b.porosity.contentHash();
    auto sensitive = a.permeability.contentHash() != c.permeability.contentHash() &&
                     a.porosity.contentHash() != c.porosity.contentHash();
    auto worst = 0.0;
    for (const auto* f: {&a, &c})
        for (int u = 0; u < mesh.unitCount; ++u)
        {
            const auto& target = config.layers[std::size_t(u)];
            auto k = unitMoments(mesh, f->permeability.values, u);
            auto phi = unitMoments(mesh, f->porosity.values, u);
            worst = std::max({worst, std::abs(k.mean / target.permeability.mean - 1.0),
                              std::abs(k.std / target.permeability.std - 1.0),
                              std::abs(phi.mean / target.porosity.mean - 1.0),
                              std::abs(phi.std / target.porosity.std - 1.0)});
        }
    return {deterministic && sensitive && worst <= 0.05,
            std::string(deterministic ? "repeat hashes equal" : "repeat hashes differ") +
                (sensitive ? ", strategies differ" : ", strategies agree") +
                fmt("; worst per-unit moment deviation %.2f%%", 100.0 * worst)};
}

Outcome deformation(Context&)
{
    auto config = *spec::resolve(fixtures::bundledSpec("dome_reference.json")).config;
    auto flat = mesh::buildCartesianMesh(config.dims, config.deformation.interfaceDepths);
    auto deformed = pipeline::buildMesh(config);
    const auto& d = config.dims;
    auto bottom = 0.0;
    for (int j = 0; j <= d.ny; ++j)
        for (int i = 0; i <= d.nx; ++i)
        {
            auto n = deformed.nodeIndex(i, j, d.nz);
            bottom = std::max(bottom, mesh::norm(deformed.nodes[n] - flat.nodes[n]));
        }
    auto crest = deformed.nodeIndex(d.nx / 2, d.ny / 2, 0);
    auto uplift = flat.nodes[crest].z - deformed.nodes[crest].z;
    auto monotone = true;
    try
    {
        mesh::checkPillarMonotone(deformed);
    }
    catch (const Error&)
    {
        monotone = false;
    }
    return {bottom <= 1e-12 && uplift == 30.0 && config.deformation.domeAmplitude == 30.0 && monotone,
            fmt("bottom displacement %.1e m, crest uplift %.12g m", bottom, uplift) +
                (monotone ? ", pillars monotone" : ", pillar inversion")};
}

Outcome ledger(Context&)
{
    auto journal = fixtures::bundledSpec("dome_journal.json");
    if (journal.level != spec::Level::Journal)
        return {false, "fixture is not a journal-level spec"};
    auto r = spec::resolve(journal);
    if (!r.config)
        return {false, "autonomous resolution did not produce a config"};
    auto counts = std::map<std::string, int> {};
    auto simulatorDefaults = 0;
    for (const auto& e: r.ledger.entries)
    {
        ++counts[e.key];
        simulatorDefaults += e.provenance == spec::Provenance::SimulatorDefault ? 1 : 0;
    }
    auto total = counts.size() == spec::checklist().items.size();
    for (const auto& item: spec::checklist().items)
        total = total && counts[item.key] == 1;

    auto [legacy, legacyLedger] = spec::legacyBuild(journal);
    auto report = spec::defaultsAudit(legacy, legacyLedger);
    auto second = spec::defaultsAudit(legacy, legacyLedger);
    auto pass = total && simulatorDefaults == 0 && !report.empty() && report.contains("density_closure") &&
                second.empty();
    return {pass, std::to_string(r.ledger.entries.size()) + " ledger entries, " + std::to_string(simulatorDefaults) +
                      " simulator defaults; bypassed build has " + std::to_string(report.entries.size()) +
                      " tacit keys" + (report.contains("density_closure") ? " incl. density_closure" : "") +
                      (second.empty() ? "; second audit empty" : "; second audit not empty")};
}

Outcome reconstruction(Context& ctx)
{
    auto reference = fixtures::bundledSpec("dome_reference.json");
    auto start = Clock::now();
    auto ref = audit::runSubject(audit::reconstruct(reference));
    ctx.remember("dome reference", ref.run);

    auto tacit = reference;
    tacit.doc["fluids"].erase("density_closure");
    auto policy = spec::ResolvePolicy {};
    policy.defaults.values["density_closure"] = {
        {"/fluids/density_closure",
         {{"kind", "incompressible"}, {"reference_pressure", 150e5}, {"compressibility", {0.0, 0.0}}}}};
    policy.defaults.rationale["density_closure"] = "zero compressibility";
    auto closure = audit::runSubject(audit::reconstruct(tacit, policy));
    ctx.remember("dome incompressible", closure.run);

    auto interleaved = reference;
    interleaved.doc["sampling"]["strategy"] = "cell_interleaved";
    auto order = audit::runSubject(audit::reconstruct(interleaved));
    ctx.remember("dome cell-interleaved", order.run);

    auto closureDiff = audit::diff(ref, closure);
    const auto& key = closureDiff.key("density_closure");
    auto attributed = key.status == audit::DiffStatus::Differs && key.attribution &&
                      key.attribution->provenance == spec::Provenance::AgentDefault &&
                      audit::sameValue(key.attribution->value, key.candidate, 0.0);
    auto pressureApart = closureDiff.responses.pressureDeltaRel > closureDiff.tolerances.statsRel;

    ctx.fiveSpots();
    auto contrast = audit::diff(*ctx.favorable, *ctx.unfavorable).responses.rateL1;
    auto orderDiff = audit::diff(ref, order);
    auto orderQuiet = orderDiff.closureDiffs().empty() && orderDiff.responses.rateL1 < contrast;

    auto matrix = audit::auditMatrix(reference, ref);
    auto counts = std::vector<long> {};
    for (const auto& row: matrix.rows)
        counts.push_back(row.report ? static_cast<long>(row.report->differingKeys().size()) : -1);
    auto monotone = counts.size() == 3 && counts[0] >= 0 && counts[0] <= counts[1] && counts[1] <= counts[2];

    std::cerr << matrix.csv();
    auto detail = std::string(attributed ? "density_closure attributed to AgentDefault" : "density_closure not attributed") +
                  fmt("; pressure max deviation %.2f%%; sampling rate L1 %.4f vs contrast %.4f", 100.0 * closureDiff.responses.pressureDeltaRel,
                      orderDiff.responses.rateL1, contrast) +
                  "; differing keys " + std::to_string(counts.size() > 0 ? counts[0] : -1) + "/" +
                  std::to_string(counts.size() > 1 ? counts[1] : -1) + "/" +
                  std::to_string(counts.size() > 2 ? counts[2] : -1) + fmt("; %.0f s", secondsSince(start));
    return {attributed && pressureApart && orderQuiet && monotone, detail};
}

Outcome orchestratorLoop(Context& ctx)
{
    auto terminalStates = std::vector<orch::SessionState> {};
    auto rr = orch::RuleResolver {};
    auto log = orch::EventLog {};
    auto state = orch::runLoop(fixtures::fixtureSpec("convergence_failure.json"), {}, rr, log);
    terminalStates.push_back(state);
    auto adjustments = 0;
    auto other = 0;
    for (const auto& e: log.all())
        if (e.kind == "directive")
            (e.payload["directive"]["kind"] == "AdjustSolver" ? adjustments : other) += 1;
    if (state.run)
        ctx.remember("convergence fixture", *state.run);

    auto outcome = orch::replay(log.all());
    terminalStates.push_back(outcome.state);

    auto failingLog = orch::EventLog {};
    terminalStates.push_back(orch::runLoop(fixtures::fixtureSpec("negative_porosity.json"), {}, rr, failingLog));

    auto sound = std::all_of(terminalStates.begin(), terminalStates.end(), [](const orch::SessionState& s) {
        if (!s.terminal() || !s.soundTermination())
            return false;
        return s.phase != orch::Phase::Done ||
               (s.run && s.run->result.certificate && !s.pending.has_value());
    });
    auto done = state.phase == orch::Phase::Done;
    auto pass = done && adjustments >= 1 && adjustments <= 3 && other == 0 && outcome.matches() &&
                state.config && outcome.replayedHash == state.config->contentHash() && sound;
    return {pass, std::string(done ? "Done" : "not Done") + " after " + std::to_string(adjustments) +
                      " AdjustSolver revisions; replay " + (outcome.matches() ? "matches" : "differs") + "; " +
                      std::to_string(terminalStates.size()) + " terminal states " + (sound ? "sound" : "unsound")};
}

Outcome retrieval(Context&)
{
    auto index = orch::DocIndex::load(orch::dataDir());
    auto hits = index.search("well", index.entries().size());
    auto rank = std::map<std::string, std::size_t> {};
    for (std::size_t n = 0; n < hits.size(); ++n)
        rank[hits[n].entry->id] = n;

    auto targets = std::vector<std::string> {"example:vertical_wells"};
    for (const auto& e: index.entries())
        if (e.kind == orch::DocKind::Docstring && e.module == "wells")
            targets.push_back(e.id);
    auto lastTarget = std::size_t {0};
    for (const auto& t: targets)
    {
        if (!rank.count(t))
            return {false, t + " missing from the results"};
        lastTarget = std::max(lastTarget, rank[t]);
    }
    // unrelated: outside the wells module and not about wells by title
    auto firstUnrelated = hits.size();
    for (std::size_t n = 0; n < hits.size(); ++n)
    {
        const auto& e = *hits[n].entry;
        auto titled = false;
        for (const auto& t: orch::tokenize(e.title))
            titled = titled || t == "well";
        if (e.module != "wells" && !titled)
        {
            firstUnrelated = n;
            break;
        }
    }
    auto unknown = index.search("zyxwvut quasiquark").empty();
    auto again = orch::DocIndex::load(orch::dataDir());
    auto second = again.search("well", again.entries().size());
    auto deterministic = second.size() == hits.size();
    for (std::size_t n = 0; deterministic && n < hits.size(); ++n)
        deterministic = second[n].entry->id == hits[n].entry->id && second[n].score == hits[n].score;
    auto pass = lastTarget < firstUnrelated && unknown && deterministic;
    return {pass, std::to_string(targets.size()) + " targets within the first " + std::to_string(lastTarget + 1) +
                      " of " + std::to_string(hits.size()) + " hits" + (unknown ? "; unknown term empty" : "") +
                      (deterministic ? "; ranking deterministic" : "; ranking unstable")};
}

} // namespace

int main()
{
    auto ctx = Context {};
    auto criteria = std::vector<std::pair<int, std::function<Outcome(Context&)>>> {
        {1, buckleyLeverett}, {3, fiveSpotContrast}, {4, jacobian},     {5, moments},
        {6, sampling},        {7, deformation},      {8, ledger},       {9, reconstruction},
        {10, orchestratorLoop}, {11, retrieval},     {2, conservation},
    };
    auto names = std::map<int, std::string> {
        {1, "Buckley-Leverett breakthrough"},  {2, "conservation certificate"}, {3, "quarter five-spot contrast"},
        {4, "Jacobian validation"},            {5, "moment matching"},          {6, "sampling determinism and order"},
        {7, "deformation invariants"},         {8, "ledger totality and tacit audit"},
        {9, "reconstruction divergence"},      {10, "orchestrator loop"},       {11, "retrieval"},
    };
    auto results = std::map<int, Outcome> {};
    for (const auto& [id, check]: criteria)
    {
        std::cerr << "running criterion " << id << "...\n";
        try
        {
            results[id] = check(ctx);
        }
        catch (const std::exception& e)
        {
            results[id] = {false, std::string("exception: ") + e.what()};
        }
    }
    auto failures = 0;
    for (const auto& [id, r]: results)
    {
        std::cout << (r.pass ? "PASS" : "FAIL") << " criterion " << id << " (" << names[id] << "): " << r.detail
                  << '\n';
        failures += r.pass ? 0 : 1;
    }
    return failures == 0 ? 0 : 1;
}
