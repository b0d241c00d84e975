// SPDX-License-Identifier: Apache-2.0
#include <groundloop/error.hpp>
#include <groundloop/pipeline.hpp>

#include <cstdio>
#include <fstream>
#include <sstream>

namespace groundloop::pipeline
{

namespace fs = std::filesystem;
using spec::Json;

mesh::Mesh buildMesh(const spec::ExecutableConfig& config)
{
    return mesh::buildDeformedMesh(config.dims, config.deformation);
}

petro::SampledFields buildFields(const spec::ExecutableConfig& config, const mesh::Mesh& mesh)
{
    auto fields = petro::sampleFields(mesh, config.layers, config.sampling);
    if (config.porosityConstant && !config.layers.empty())
    {
        std::fill(fields.porosity.values.begin(), fields.porosity.values.end(), config.layers[0].porosity.mean);
        fields.porosityRedraws = 0;
    }
    return fields;
}

double configPoreVolume(const spec::ExecutableConfig& config)
{
    auto m = buildMesh(config);
    auto geo = mesh::computeGeometry(m);
    return petro::poreVolume(geo, buildFields(config, m).porosity);
}

BuiltModel build(const spec::ExecutableConfig& config)
{
    auto m = buildMesh(config);
    auto geo = mesh::computeGeometry(m);
    auto fields = buildFields(config, m);
    auto pv = petro::poreVolume(geo, fields.porosity);

    auto out = BuiltModel {};
    out.porosityRedraws = fields.porosityRedraws;
    out.bulkVolume = geo.totalVolume();
    const auto& w = config.wells;
    auto injectors = int(w.injectors.size());
    out.injectionRate = w.injection == spec::InjectionMode::Explicit
                            ? w.injectionRate
                            : wells::deriveInjectionRate(config.schedule.targetPvi * pv, config.schedule.totalTime,
                                                         std::max(injectors, 1));
    auto kBottom = w.kBottom < 0 ? config.dims.nz - 1 : w.kBottom;
    auto list = std::vector<wells::Well> {};
    for (const auto& s: w.injectors)
        list.push_back(wells::setupVerticalWell(m, geo, fields.permeability, s.name, s.i, s.j, w.kTop, kBottom,
                                                w.radius, w.skin, wells::WellKind::Injector,
                                                wells::WellControl::rate(out.injectionRate)));
    for (const auto& s: w.producers)
        list.push_back(wells::setupVerticalWell(m, geo, fields.permeability, s.name, s.i, s.j, w.kTop, kBottom,
                                                w.radius, w.skin, wells::WellKind::Producer,
                                                wells::WellControl::bhp(w.producerBhp)));

    out.model = sim::buildReservoirModel(std::move(m), std::move(geo), std::move(fields.permeability),
                                         std::move(fields.porosity), config.fluid,
                                         config.gravity ? sim::kStandardGravity : 0.0, std::move(list));
    out.initial = sim::SimState::uniform(out.model, config.initialPressure, config.initialSw);
    out.schedule = {config.schedule.totalTime, config.schedule.reportTimes};
    out.controls = config.solver;
    return out;
}

Run run(const spec::ExecutableConfig& config)
{
    auto r = Run {config, build(config), {}};
    r.result = sim::simulate(r.built.model, r.built.initial, r.built.schedule, r.built.controls);
    return r;
}

namespace
{

std::string num(double v)
{
    char buffer[32];
    std::snprintf(buffer, sizeof buffer, "%.17g", v);
    return buffer;
}

void writeFile(const fs::path& path, const std::string& text)
{
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out)
            throw Error(ErrorKind::Io, "cannot write file", path.string());
        out << text;
        if (!out.flush())
            throw Error(ErrorKind::Io, "write failed", path.string());
    }
    fs::rename(tmp, path);
}

std::string readFile(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error(ErrorKind::NotFound, "cannot read file", path.string());
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

std::vector<std::vector<double>> readTable(const fs::path& path)
{
    std::istringstream in(readFile(path));
    auto rows = std::vector<std::vector<double>> {};
    auto line = std::string {};
    std::getline(in, line); // header
    while (std::getline(in, line))
    {
        if (line.empty())
            continue;
        std::istringstream fields(line);
        auto row = std::vector<double> {};
        auto cell = std::string {};
        while (std::getline(fields, cell, '\t'))
        {
            char* end = nullptr;
            row.push_back(std::strtod(cell.c_str(), &end));
            if (end == cell.c_str())
                throw Error(ErrorKind::Parse, "malformed table value '" + cell + "'", path.string());
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string snapshotName(std::size_t n)
{
    char buffer[32];
    std::snprintf(buffer, sizeof buffer, "%04zu.tsv", n);
    return buffer;
}

Json norms(const std::vector<sim::ResidualNorms>& trace)
{
    auto out = Json::array();
    for (const auto& t: trace)
        out.push_back({{"cnv", t.cnv}, {"mb", t.mb}, {"well", t.well}});
    return out;
}

} // namespace

Json runManifest(const Run& run)
{
    const auto& r = run.result;
    const auto& d = r.diagnostics;
    auto m = Json::object();
    m["format"] = "groundloop-results/1";
    m["config_hash"] = run.config.contentHash();
    m["certificate"] = r.certificate;
    m["end_time"] = r.endTime;
    m["schedule_end"] = r.scheduleEnd;
    m["pore_volume"] = r.poreVolume;
    m["bulk_volume"] = run.built.bulkVolume;
    m["initial_average_pressure"] = r.initialAveragePressure;
    m["porosity_redraws"] = run.built.porosityRedraws;
    m["injection_rate"] = run.built.injectionRate;
    m["permeability_hash"] = run.built.model.permeability.contentHash();
    m["porosity_hash"] = run.built.model.porosity.contentHash();
    m["well_names"] = r.wellNames;
    auto kinds = Json::array();
    for (auto k: r.wellKinds)
        kinds.push_back(wells::toString(k));
    m["well_kinds"] = kinds;
    m["report_times"] = r.reportTimes;
    m["accepted_steps"] = d.accepted.size();
    m["attempts"] = d.attempts.size();
    m["total_cuts"] = d.totalCuts;
    m["total_newton_iterations"] = d.totalNewtonIterations;
    m["wall_seconds"] = d.wallSeconds;
    m["crossflow_warnings"] = d.crossflowWarnings;
    auto bhp = Json::array();
    for (const auto& s: r.snapshots)
        bhp.push_back(s.bhp);
    m["snapshot_bhp"] = bhp;
    auto finalPvi = d.accepted.empty() || r.poreVolume <= 0.0 ? 0.0 : d.accepted.back().cumulativeInjection / r.poreVolume;
    m["final_pvi"] = finalPvi;
    if (auto bt = sim::breakthroughPvi(r, r.poreVolume))
        m["breakthrough_pvi"] = *bt;
    else
        m["breakthrough_pvi"] = nullptr;
    if (r.failure)
    {
        const auto& f = *r.failure;
        m["failure"] = {{"code", errorCode(f.kind)},   {"message", f.message}, {"step_index", f.stepIndex},
                        {"time", f.time},              {"dt", f.dt},           {"cell", f.cell},
                        {"phase", f.phase},            {"last_trace", norms(f.lastTrace)}};
    }
    else
        m["failure"] = nullptr;
    return m;
}

void writeResults(const fs::path& dir, const Run& run)
{
    fs::create_directories(dir / "snapshots");
    const auto& r = run.result;
    writeFile(dir / "config.json", run.config.toJson().dump(2) + "\n");
    writeFile(dir / "manifest.json", runManifest(run).dump(2) + "\n");

    std::ostringstream steps;
    steps << "time\tdt\tmb_w\tmb_n\tcnv_w\tcnv_n\taverage_pressure\tcumulative_injection\n";
    std::ostringstream rates;
    rates << "time";
    for (const auto& name: r.wellNames)
        rates << '\t' << name << ":water\t" << name << ":oil\t" << name << ":bhp";
    rates << '\n';
    for (const auto& a: r.diagnostics.accepted)
    {
        steps << num(a.time) << '\t' << num(a.dt) << '\t' << num(a.massBalanceError[0]) << '\t'
              << num(a.massBalanceError[1]) << '\t' << num(a.cnv[0]) << '\t' << num(a.cnv[1]) << '\t'
              << num(a.averagePressure) << '\t' << num(a.cumulativeInjection) << '\n';
        rates << num(a.time);
        for (const auto& w: a.wells)
            rates << '\t' << num(w.water) << '\t' << num(w.oil) << '\t' << num(w.bhp);
        rates << '\n';
    }
    writeFile(dir / "steps.tsv", steps.str());
    writeFile(dir / "wells.tsv", rates.str());

    for (std::size_t n = 0; n < r.snapshots.size(); ++n)
    {
        std::ostringstream s;
        s << "pressure\tsw\n";
        const auto& snap = r.snapshots[n];
        for (std::size_t c = 0; c < snap.pressure.size(); ++c)
            s << num(snap.pressure[c]) << '\t' << num(snap.sw[c]) << '\n';
        writeFile(dir / "snapshots" / snapshotName(n), s.str());
    }
}

Run loadResults(const fs::path& dir)
{
    Json configDoc;
    Json manifest;
    try
    {
        configDoc = Json::parse(readFile(dir / "config.json"));
        manifest = Json::parse(readFile(dir / "manifest.json"));
    }
    catch (const Json::parse_error& e)
    {
        throw Error(ErrorKind::Parse, "malformed results document", e.what());
    }
    auto out = Run {};
    out.config = spec::configFromDocument(configDoc);
    if (out.config.contentHash() != manifest.value("config_hash", std::string()))
        throw Error(ErrorKind::Tamper, "results manifest does not match the stored config", dir.string());
    out.built = build(out.config);

    auto& r = out.result;
    try
    {
        r.certificate = manifest.at("certificate").get<bool>();
        r.endTime = manifest.at("end_time").get<double>();
        r.scheduleEnd = manifest.at("schedule_end").get<double>();
        r.poreVolume = manifest.at("pore_volume").get<double>();
        r.initialAveragePressure = manifest.at("initial_average_pressure").get<double>();
        r.wellNames = manifest.at("well_names").get<std::vector<std::string>>();
        for (const auto& k: manifest.at("well_kinds"))
            r.wellKinds.push_back(k == "injector" ? wells::WellKind::Injector : wells::WellKind::Producer);
        r.reportTimes = manifest.at("report_times").get<std::vector<double>>();
        r.diagnostics.totalCuts = manifest.at("total_cuts").get<int>();
        r.diagnostics.totalNewtonIterations = manifest.at("total_newton_iterations").get<int>();
        r.diagnostics.wallSeconds = manifest.at("wall_seconds").get<double>();
        r.diagnostics.crossflowWarnings = manifest.at("crossflow_warnings").get<std::vector<std::string>>();
        if (!manifest.at("failure").is_null())
        {
            const auto& f = manifest["failure"];
            auto failure = sim::RunFailure {};
            failure.message = f.at("message").get<std::string>();
            failure.stepIndex = f.at("step_index").get<int>();
            failure.time = f.at("time").get<double>();
            failure.dt = f.at("dt").get<double>();
            failure.cell = f.at("cell").get<long>();
            failure.phase = f.at("phase").get<int>();
            auto code = f.at("code").get<std::string>();
            for (int k = 0; k <= int(ErrorKind::Io); ++k)
                if (code == errorCode(ErrorKind(k)))
                    failure.kind = ErrorKind(k);
            r.failure = failure;
        }
        const auto& bhp = manifest.at("snapshot_bhp");
        for (std::size_t n = 0; n < bhp.size(); ++n)
        {
            auto rows = readTable(dir / "snapshots" / snapshotName(n));
            auto s = sim::SimState {};
            for (const auto& row: rows)
            {
                s.pressure.push_back(row.at(0));
                s.sw.push_back(row.at(1));
            }
            s.bhp = bhp[n].get<std::vector<double>>();
            r.snapshots.push_back(std::move(s));
        }
    }
    catch (const Json::exception& e)
    {
        throw Error(ErrorKind::Parse, "malformed results manifest", e.what());
    }

    auto steps = readTable(dir / "steps.tsv");
    auto rates = readTable(dir / "wells.tsv");
    if (steps.size() != rates.size())
        throw Error(ErrorKind::Parse, "step and well tables disagree", dir.string());
    for (std::size_t n = 0; n < steps.size(); ++n)
    {
        const auto& s = steps[n];
        if (s.size() != 8 || rates[n].size() != 1 + 3 * r.wellNames.size())
            throw Error(ErrorKind::Parse, "malformed result table row", dir.string());
        auto a = sim::AcceptedStep {};
        a.time = s[0];
        a.dt = s[1];
        a.massBalanceError = {s[2], s[3]};
        a.cnv = {s[4], s[5]};
        a.averagePressure = s[6];
        a.cumulativeInjection = s[7];
        for (std::size_t w = 0; w < r.wellNames.size(); ++w)
            a.wells.push_back({rates[n][1 + 3 * w], rates[n][2 + 3 * w], rates[n][3 + 3 * w]});
        r.diagnostics.accepted.push_back(std::move(a));
    }
    return out;
}

} // namespace groundloop::pipeline
