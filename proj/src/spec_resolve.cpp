// SPDX-License-Identifier: Apache-2.0
#include <groundloop/error.hpp>
#include <groundloop/hash.hpp>
#include <groundloop/pipeline.hpp>
#include <groundloop/spec.hpp>

#include <chrono>
#include <cmath>
#include <ctime>
#include <set>

namespace groundloop::spec
{

namespace
{

using Pointer = Json::json_pointer;

bool has(const Json& doc, const std::string& p)
{
    return doc.contains(Pointer(p));
}

const Json& at(const Json& doc, const std::string& p)
{
    if (!has(doc, p))
        throw Error(ErrorKind::Parse, "missing field", p);
    return doc.at(Pointer(p));
}

std::string lastSegment(const std::string& p)
{
    return p.substr(p.rfind('/') + 1);
}

ChecklistItem makeItem(std::string key, std::string description, Severity severity, Category category,
                       bool knownHazard, std::vector<std::string> paths,
                       std::vector<std::vector<std::string>> alternatives = {}, std::vector<std::string> optional = {},
                       std::vector<std::string> valuePaths = {})
{
    auto item = ChecklistItem {std::move(key), std::move(description), severity, category, knownHazard,
                               std::move(paths), std::move(alternatives), std::move(optional), std::move(valuePaths)};
    if (item.valuePaths.empty())
        item.valuePaths = item.allPaths();
    return item;
}

} // namespace

const char* toString(Category c)
{
    switch (c)
    {
        case Category::Geometry: return "geometry";
        case Category::Fields: return "fields";
        case Category::Closure: return "closure";
        case Category::Wells: return "wells";
        case Category::Schedule: return "schedule";
        case Category::Sampling: return "sampling";
        case Category::Solver: return "solver";
        case Category::Convention: return "convention";
    }
    return "geometry";
}

const char* toString(Provenance p)
{
    switch (p)
    {
        case Provenance::UserExplicit: return "UserExplicit";
        case Provenance::AgentDefault: return "AgentDefault";
        case Provenance::SimulatorDefault: return "SimulatorDefault";
    }
    return "AgentDefault";
}

Provenance provenanceFromString(const std::string& s)
{
    if (s == "UserExplicit")
        return Provenance::UserExplicit;
    if (s == "AgentDefault")
        return Provenance::AgentDefault;
    if (s == "SimulatorDefault")
        return Provenance::SimulatorDefault;
    throw Error(ErrorKind::Parse, "unknown provenance '" + s + "'");
}

const char* toString(PolicyKind p)
{
    return p == PolicyKind::Interactive ? "interactive" : "autonomous";
}

PolicyKind policyFromString(const std::string& s)
{
    if (s == "interactive")
        return PolicyKind::Interactive;
    if (s == "autonomous")
        return PolicyKind::Autonomous;
    throw Error(ErrorKind::Parse, "unknown policy '" + s + "'");
}

std::vector<std::string> ChecklistItem::allPaths() const
{
    auto out = paths;
    for (const auto& group: alternatives)
        out.insert(out.end(), group.begin(), group.end());
    out.insert(out.end(), optional.begin(), optional.end());
    return out;
}

const ChecklistItem& DecisionChecklist::item(const std::string& key) const
{
    for (const auto& i: items)
        if (i.key == key)
            return i;
    throw Error(ErrorKind::Query, "unknown checklist key '" + key + "'", key);
}

const DecisionChecklist& checklist()
{
    static const DecisionChecklist list = [] {
        using S = Severity;
        using C = Category;
        auto solverPaths = std::vector<std::string> {};
        for (const auto* name: {"newton_max_iters", "cnv_tolerance", "mb_tolerance", "well_tolerance", "initial_dt",
                                "min_dt", "max_dt", "cut_factor", "growth_factor", "max_cuts_per_step",
                                "max_saturation_change"})
            solverPaths.push_back(std::string("/solver/") + name);
        auto l = DecisionChecklist {};
        l.version = "groundloop-checklist/1";
        l.items = {
            makeItem("mesh_dims", "Grid dimensions, lateral and vertical extent, top depth", S::BlocksPhysics,
                     C::Geometry, true, {"/mesh/dims", "/mesh/extent", "/mesh/origin_depth"}),
            makeItem("deformation_amplitudes", "Undulation and dome amplitudes", S::BlocksPhysics, C::Geometry, true,
                     {"/deformation/undulation_amplitude", "/deformation/dome_amplitude"}),
            makeItem("deformation_params", "Undulation wavelength, dome radius and unit interfaces", S::BlocksPhysics,
                     C::Geometry, true,
                     {"/deformation/undulation_wavelength", "/deformation/dome_radius",
                      "/deformation/interface_depths"}),
            makeItem("layer_statistics", "Per-unit permeability mean and standard deviation", S::BlocksPhysics,
                     C::Fields, true, {"/layers/permeability"}),
            makeItem("porosity_spec", "Porosity model, constant or per-unit lognormal", S::BlocksPhysics, C::Fields,
                     true, {"/layers/porosity"}),
            makeItem("porosity_truncation", "Cap above which porosity draws are redrawn",
                     S::BlocksReproducibility, C::Fields, false, {"/layers/porosity_cap"}),
            makeItem("fluid_viscosities", "Water and oil viscosities", S::BlocksPhysics, C::Closure, true,
                     {"/fluids/viscosity"}),
            makeItem("reference_densities", "Water and oil reference densities", S::BlocksPhysics, C::Closure, true,
                     {"/fluids/density"}),
            makeItem("initial_state", "Initial pressure and water saturation", S::BlocksPhysics, C::Fields, true,
                     {"/initial/pressure", "/initial/sw"}),
            makeItem("density_closure", "Pressure dependence of phase densities", S::BlocksPhysics, C::Closure,
                     false, {"/fluids/density_closure"}),
            makeItem("relperm_family_and_params", "Relative permeability family, exponents, residuals, endpoints",
                     S::BlocksPhysics, C::Closure, true, {"/fluids/relperm"}),
            makeItem("well_configuration", "Injector layout, producer count, controls and well radius",
                     S::BlocksPhysics, C::Wells, true, {"/wells/producer_bhp", "/wells/radius", "/wells/skin"},
                     {{"/wells/injectors", "/wells/injector_placement"}, {"/wells/producers", "/wells/producer_count"}},
                     {"/wells/injection_rate", "/wells/producer_placement"},
                     {"/wells/injectors", "/wells/producer_count", "/wells/producer_bhp", "/wells/radius",
                      "/wells/skin", "/wells/injection_rate"}),
            makeItem("well_completion_range", "Perforated layer range", S::BlocksPhysics, C::Wells, false,
                     {"/wells/completion"}),
            makeItem("producer_coordinates", "Exact producer cell coordinates", S::BlocksPhysics, C::Wells, true,
                     {"/wells/producers"}),
            makeItem("boundary_conditions", "Outer boundary condition", S::BlocksPhysics, C::Convention, false,
                     {"/constraints/boundary"}),
            makeItem("schedule", "Total time, report times and injected pore volumes", S::BlocksPhysics, C::Schedule,
                     true, {"/schedule/total_time", "/schedule/target_pvi"},
                     {{"/schedule/report_times", "/schedule/report_steps"}}, {},
                     {"/schedule/total_time", "/schedule/report_times", "/schedule/target_pvi"}),
            makeItem("sampling_seed", "Random seed of the field realization", S::BlocksReproducibility, C::Sampling,
                     true, {}, {{"/sampling/seed", "/meta/seed"}}, {}, {"/sampling/seed"}),
            makeItem("sampling_strategy", "Order in which field draws are taken", S::BlocksReproducibility,
                     C::Sampling, false, {"/sampling/strategy"}, {}, {"/sampling/rng_family"}),
            makeItem("solver_controls", "Newton tolerances and timestep control", S::BlocksReproducibility,
                     C::Solver, false, solverPaths),
            makeItem("time_unit_convention", "Length of a year", S::BlocksReproducibility, C::Convention, false,
                     {"/constraints/time_unit"}),
            makeItem("gravity", "Whether gravity acts", S::BlocksPhysics, C::Convention, true,
                     {"/constraints/gravity"}),
        };
        return l;
    }();
    return list;
}

namespace
{

enum class Presence
{
    Absent,
    Partial,
    Complete,
};

/// Absent or Partial by path presence alone; completeness also depends on
/// sub-fields and is decided against the default values.
Presence presence(const ChecklistItem& item, const Json& doc)
{
    auto paths = item.allPaths();
    auto any = std::any_of(paths.begin(), paths.end(), [&](const auto& p) { return has(doc, p); });
    return any ? Presence::Partial : Presence::Absent;
}

double yearOf(const Json& doc)
{
    return (has(doc, "/constraints/time_unit") && at(doc, "/constraints/time_unit") == "365.25d") ? 365.25 * 86400.0
                                                                                                 : kYear365;
}

int unitCountHint(const Json& doc)
{
    if (has(doc, "/layers/permeability") && !at(doc, "/layers/permeability").empty())
        return int(at(doc, "/layers/permeability").size());
    if (has(doc, "/deformation/interface_depths") && at(doc, "/deformation/interface_depths").size() >= 2)
        return int(at(doc, "/deformation/interface_depths").size()) - 1;
    return 3;
}

std::array<double, 3> extentOf(const Json& doc)
{
    if (has(doc, "/mesh/extent"))
    {
        const auto& e = at(doc, "/mesh/extent");
        return {e[0].get<double>(), e[1].get<double>(), e[2].get<double>()};
    }
    return {1000.0, 1000.0, 50.0};
}

std::array<int, 3> dimsOf(const Json& doc)
{
    if (has(doc, "/mesh/dims"))
    {
        const auto& d = at(doc, "/mesh/dims");
        return {d[0].get<int>(), d[1].get<int>(), d[2].get<int>()};
    }
    return {20, 20, 6};
}

Json defaultProducers(int count, int nx, int ny)
{
    static const std::vector<std::pair<double, double>> spread {{0.5, 0.5}, {0.3, 0.7}, {0.7, 0.3}};
    auto out = Json::array();
    for (int k = 0; k < count; ++k)
    {
        auto f = count <= 3 ? spread[k] : std::pair {double(k + 1) / (count + 1), double(k + 1) / (count + 1)};
        auto i = std::min(nx - 1, int(f.first * nx));
        auto j = std::min(ny - 1, int(f.second * ny));
        out.push_back({{"name", "P" + std::to_string(k + 1)}, {"i", i}, {"j", j}});
    }
    return out;
}

struct BuiltinDefault
{
    Json values = Json::object(); ///< pointer -> SI value
    std::string rationale;
};

BuiltinDefault builtinDefault(const std::string& key, const Json& doc)
{
    auto d = BuiltinDefault {};
    auto& v = d.values;
    if (key == "mesh_dims")
    {
        v["/mesh/dims"] = {20, 20, 6};
        v["/mesh/extent"] = {1000.0, 1000.0, 50.0};
        v["/mesh/origin_depth"] = 1000.0;
        d.rationale = "20x20x6 cells over 1000 m x 1000 m x 50 m with the top at 1000 m depth";
    }
    else if (key == "deformation_amplitudes")
    {
        v["/deformation/undulation_amplitude"] = 0.0;
        v["/deformation/dome_amplitude"] = 0.0;
        d.rationale = "flat layers when no deformation is stated";
    }
    else if (key == "deformation_params")
    {
        auto e = extentOf(doc);
        v["/deformation/undulation_wavelength"] = e[0] / 4.0;
        v["/deformation/dome_radius"] = e[0] / 4.0;
        v["/deformation/interface_depths"] = mesh::equalInterfaces(e[2], unitCountHint(doc));
        d.rationale = "wavelength and dome radius of a quarter of the x extent, units of equal thickness";
    }
    else if (key == "layer_statistics")
    {
        auto units = unitCountHint(doc);
        auto list = Json::array();
        if (units == 3)
        {
            for (auto [mean, std]: {std::pair {100.0, 30.0}, {200.0, 60.0}, {900.0, 90.0}})
                list.push_back({{"mean", mean * petro::kMilliDarcy}, {"std", std * petro::kMilliDarcy}});
            d.rationale = "three units of 100, 200 and 900 mD with standard deviations 30, 60 and 90 mD";
        }
        else
        {
            for (int u = 0; u < units; ++u)
                list.push_back({{"mean", 100.0 * petro::kMilliDarcy}, {"std", 30.0 * petro::kMilliDarcy}});
            d.rationale = "every unit 100 mD with standard deviation 30 mD";
        }
        v["/layers/permeability"] = list;
    }
    else if (key == "porosity_spec")
    {
        if (has(doc, "/layers/porosity/kind") && at(doc, "/layers/porosity/kind") == "lognormal")
        {
            auto units = Json::array();
            for (int u = 0; u < unitCountHint(doc); ++u)
                units.push_back({{"mean", 0.2}, {"std", 0.02}});
            v["/layers/porosity"] = {{"kind", "lognormal"}, {"units", units}};
            d.rationale = "lognormal porosity 0.2 with standard deviation 0.02 in every unit";
        }
        else
        {
            v["/layers/porosity"] = {{"kind", "constant"}, {"value", 0.2}};
            d.rationale = "constant porosity 0.2";
        }
    }
    else if (key == "porosity_truncation")
    {
        v["/layers/porosity_cap"] = 0.95;
        d.rationale = "porosity draws above 0.95 are redrawn";
    }
    else if (key == "fluid_viscosities")
    {
        v["/fluids/viscosity"] = {5e-4, 5e-3};
        d.rationale = "water 0.5 cP and oil 5 cP";
    }
    else if (key == "reference_densities")
    {
        v["/fluids/density"] = {1000.0, 800.0};
        d.rationale = "water 1000 kg/m3 and oil 800 kg/m3";
    }
    else if (key == "initial_state")
    {
        v["/initial/pressure"] = 150e5;
        v["/initial/sw"] = 0.2;
        d.rationale = "150 bar at connate water saturation 0.2";
    }
    else if (key == "density_closure")
    {
        auto pref = has(doc, "/initial/pressure") ? at(doc, "/initial/pressure").get<double>() : 150e5;
        auto incompressible =
            has(doc, "/fluids/density_closure/kind") && at(doc, "/fluids/density_closure/kind") == "incompressible";
        auto c = incompressible ? 0.0 : 1e-10;
        v["/fluids/density_closure"] = {{"kind", incompressible ? "incompressible" : "constant_compressibility"},
                                        {"reference_pressure", pref},
                                        {"compressibility", {c, c}}};
        d.rationale = "slightly compressible phases, 1e-10 1/Pa, referenced to the initial pressure";
    }
    else if (key == "relperm_family_and_params")
    {
        v["/fluids/relperm"] = {{"family", "brooks_corey"},
                                {"exponents", {2.0, 2.0}},
                                {"residuals", {0.2, 0.2}},
                                {"endpoints", {1.0, 1.0}}};
        d.rationale = "Brooks-Corey exponents 2 with residual saturations 0.2";
    }
    else if (key == "well_configuration")
    {
        v["/wells/injector_placement"] = "corners";
        v["/wells/producer_count"] = 3;
        v["/wells/producer_bhp"] = 50e5;
        v["/wells/radius"] = 0.1;
        v["/wells/skin"] = 0.0;
        d.rationale = "corner injectors sized by the target pore volumes, three producers at 50 bar, rw 0.1 m, no skin";
    }
    else if (key == "well_completion_range")
    {
        v["/wells/completion"] = "full";
        d.rationale = "perforated over the full thickness";
    }
    else if (key == "producer_coordinates")
    {
        auto count = has(doc, "/wells/producer_count") ? at(doc, "/wells/producer_count").get<int>() : 3;
        auto dims = dimsOf(doc);
        v["/wells/producers"] = defaultProducers(count, dims[0], dims[1]);
        d.rationale = "producers spread over the interior of the grid";
    }
    else if (key == "boundary_conditions")
    {
        v["/constraints/boundary"] = "closed";
        d.rationale = "no-flow outer boundary";
    }
    else if (key == "schedule")
    {
        auto total = has(doc, "/schedule/total_time") ? at(doc, "/schedule/total_time").get<double>()
                                                      : 10.0 * yearOf(doc);
        v["/schedule/total_time"] = total;
        v["/schedule/report_times"] = wells::Schedule::uniform(total, 40).reportTimes;
        v["/schedule/target_pvi"] = 1.0;
        d.rationale = "10 years in 40 equal report steps, one pore volume injected";
    }
    else if (key == "sampling_seed")
    {
        v["/sampling/seed"] = 42;
        d.rationale = "seed 42";
    }
    else if (key == "sampling_strategy")
    {
        v["/sampling/strategy"] = "layer_batched";
        d.rationale = "one batch of draws per unit";
    }
    else if (key == "solver_controls")
    {
        auto s = sim::SolverControls {};
        v["/solver/newton_max_iters"] = s.newtonMaxIters;
        v["/solver/cnv_tolerance"] = s.cnvTolerance;
        v["/solver/mb_tolerance"] = s.mbTolerance;
        v["/solver/well_tolerance"] = s.wellTolerance;
        v["/solver/initial_dt"] = s.initialDt;
        v["/solver/min_dt"] = s.minDt;
        v["/solver/max_dt"] = s.maxDt;
        v["/solver/cut_factor"] = s.cutFactor;
        v["/solver/growth_factor"] = s.growthFactor;
        v["/solver/max_cuts_per_step"] = s.maxCutsPerStep;
        v["/solver/max_saturation_change"] = s.maxSaturationChange;
        d.rationale = "built-in Newton and timestep controls";
    }
    else if (key == "time_unit_convention")
    {
        v["/constraints/time_unit"] = "365d";
        d.rationale = "years of 365 days";
    }
    else if (key == "gravity")
    {
        v["/constraints/gravity"] = true;
        d.rationale = "gravity acts";
    }
    else
        throw Error(ErrorKind::Query, "no default for checklist key '" + key + "'", key);
    return d;
}

void collectMissing(const Json& doc, const std::string& pointer, const Json& value, Json& out)
{
    if (!has(doc, pointer))
    {
        out[pointer] = value;
        return;
    }
    const auto& present = at(doc, pointer);
    if (value.is_object() && present.is_object())
        for (const auto& [k, v]: value.items())
            collectMissing(doc, pointer + "/" + k, v, out);
}

/// Default values for the item restricted to what the document lacks,
/// including sub-fields of partially given objects.
Json missingDefaults(const ChecklistItem& item, const Json& doc, const Json& values)
{
    auto out = Json::object();
    for (const auto& [pointer, value]: values.items())
    {
        auto covered = false;
        for (const auto& group: item.alternatives)
            if (std::find(group.begin(), group.end(), pointer) != group.end())
                covered = std::any_of(group.begin(), group.end(), [&](const auto& p) { return has(doc, p); });
        if (!covered)
            collectMissing(doc, pointer, value, out);
    }
    return out;
}

struct Proposal
{
    Json values;
    std::string rationale;
    Presence state = Presence::Absent;
};

Proposal propose(const ChecklistItem& item, const Json& doc, const DefaultOverrides& overrides)
{
    auto builtin = builtinDefault(item.key, doc);
    auto values = builtin.values;
    auto rationale = builtin.rationale;
    if (auto it = overrides.values.find(item.key); it != overrides.values.end())
    {
        for (const auto& [pointer, value]: it->second.items())
            values[pointer] = value;
        if (auto r = overrides.rationale.find(item.key); r != overrides.rationale.end())
            rationale = r->second;
    }
    auto missing = missingDefaults(item, doc, values);
    auto state = missing.empty() ? Presence::Complete : presence(item, doc);
    if (state == Presence::Partial)
    {
        auto names = std::string {};
        for (const auto& [pointer, value]: missing.items())
            names += (names.empty() ? "" : ", ") + pointer;
        rationale += "; defaulted " + names;
    }
    return {missing, rationale, state};
}

void applyValues(Json& doc, const Json& values)
{
    for (const auto& [pointer, value]: values.items())
        doc[Pointer(pointer)] = value;
}

const ChecklistItem* owningItem(const DecisionChecklist& list, const std::string& pointer)
{
    for (const auto& item: list.items)
        for (const auto& p: item.allPaths())
            if (pointer == p || pointer.rfind(p + "/", 0) == 0 || p.rfind(pointer + "/", 0) == 0)
                return &item;
    return nullptr;
}

std::array<double, 2> pair(const Json& j)
{
    return {j.at(0).get<double>(), j.at(1).get<double>()};
}

Json wellList(const std::vector<WellSpec>& list)
{
    auto out = Json::array();
    for (const auto& w: list)
        out.push_back({{"name", w.name}, {"i", w.i}, {"j", w.j}});
    return out;
}

std::vector<WellSpec> parseWells(const Json& list, wells::WellKind kind, const char* prefix)
{
    auto out = std::vector<WellSpec> {};
    for (std::size_t n = 0; n < list.size(); ++n)
    {
        const auto& w = list[n];
        auto name = w.contains("name") ? w["name"].get<std::string>() : prefix + std::to_string(n + 1);
        if (!w.contains("i") || !w.contains("j"))
            throw Error(ErrorKind::Parse, "well needs i and j", "/wells");
        out.push_back({name, kind, w["i"].get<int>(), w["j"].get<int>()});
    }
    return out;
}

void checkInjectionContradiction(const Json& work, const ExecutableConfig& config)
{
    auto pv = pipeline::configPoreVolume(config);
    auto n = double(config.wells.injectors.size());
    auto implied = config.wells.injectionRate * n * config.schedule.totalTime / pv;
    auto target = config.schedule.targetPvi;
    if (std::abs(implied - target) > 1e-6 * std::abs(target))
        throw Error(ErrorKind::Contradiction,
                    "injection rate implies " + std::to_string(implied) + " pore volumes, target is " +
                        std::to_string(target),
                    "/wells/injection_rate vs /schedule/target_pvi");
    (void)work;
}

} // namespace

Json defaultValues(const std::string& key, const Json& context)
{
    return builtinDefault(key, context).values;
}

std::string owningKey(const std::string& pointer, const DecisionChecklist& list)
{
    const auto* item = owningItem(list, pointer);
    return item ? item->key : std::string();
}

std::vector<AmbiguityItem> detectAmbiguities(const ModelSpec& spec, const DecisionChecklist& list,
                                             const DefaultOverrides& overrides)
{
    auto work = spec.doc;
    auto out = std::vector<AmbiguityItem> {};
    for (const auto& item: list.items)
    {
        auto p = propose(item, work, overrides);
        if (p.state == Presence::Complete)
            continue;
        out.push_back({item.key, item.description, item.severity, p.values, p.rationale});
        applyValues(work, p.values);
    }
    return out;
}

std::map<std::string, Json> answerPaths(const std::string& key, const Json& answer, double yearSeconds)
{
    const auto& item = checklist().item(key);
    auto all = item.allPaths();
    auto out = std::map<std::string, Json> {};
    // a proposed default echoed back: {pointer -> value} over the item's own paths
    auto pointerKeyed = answer.is_object() && !answer.empty();
    for (auto it = answer.begin(); pointerKeyed && it != answer.end(); ++it)
        pointerKeyed = std::find(all.begin(), all.end(), it.key()) != all.end();
    if (pointerKeyed)
    {
        for (auto it = answer.begin(); it != answer.end(); ++it)
            out[it.key()] = normalizeAt(it.key(), it.value(), yearSeconds);
    }
    else if (all.size() == 1)
        out[all[0]] = normalizeAt(all[0], answer, yearSeconds);
    else if (!answer.is_object() && item.valuePaths.size() == 1)
        out[item.valuePaths[0]] = normalizeAt(item.valuePaths[0], answer, yearSeconds);
    else
    {
        if (!answer.is_object())
            throw Error(ErrorKind::Parse, "answer must be an object keyed by field name", key);
        for (const auto& [name, value]: answer.items())
        {
            auto it = std::find_if(all.begin(), all.end(), [&](const auto& p) { return lastSegment(p) == name; });
            if (it == all.end())
                throw Error(ErrorKind::Parse, "field '" + name + "' does not belong to " + key, key);
            out[*it] = normalizeAt(*it, value, yearSeconds);
        }
    }
    return out;
}

Resolution resolve(const ModelSpec& spec, const ResolvePolicy& policy, const DecisionChecklist& list)
{
    auto result = Resolution {};
    if (policy.kind == PolicyKind::Interactive && policy.answers.empty())
    {
        auto pending = detectAmbiguities(spec, list, policy.defaults);
        if (!pending.empty())
        {
            result.clarification = ClarificationRequest {std::move(pending)};
            return result;
        }
    }

    auto work = spec.doc;
    auto year = yearOf(work);
    auto answered = std::set<std::string> {};
    for (const auto& [key, answer]: policy.answers)
    {
        for (const auto& [pointer, value]: answerPaths(key, answer, year))
            work[Pointer(pointer)] = value;
        answered.insert(key);
    }
    auto revised = std::set<std::string> {};
    for (const auto& [pointer, value]: policy.revisions)
    {
        const auto* item = owningItem(list, pointer);
        if (!item)
            throw Error(ErrorKind::Parse, "revision outside the checklist", pointer);
        work[Pointer(pointer)] = value;
        revised.insert(item->key);
    }

    auto timestamp = policy.timestamp.empty() ? utcNow() : policy.timestamp;
    auto provisional = std::vector<AssumptionEntry> {};
    for (const auto& item: list.items)
    {
        auto entry = AssumptionEntry {item.key, {}, Provenance::AgentDefault, {}, timestamp, policy.eventId};
        auto p = propose(item, work, policy.defaults);
        auto state = p.state;
        if (state != Presence::Complete)
        {
            applyValues(work, p.values);
            entry.rationale = p.rationale;
        }
        if (revised.count(item.key))
            entry.rationale = policy.revisionRationale.empty() ? "revised after validation" : policy.revisionRationale;
        else if (answered.count(item.key))
        {
            entry.provenance = Provenance::UserExplicit;
            entry.rationale = state == Presence::Complete ? "answered during clarification"
                                                          : "answered during clarification; " + entry.rationale;
        }
        else if (state == Presence::Complete)
        {
            entry.provenance = Provenance::UserExplicit;
            entry.rationale = "stated in the spec";
        }
        provisional.push_back(std::move(entry));
    }

    auto config = configFromDocument(work);

    auto explicitPvi = spec.has("/schedule/target_pvi") || answered.count("schedule");
    if (config.wells.injection == InjectionMode::Explicit && explicitPvi &&
        (spec.has("/wells/injection_rate") || answered.count("well_configuration")))
        checkInjectionContradiction(work, config);

    if (!answered.empty())
        for (const auto& f: staticCheck(config))
            if (f.severity == "error" && answered.count(f.key))
                throw Error(ErrorKind::InvariantViolation, f.message, f.invariant + " at " + f.path);

    for (auto& e: provisional)
        e.value = config.checklistValue(e.key);
    result.ledger.entries = std::move(provisional);
    result.ledger.configHash = config.contentHash();
    result.config = std::move(config);
    return result;
}

ExecutableConfig configFromDocument(const Json& doc)
{
    auto c = ExecutableConfig {};
    const auto& dims = at(doc, "/mesh/dims");
    const auto& extent = at(doc, "/mesh/extent");
    c.dims = {dims[0].get<int>(), dims[1].get<int>(), dims[2].get<int>(), extent[0].get<double>(),
              extent[1].get<double>(), extent[2].get<double>(), at(doc, "/mesh/origin_depth").get<double>()};

    c.deformation.undulationAmplitude = at(doc, "/deformation/undulation_amplitude").get<double>();
    c.deformation.domeAmplitude = at(doc, "/deformation/dome_amplitude").get<double>();
    c.deformation.undulationWavelength = at(doc, "/deformation/undulation_wavelength").get<double>();
    c.deformation.domeRadius = at(doc, "/deformation/dome_radius").get<double>();
    c.deformation.interfaceDepths = at(doc, "/deformation/interface_depths").get<std::vector<double>>();

    const auto& perm = at(doc, "/layers/permeability");
    if (perm.empty())
        throw Error(ErrorKind::Parse, "at least one unit is required", "/layers/permeability");
    if (c.deformation.interfaceDepths.size() != perm.size() + 1)
        throw Error(ErrorKind::Contradiction, "interface count does not match the number of units",
                    "/deformation/interface_depths vs /layers/permeability");
    const auto& poro = at(doc, "/layers/porosity");
    auto kind = poro.value("kind", std::string("constant"));
    c.porosityConstant = kind == "constant";
    if (c.porosityConstant && !poro.contains("value"))
        throw Error(ErrorKind::Parse, "constant porosity needs a value", "/layers/porosity/value");
    if (!c.porosityConstant && (!poro.contains("units") || poro["units"].size() != perm.size()))
        throw Error(ErrorKind::Contradiction, "porosity units do not match the number of units",
                    "/layers/porosity/units vs /layers/permeability");
    for (std::size_t u = 0; u < perm.size(); ++u)
    {
        auto stats = petro::UnitStats {};
        stats.permeability = {perm[u].at("mean").get<double>(), perm[u].at("std").get<double>()};
        if (c.porosityConstant)
            stats.porosity = {poro["value"].get<double>(), 0.0};
        else
            stats.porosity = {poro["units"][u].at("mean").get<double>(), poro["units"][u].at("std").get<double>()};
        c.layers.push_back(stats);
    }

    c.sampling.seed = has(doc, "/sampling/seed") ? at(doc, "/sampling/seed").get<std::uint64_t>()
                                                 : at(doc, "/meta/seed").get<std::uint64_t>();
    c.sampling.strategy = petro::samplingStrategyFromString(at(doc, "/sampling/strategy").get<std::string>());
    if (has(doc, "/sampling/rng_family"))
        c.sampling.rngFamily = at(doc, "/sampling/rng_family").get<std::string>();
    c.sampling.porosityCap = at(doc, "/layers/porosity_cap").get<double>();

    c.fluid.viscosity = pair(at(doc, "/fluids/viscosity"));
    c.fluid.density.referenceDensity = pair(at(doc, "/fluids/density"));
    const auto& rp = at(doc, "/fluids/relperm");
    c.fluid.relperm.family = fluid::relPermFamilyFromString(rp.value("family", std::string("brooks_corey")));
    if (rp.contains("exponents"))
        c.fluid.relperm.exponent = pair(rp["exponents"]);
    if (rp.contains("residuals"))
        c.fluid.relperm.residual = pair(rp["residuals"]);
    if (rp.contains("endpoints"))
        c.fluid.relperm.endpoint = pair(rp["endpoints"]);
    const auto& dc = at(doc, "/fluids/density_closure");
    c.fluid.density.kind = dc.value("kind", std::string("constant_compressibility")) == "incompressible"
                               ? fluid::DensityKind::Incompressible
                               : fluid::DensityKind::ConstantCompressibility;
    c.initialPressure = at(doc, "/initial/pressure").get<double>();
    c.initialSw = at(doc, "/initial/sw").get<double>();
    c.fluid.density.referencePressure = dc.contains("reference_pressure")
                                            ? dc["reference_pressure"].get<double>()
                                            : c.initialPressure;
    if (dc.contains("compressibility"))
        c.fluid.density.compressibility = pair(dc["compressibility"]);
    if (c.fluid.density.kind == fluid::DensityKind::Incompressible)
        c.fluid.density.compressibility = {0.0, 0.0};

    auto& w = c.wells;
    if (has(doc, "/wells/injectors"))
        w.injectors = parseWells(at(doc, "/wells/injectors"), wells::WellKind::Injector, "I");
    else
    {
        auto nx = c.dims.nx - 1;
        auto ny = c.dims.ny - 1;
        auto corners = std::vector<std::pair<int, int>> {{0, 0}, {nx, 0}, {0, ny}, {nx, ny}};
        for (std::size_t n = 0; n < corners.size(); ++n)
            w.injectors.push_back(
                {"I" + std::to_string(n + 1), wells::WellKind::Injector, corners[n].first, corners[n].second});
    }
    if (has(doc, "/wells/producers"))
        w.producers = parseWells(at(doc, "/wells/producers"), wells::WellKind::Producer, "P");
    else
        w.producers = parseWells(defaultProducers(at(doc, "/wells/producer_count").get<int>(), c.dims.nx, c.dims.ny),
                                 wells::WellKind::Producer, "P");
    w.producerBhp = at(doc, "/wells/producer_bhp").get<double>();
    w.radius = at(doc, "/wells/radius").get<double>();
    w.skin = at(doc, "/wells/skin").get<double>();
    if (has(doc, "/wells/injection_rate"))
    {
        w.injection = InjectionMode::Explicit;
        w.injectionRate = at(doc, "/wells/injection_rate").get<double>();
    }
    const auto& completion = at(doc, "/wells/completion");
    if (completion.is_array())
    {
        w.kTop = completion[0].get<int>();
        w.kBottom = completion[1].get<int>();
    }

    c.schedule.totalTime = at(doc, "/schedule/total_time").get<double>();
    c.schedule.targetPvi = at(doc, "/schedule/target_pvi").get<double>();
    if (has(doc, "/schedule/report_times"))
        c.schedule.reportTimes = at(doc, "/schedule/report_times").get<std::vector<double>>();
    else
        c.schedule.reportTimes =
            wells::Schedule::uniform(c.schedule.totalTime, at(doc, "/schedule/report_steps").get<int>()).reportTimes;

    auto& s = c.solver;
    s.newtonMaxIters = at(doc, "/solver/newton_max_iters").get<int>();
    s.cnvTolerance = at(doc, "/solver/cnv_tolerance").get<double>();
    s.mbTolerance = at(doc, "/solver/mb_tolerance").get<double>();
    s.wellTolerance = at(doc, "/solver/well_tolerance").get<double>();
    s.initialDt = at(doc, "/solver/initial_dt").get<double>();
    s.minDt = at(doc, "/solver/min_dt").get<double>();
    s.maxDt = at(doc, "/solver/max_dt").get<double>();
    s.cutFactor = at(doc, "/solver/cut_factor").get<double>();
    s.growthFactor = at(doc, "/solver/growth_factor").get<double>();
    s.maxCutsPerStep = at(doc, "/solver/max_cuts_per_step").get<int>();
    s.maxSaturationChange = at(doc, "/solver/max_saturation_change").get<double>();

    c.boundary = at(doc, "/constraints/boundary").get<std::string>();
    c.timeUnit = at(doc, "/constraints/time_unit").get<std::string>();
    c.gravity = at(doc, "/constraints/gravity").get<bool>();
    return c;
}

Json ExecutableConfig::toJson() const
{
    auto d = Json::object();
    d["mesh"] = {{"dims", {dims.nx, dims.ny, dims.nz}},
                 {"extent", {dims.lx, dims.ly, dims.lz}},
                 {"origin_depth", dims.originDepth}};
    d["deformation"] = {{"undulation_amplitude", deformation.undulationAmplitude},
                        {"undulation_wavelength", deformation.undulationWavelength},
                        {"dome_amplitude", deformation.domeAmplitude},
                        {"dome_radius", deformation.domeRadius},
                        {"interface_depths", deformation.interfaceDepths}};
    auto perm = Json::array();
    auto poroUnits = Json::array();
    for (const auto& u: layers)
    {
        perm.push_back({{"mean", u.permeability.mean}, {"std", u.permeability.std}});
        poroUnits.push_back({{"mean", u.porosity.mean}, {"std", u.porosity.std}});
    }
    d["layers"] = {{"permeability", perm}, {"porosity_cap", sampling.porosityCap}};
    if (porosityConstant)
        d["layers"]["porosity"] = {{"kind", "constant"}, {"value", layers.empty() ? 0.0 : layers[0].porosity.mean}};
    else
        d["layers"]["porosity"] = {{"kind", "lognormal"}, {"units", poroUnits}};

    const auto& rp = fluid.relperm;
    const auto& dc = fluid.density;
    d["fluids"] = {{"viscosity", fluid.viscosity},
                   {"density", dc.referenceDensity},
                   {"relperm",
                    {{"family", fluid::toString(rp.family)},
                     {"exponents", rp.exponent},
                     {"residuals", rp.residual},
                     {"endpoints", rp.endpoint}}},
                   {"density_closure",
                    {{"kind", dc.kind == fluid::DensityKind::Incompressible ? "incompressible"
                                                                            : "constant_compressibility"},
                     {"reference_pressure", dc.referencePressure},
                     {"compressibility", dc.compressibility}}}};
    d["initial"] = {{"pressure", initialPressure}, {"sw", initialSw}};

    auto w = Json::object();
    w["injectors"] = wellList(wells.injectors);
    w["producers"] = wellList(wells.producers);
    w["producer_count"] = wells.producers.size();
    w["producer_bhp"] = wells.producerBhp;
    w["radius"] = wells.radius;
    w["skin"] = wells.skin;
    if (wells.injection == InjectionMode::Explicit)
        w["injection_rate"] = wells.injectionRate;
    if (wells.kBottom < 0)
        w["completion"] = "full";
    else
        w["completion"] = {wells.kTop, wells.kBottom};
    d["wells"] = w;

    d["schedule"] = {{"total_time", schedule.totalTime},
                     {"report_times", schedule.reportTimes},
                     {"target_pvi", schedule.targetPvi}};
    d["constraints"] = {{"boundary", boundary}, {"gravity", gravity}, {"time_unit", timeUnit}};
    d["sampling"] = {{"seed", sampling.seed},
                     {"strategy", petro::toString(sampling.strategy)},
                     {"rng_family", sampling.rngFamily}};
    d["solver"] = {{"newton_max_iters", solver.newtonMaxIters},
                   {"cnv_tolerance", solver.cnvTolerance},
                   {"mb_tolerance", solver.mbTolerance},
                   {"well_tolerance", solver.wellTolerance},
                   {"initial_dt", solver.initialDt},
                   {"min_dt", solver.minDt},
                   {"max_dt", solver.maxDt},
                   {"cut_factor", solver.cutFactor},
                   {"growth_factor", solver.growthFactor},
                   {"max_cuts_per_step", solver.maxCutsPerStep},
                   {"max_saturation_change", solver.maxSaturationChange}};
    return d;
}

std::string ExecutableConfig::canonical() const
{
    return toJson().dump();
}

std::string ExecutableConfig::contentHash() const
{
    return sha256Hex(canonical());
}

Json ExecutableConfig::checklistValue(const std::string& key) const
{
    const auto& item = checklist().item(key);
    auto doc = toJson();
    auto out = Json::object();
    for (const auto& p: item.valuePaths)
        if (has(doc, p))
            out[p] = at(doc, p);
    return out;
}

CanonicalForm canonicalSerialize(const ExecutableConfig& config)
{
    auto text = config.canonical();
    return {text, sha256Hex(text)};
}

const AssumptionEntry* AssumptionLedger::find(const std::string& key) const
{
    for (const auto& e: entries)
        if (e.key == key)
            return &e;
    return nullptr;
}

Json AssumptionLedger::toJson() const
{
    auto list = Json::array();
    for (const auto& e: entries)
        list.push_back({{"key", e.key},
                        {"value", e.value},
                        {"provenance", toString(e.provenance)},
                        {"rationale", e.rationale},
                        {"timestamp", e.timestamp},
                        {"event_id", e.eventId}});
    return {{"config_hash", configHash}, {"entries", list}};
}

AssumptionLedger AssumptionLedger::fromJson(const Json& j)
{
    try
    {
        auto l = AssumptionLedger {};
        l.configHash = j.value("config_hash", std::string());
        for (const auto& e: j.at("entries"))
            l.entries.push_back({e.at("key").get<std::string>(), e.at("value"),
                                 provenanceFromString(e.at("provenance").get<std::string>()),
                                 e.value("rationale", std::string()), e.value("timestamp", std::string()),
                                 e.value("event_id", 0L)});
        return l;
    }
    catch (const Json::exception& ex)
    {
        throw Error(ErrorKind::Parse, "malformed ledger", ex.what());
    }
}

bool TacitAssumptionReport::contains(const std::string& key) const
{
    return std::any_of(entries.begin(), entries.end(), [&](const auto& e) { return e.key == key; });
}

TacitAssumptionReport defaultsAudit(const ExecutableConfig& config, AssumptionLedger& ledger,
                                    const DecisionChecklist& list)
{
    auto hash = config.contentHash();
    if (!ledger.configHash.empty() && ledger.configHash != hash)
        throw Error(ErrorKind::StaleLedger, "ledger belongs to a different configuration",
                    ledger.configHash + " vs " + hash);
    ledger.configHash = hash;
    auto report = TacitAssumptionReport {};
    auto now = utcNow();
    for (const auto& item: list.items)
    {
        if (ledger.find(item.key))
            continue;
        auto e = AssumptionEntry {item.key, config.checklistValue(item.key), Provenance::SimulatorDefault,
                                  "not recorded at construction; value read back from the configuration", now, 0};
        ledger.entries.push_back(e);
        report.entries.push_back(e);
    }
    return report;
}

std::pair<ExecutableConfig, AssumptionLedger> legacyBuild(const ModelSpec& spec)
{
    auto work = spec.doc;
    auto stated = std::vector<std::string> {};
    for (const auto& item: checklist().items)
    {
        auto values = builtinDefault(item.key, work).values;
        if (item.key == "density_closure")
            values["/fluids/density_closure"]["reference_pressure"] = 1e5;
        auto missing = missingDefaults(item, work, values);
        if (missing.empty())
            stated.push_back(item.key);
        applyValues(work, missing);
    }
    auto config = configFromDocument(work);
    auto ledger = AssumptionLedger {};
    auto now = utcNow();
    for (const auto& key: stated)
        ledger.entries.push_back(
            {key, config.checklistValue(key), Provenance::UserExplicit, "stated in the spec", now, 0});
    ledger.configHash = config.contentHash();
    return {std::move(config), std::move(ledger)};
}

Json Finding::toJson() const
{
    return {{"key", key}, {"path", path}, {"severity", severity}, {"invariant", invariant}, {"message", message}};
}

std::vector<Finding> staticCheck(const ExecutableConfig& c)
{
    auto out = std::vector<Finding> {};
    auto error = [&](std::string key, std::string path, std::string invariant, std::string message) {
        out.push_back({std::move(key), std::move(path), "error", std::move(invariant), std::move(message)});
    };
    auto warn = [&](std::string key, std::string path, std::string invariant, std::string message) {
        out.push_back({std::move(key), std::move(path), "warning", std::move(invariant), std::move(message)});
    };
    auto guarded = [&](auto&& check, const char* key, const char* path, const char* invariant) {
        try
        {
            check();
        }
        catch (const Error& e)
        {
            error(key, path, invariant, e.what());
        }
    };

    auto dimsOk = true;
    guarded([&] { c.dims.validate(); }, "mesh_dims", "/mesh", "positive-dims");
    if (!out.empty())
        dimsOk = false;

    auto before = out.size();
    if (dimsOk)
        guarded([&] { c.deformation.validate(c.dims.lz); }, "deformation_params", "/deformation/interface_depths",
                "monotone-interfaces");
    if (dimsOk && out.size() == before)
        guarded([&] { mesh::checkPillarMonotone(mesh::buildDeformedMesh(c.dims, c.deformation)); },
                "deformation_amplitudes", "/deformation", "pillar-monotone");

    for (std::size_t u = 0; u < c.layers.size(); ++u)
    {
        auto path = "/layers/permeability/" + std::to_string(u);
        const auto& k = c.layers[u].permeability;
        if (!(k.mean > 0.0) || !(k.std >= 0.0))
            error("layer_statistics", path, "positive-permeability", "permeability mean must be positive");
        else if (k.mean > 1e3 * petro::kDarcy || k.mean < 1e-6 * petro::kMilliDarcy)
            warn("layer_statistics", path, "permeability-magnitude",
                 "permeability far outside the usual range, check the unit");
        const auto& phi = c.layers[u].porosity;
        auto ppath = c.porosityConstant ? std::string("/layers/porosity/value")
                                        : "/layers/porosity/units/" + std::to_string(u);
        if (!(phi.mean > 0.0 && phi.mean < 1.0) || !(phi.std >= 0.0))
            error("porosity_spec", ppath, "porosity-fraction", "porosity must lie strictly between 0 and 1");
        else if (phi.mean > 0.5)
            warn("porosity_spec", ppath, "porosity-magnitude", "porosity above 0.5");
        if (c.porosityConstant)
            break;
    }
    if (!(c.sampling.porosityCap > 0.0 && c.sampling.porosityCap <= 1.0))
        error("porosity_truncation", "/layers/porosity_cap", "porosity-cap", "porosity cap must be in (0, 1]");
    if (c.sampling.rngFamily != petro::kRngFamily)
        error("sampling_strategy", "/sampling/rng_family", "rng-family",
              "unsupported generator family '" + c.sampling.rngFamily + "'");

    for (int ph = 0; ph < 2; ++ph)
    {
        auto path = "/fluids/viscosity/" + std::to_string(ph);
        auto mu = c.fluid.viscosity[ph];
        if (!(mu > 0.0))
            error("fluid_viscosities", path, "positive-viscosity", "viscosity must be positive");
        else if (mu > 1.0 || mu < 1e-5)
            warn("fluid_viscosities", path, "viscosity-magnitude", "viscosity far outside the usual range, check the unit");
        if (!(c.fluid.density.referenceDensity[ph] > 0.0))
            error("reference_densities", "/fluids/density/" + std::to_string(ph), "positive-density",
                  "reference density must be positive");
    }
    guarded([&] { c.fluid.relperm.validate(); }, "relperm_family_and_params", "/fluids/relperm",
            "relperm-parameters");
    before = out.size();
    guarded([&] { c.fluid.density.validate(); }, "density_closure", "/fluids/density_closure", "density-closure");
    if (out.size() == before)
        guarded(
            [&] {
                fluid::density(c.fluid.density, 0, c.initialPressure);
                fluid::density(c.fluid.density, 1, c.initialPressure);
            },
            "density_closure", "/fluids/density_closure", "positive-initial-density");

    if (!(c.initialPressure > 0.0))
        error("initial_state", "/initial/pressure", "positive-pressure", "initial pressure must be positive");
    if (!(c.initialSw >= 0.0 && c.initialSw <= 1.0))
        error("initial_state", "/initial/sw", "saturation-range", "initial saturation must lie in [0, 1]");

    const auto& w = c.wells;
    if (w.injectors.empty() || w.producers.empty())
        error("well_configuration", "/wells", "well-count", "at least one injector and one producer are required");
    auto located = std::set<std::pair<int, int>> {};
    auto checkWell = [&](const WellSpec& s, const char* key, const std::string& path) {
        if (dimsOk && (s.i < 0 || s.j < 0 || s.i >= c.dims.nx || s.j >= c.dims.ny))
            error(key, path, "well-location", "well " + s.name + " lies outside the grid");
        if (!located.insert({s.i, s.j}).second)
            warn(key, path, "well-overlap", "well " + s.name + " shares a column with another well");
    };
    for (std::size_t n = 0; n < w.injectors.size(); ++n)
        checkWell(w.injectors[n], "well_configuration", "/wells/injectors/" + std::to_string(n));
    for (std::size_t n = 0; n < w.producers.size(); ++n)
        checkWell(w.producers[n], "producer_coordinates", "/wells/producers/" + std::to_string(n));
    if (!(w.producerBhp > 0.0))
        error("well_configuration", "/wells/producer_bhp", "positive-bhp", "producer BHP must be positive");
    else if (w.producerBhp >= c.initialPressure)
        warn("well_configuration", "/wells/producer_bhp", "producer-drawdown",
             "producer BHP is not below the initial pressure");
    if (dimsOk)
    {
        auto re = 0.14 * std::hypot(c.dims.dx(), c.dims.dy());
        if (!(w.radius > 0.0 && w.radius < re))
            error("well_configuration", "/wells/radius", "well-radius",
                  "well radius must be positive and below the equivalent radius");
    }
    if (w.injection == InjectionMode::Explicit && !(w.injectionRate > 0.0))
        error("well_configuration", "/wells/injection_rate", "positive-injection", "injection rate must be positive");
    if (dimsOk && w.kBottom >= 0 && !(w.kTop >= 0 && w.kTop <= w.kBottom && w.kBottom < c.dims.nz))
        error("well_completion_range", "/wells/completion", "completion-range", "completion range outside the grid");
    if (c.porosityConstant && !c.layers.empty() && !(c.layers[0].porosity.mean > 0.0))
        error("well_configuration", "/wells", "well-in-inactive-cell", "wells complete in cells without pore volume");

    auto schedule = wells::Schedule {c.schedule.totalTime, c.schedule.reportTimes};
    guarded([&] { schedule.validate(); }, "schedule", "/schedule/report_times", "schedule-times");
    if (!(c.schedule.targetPvi > 0.0))
        error("schedule", "/schedule/target_pvi", "positive-target-pvi", "target pore volumes must be positive");
    guarded([&] { c.solver.validate(); }, "solver_controls", "/solver", "solver-controls");
    if (!c.schedule.reportTimes.empty() && c.solver.initialDt > c.schedule.reportTimes.front())
        warn("solver_controls", "/solver/initial_dt", "initial-step",
             "initial step is longer than the first report interval");
    if (c.boundary != "closed")
        error("boundary_conditions", "/constraints/boundary", "closed-boundary", "only closed boundaries are supported");
    return out;
}

std::string utcNow()
{
    auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm {};
    gmtime_r(&now, &tm);
    char buffer[32];
    std::strftime(buffer, sizeof buffer, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buffer;
}

} // namespace groundloop::spec
